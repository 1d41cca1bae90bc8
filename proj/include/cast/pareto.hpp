#pragma once

#include "errors.hpp"

#include <algorithm>
#include <cstddef>
#include <limits>
#include <span>
#include <utility>
#include <vector>

namespace cast {

/// (LCB reward, negated cost). Both coordinates are maximized.
struct rc_vector {
    double r_lcb = 0.0;
    double neg_cost = 0.0;

    double cost() const { return -neg_cost; }
    friend bool operator==(const rc_vector&, const rc_vector&) = default;
};

inline constexpr double ratio_epsilon = 1e-9;
inline constexpr std::size_t unbounded = std::numeric_limits<std::size_t>::max();

/// Reward per unit cost with the zero-cost guard.
inline double reward_per_cost(double reward, double cost, double floor = ratio_epsilon) { return reward / std::max(cost, floor); }
inline double reward_per_cost(const rc_vector& g) { return reward_per_cost(g.r_lcb, g.cost()); }

inline bool dominates(const rc_vector& g, const rc_vector& h) {
    return g.r_lcb >= h.r_lcb && g.neg_cost >= h.neg_cost && (g.r_lcb > h.r_lcb || g.neg_cost > h.neg_cost);
}

inline bool incomparable(const rc_vector& g, const rc_vector& h) {
    return (g.r_lcb > h.r_lcb && g.neg_cost < h.neg_cost) || (g.r_lcb < h.r_lcb && g.neg_cost > h.neg_cost);
}

/// Non-dominated set, stored cheapest first (neg_cost descending, so r_lcb ascending).
class pareto_front {
public:
    pareto_front() = default;

    std::span<const rc_vector> vectors() const { return vectors_; }
    std::size_t size() const { return vectors_.size(); }
    bool empty() const { return vectors_.empty(); }
    std::size_t cap() const { return cap_; }
    const rc_vector& operator[](std::size_t i) const { return vectors_[i]; }

    static pareto_front singleton(rc_vector g, std::size_t cap = unbounded) {
        pareto_front f;
        f.vectors_.push_back(g);
        f.cap_ = cap;
        return f;
    }

    friend bool operator==(const pareto_front& a, const pareto_front& b) { return a.vectors_ == b.vectors_; }

private:
    friend pareto_front pareto_filter(std::vector<rc_vector> candidates, std::size_t cap);
    std::vector<rc_vector> vectors_;
    std::size_t cap_ = unbounded;
};

/// Maximal non-dominated subset; beyond `cap` the vectors with the best
/// reward/cost ratio survive. Exact duplicates collapse to one.
inline pareto_front pareto_filter(std::vector<rc_vector> candidates, std::size_t cap = unbounded) {
    if (candidates.empty()) throw contract_violation("pareto_filter: empty candidate set");
    if (cap == 0) throw contract_violation("pareto_filter: cap must be positive");
    std::sort(candidates.begin(), candidates.end(), [](const rc_vector& a, const rc_vector& b) {
        return a.r_lcb != b.r_lcb ? a.r_lcb > b.r_lcb : a.neg_cost > b.neg_cost;
    });
    pareto_front out;
    out.cap_ = cap;
    double best_neg_cost = -std::numeric_limits<double>::infinity();
    for (const auto& g : candidates) {
        if (g.neg_cost > best_neg_cost) {
            out.vectors_.push_back(g);
            best_neg_cost = g.neg_cost;
        }
    }
    if (out.vectors_.size() > cap) {
        std::sort(out.vectors_.begin(), out.vectors_.end(), [](const rc_vector& a, const rc_vector& b) {
            const double ra = reward_per_cost(a), rb = reward_per_cost(b);
            if (ra != rb) return ra > rb;
            return a.r_lcb > b.r_lcb;
        });
        out.vectors_.resize(cap);
    }
    // canonical order: cheapest first
    std::sort(out.vectors_.begin(), out.vectors_.end(),
              [](const rc_vector& a, const rc_vector& b) { return a.neg_cost > b.neg_cost; });
    return out;
}

inline pareto_front pareto_filter(std::span<const rc_vector> candidates, std::size_t cap = unbounded) {
    return pareto_filter(std::vector<rc_vector>(candidates.begin(), candidates.end()), cap);
}

/// immediate + (gamma * r, neg_cost) for every member; costs add undiscounted.
inline pareto_front discount_shift(const pareto_front& front, const rc_vector& immediate, double gamma) {
    if (!(gamma > 0.0 && gamma <= 1.0)) throw contract_violation("discount_shift: gamma must lie in (0, 1]");
    if (front.empty()) throw contract_violation("discount_shift: empty front");
    std::vector<rc_vector> shifted;
    shifted.reserve(front.size());
    for (const auto& v : front.vectors())
        shifted.push_back({immediate.r_lcb + gamma * v.r_lcb, immediate.neg_cost + v.neg_cost});
    return pareto_filter(std::move(shifted), front.cap());
}

struct weighted_front {
    const pareto_front* front;
    double weight;
};

/// Weighted Minkowski combination: every way of picking one vector per child,
/// summed with normalized weights, then filtered. Partial sums are filtered
/// (and capped) child by child, which is exact for the non-dominated set when
/// the cap is not hit.
inline pareto_front weighted_combine(std::span<const weighted_front> children, std::size_t cap = unbounded) {
    if (children.empty()) throw contract_violation("weighted_combine: no children");
    double total = 0.0;
    for (const auto& c : children) {
        if (c.front == nullptr || c.front->empty()) throw contract_violation("weighted_combine: empty child front");
        if (!(c.weight > 0.0)) throw contract_violation("weighted_combine: weights must be positive");
        total += c.weight;
    }
    std::vector<rc_vector> acc{{0.0, 0.0}};
    std::vector<rc_vector> next;
    for (const auto& c : children) {
        const double w = c.weight / total;
        next.clear();
        next.reserve(acc.size() * c.front->size());
        for (const auto& a : acc)
            for (const auto& v : c.front->vectors()) next.push_back({a.r_lcb + w * v.r_lcb, a.neg_cost + w * v.neg_cost});
        auto partial = pareto_filter(std::move(next), cap);
        acc.assign(partial.vectors().begin(), partial.vectors().end());
        next = {};
    }
    return pareto_filter(std::move(acc), cap);
}

} // namespace cast
