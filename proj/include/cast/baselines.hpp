#pragma once

// Comparison planners: exhaustive point-sense coverage (PS), a cost-agnostic
// myopic Thompson sampler and a single-target information-greedy planner.

#include "belief.hpp"
#include "grid.hpp"
#include "planner.hpp"

#include <cmath>
#include <numeric>
#include <optional>
#include <vector>

namespace cast {

// ---------------------------------------------------------------------------
// PS

/// Per-agent boustrophedon sweeps over contiguous row bands.
struct coverage_plan {
    std::vector<std::vector<action_id>> sequences;

    int agents() const { return static_cast<int>(sequences.size()); }
};

inline coverage_plan make_coverage_plan(const action_space& space, int agents) {
    if (agents < 1) throw config_error("coverage plan needs at least one agent");
    const auto& g = space.grid();
    coverage_plan plan;
    plan.sequences.resize(static_cast<std::size_t>(agents));
    const int base = g.rows / agents, extra = g.rows % agents;
    int row = 0;
    for (int j = 0; j < agents; ++j) {
        const int band = base + (j < extra ? 1 : 0);
        for (int r = 0; r < band; ++r, ++row) {
            for (int c = 0; c < g.cols; ++c) {
                const int col = (r % 2 == 0) ? c : g.cols - 1 - c;
                plan.sequences[static_cast<std::size_t>(j)].push_back(space.point_action(g.flat(row, col)));
            }
        }
    }
    return plan;
}

/// step-th point sense of the agent's sweep, or nullopt once it is exhausted.
inline std::optional<action_id> ps_next(const coverage_plan& plan, int agent, std::size_t step) {
    const auto& seq = plan.sequences.at(static_cast<std::size_t>(agent));
    if (step >= seq.size()) return std::nullopt;
    return seq[step];
}

/// Team cost of one full sweep with every agent starting at `start`.
inline double ps_sweep_cost(const action_space& space, const coverage_plan& plan, const cost_model& costs, position start) {
    double total = 0.0;
    for (const auto& seq : plan.sequences) {
        position at = start;
        double agent = 0.0;
        for (action_id a : seq) {
            agent += action_cost(at, space[a], costs);
            at = space[a].anchor;
        }
        total += agent;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Myopic Thompson sampling

/// lambda- of every action under the ML observation of `beta_bin`, from the
/// current estimate (one step, no cost).
inline std::vector<double> one_step_rewards(const action_space& space, const gaussian_belief& belief, const vec& current_estimate,
                                            const vec& beta_bin) {
    path_estimator path(space, belief.sigma, belief.sigma2, current_estimate);
    std::vector<double> out(space.size());
    for (const auto& act : space.actions()) out[static_cast<std::size_t>(act.id)] = path.lambda_if(act.id, region_dot(act, beta_bin), beta_bin);
    return out;
}

inline action_id argmax_lowest(const std::vector<double>& scores) {
    action_id best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i)
        if (scores[i] > scores[static_cast<std::size_t>(best)]) best = static_cast<action_id>(i);
    return best;
}

inline action_id myopic_ts_next(const action_space& space, const gaussian_belief& belief, const vec& current_estimate, rng_t& rng,
                                double threshold = 0.5) {
    const auto bin = discretize(thompson_sample(belief, rng), threshold);
    return argmax_lowest(one_step_rewards(space, belief, current_estimate, bin.beta_bin));
}

// ---------------------------------------------------------------------------
// Information-greedy over single-target hypotheses

/// Posterior over "the (only) target sits in cell i" from a uniform prior.
inline vec single_target_posterior(const action_space& space, const measurement_set& data, double sigma2) {
    const int n = space.grid().n();
    vec log_p = vec::Zero(n);
    for (std::size_t t = 0; t < data.count(); ++t) {
        const auto& act = space[data.actions[t]];
        const double y = data.y[t];
        // every hypothesis predicts 0 except those inside the region
        log_p.array() -= y * y / (2.0 * sigma2);
        const double inside = -(y - act.weight) * (y - act.weight) / (2.0 * sigma2) + y * y / (2.0 * sigma2);
        for (int c : act.cells) log_p[c] += inside;
    }
    const double mx = log_p.maxCoeff();
    vec p = (log_p.array() - mx).exp();
    return p / p.sum();
}

/// I(target-in-region; y) for y ~ q N(w, s2) + (1-q) N(0, s2), by Simpson quadrature.
inline double mixture_information(double q, double w, double sigma2) {
    if (!(q > 0.0 && q < 1.0) || w == 0.0) return 0.0;
    const double s = std::sqrt(sigma2);
    const double lo = std::min(0.0, w) - 10.0 * s, hi = std::max(0.0, w) + 10.0 * s;
    constexpr int intervals = 800;
    const double h = (hi - lo) / intervals;
    auto integrand = [&](double y) {
        const double e1 = -(y - w) * (y - w) / (2.0 * sigma2), e0 = -y * y / (2.0 * sigma2);
        const double norm = 1.0 / std::sqrt(2.0 * M_PI * sigma2);
        const double f1 = norm * std::exp(e1), f0 = norm * std::exp(e0);
        // log(f_c / m) with m = q f1 + (1-q) f0, evaluated in log space
        const double mx = std::max(e1, e0);
        const double log_m_rel = mx + std::log(q * std::exp(e1 - mx) + (1.0 - q) * std::exp(e0 - mx));
        return q * f1 * (e1 - log_m_rel) + (1.0 - q) * f0 * (e0 - log_m_rel);
    };
    double acc = integrand(lo) + integrand(hi);
    for (int i = 1; i < intervals; ++i) acc += integrand(lo + i * h) * (i % 2 ? 4.0 : 2.0);
    return std::max(0.0, acc * h / 3.0);
}

/// Expected entropy drop of the hypothesis distribution for every action.
inline std::vector<double> expected_entropy_reduction(const action_space& space, const vec& hypothesis, double sigma2) {
    std::vector<double> gain(space.size());
    for (const auto& act : space.actions()) {
        double q = 0.0;
        for (int c : act.cells) q += hypothesis[c];
        gain[static_cast<std::size_t>(act.id)] = mixture_information(std::clamp(q, 0.0, 1.0), act.weight, sigma2);
    }
    return gain;
}

inline action_id info_greedy_next(const action_space& space, const measurement_set& data, double sigma2) {
    return argmax_lowest(expected_entropy_reduction(space, single_target_posterior(space, data, sigma2), sigma2));
}

} // namespace cast
