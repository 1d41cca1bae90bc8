#pragma once

// Thompson-sampled MCTS over region-sensing actions with reward/cost Pareto
// fronts backed up from LCB reward statistics.

#include "belief.hpp"
#include "errors.hpp"
#include "grid.hpp"
#include "pareto.hpp"
#include "rng.hpp"
#include "stats.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace cast {

enum class widen_order { heuristic, random };

struct planner_config {
    int episodes = 25000;      // m
    int max_depth = 2;         // d_max
    double gamma = 0.97;
    double alpha_s = 0.5;      // progressive widening exponent
    double lcb_confidence = 0.95;
    std::size_t pareto_cap = 10;
    double discretize_threshold = 0.5;
    widen_order widening = widen_order::heuristic;
    bool uct_use_variance = false; // use sigma^2 instead of sigma in the bonus
    bool record_returns = false;   // keep every r''/c'' per action node for audits
    int tree_dump_episodes = 0;    // snapshot the tree after this many episodes (0 = never)
    double cost_floor = ratio_epsilon; // denominator floor for every reward/cost ratio the planner forms

    void validate() const {
        if (episodes < 1) throw config_error("planner needs at least one episode");
        if (max_depth < 1) throw config_error("max_depth must be >= 1");
        if (!(gamma > 0.0 && gamma <= 1.0)) throw config_error("gamma must lie in (0, 1]");
        if (!(alpha_s > 0.0 && alpha_s < 1.0)) throw config_error("alpha_s must lie in (0, 1)");
        if (!(lcb_confidence > 0.5 && lcb_confidence < 1.0)) throw config_error("lcb_confidence must lie in (0.5, 1)");
        if (pareto_cap < 1) throw config_error("pareto_cap must be >= 1");
        if (!(cost_floor > 0.0)) throw config_error("cost_floor must be positive");
    }
};

/// What the planner needs to know about the world besides the belief.
struct planning_env {
    const action_space* space = nullptr;
    cost_model costs;
};

// ---------------------------------------------------------------------------
// Tree

struct belief_node {
    int depth = 0;
    int visits = 0;
    running_stats rewards;
    double r_lcb = 0.0;
    double entry_cost = 0.0;
    rc_vector immediate;
    pareto_front front;
    std::vector<int> children; // action node indices
    std::vector<char> tried;   // per action id, allocated on first widening
    position pos;
    int parent = -1;           // action node index
    action_id via_action = -1;
    double observation = 0.0;
};

struct action_node {
    action_id action = -1;
    int visits = 0;
    running_stats returns; // r''/c'' terms: mean is Q^UCT, variance is sigma^2_{h,a}
    std::vector<double> recorded;
    std::vector<std::pair<long long, int>> children; // observation bucket -> belief node
    pareto_front front;
    int parent = -1;
};

struct search_tree {
    std::vector<belief_node> beliefs;
    std::vector<action_node> actions;

    const belief_node& root() const { return beliefs.front(); }
};

/// Belief-node identity for an ML observation: equal after rounding to 1e-9.
inline long long observation_bucket(double o) { return std::llround(o * 1e9); }

// ---------------------------------------------------------------------------
// Selection primitives

inline long floor_pow(long n, double alpha) {
    if (n <= 0) return 0;
    auto f = static_cast<long>(std::floor(std::pow(static_cast<double>(n), alpha)));
    // guard pow rounding around perfect powers
    const double inv = 1.0 / alpha;
    while (std::pow(static_cast<double>(f + 1), inv) <= static_cast<double>(n) + 1e-9) ++f;
    while (f > 0 && std::pow(static_cast<double>(f), inv) > static_cast<double>(n) + 1e-9) --f;
    return f;
}

/// floor(n^alpha) > floor((n-1)^alpha); n already counts the current visit.
inline bool should_widen(long visits, double alpha) { return floor_pow(visits, alpha) > floor_pow(visits - 1, alpha); }

/// Q + sqrt(2 sigma sqrt(n_h) / n_ha) + 16 sqrt(n_h) / (3 n_ha).
inline double cast_uct_score(double q, double sigma, long n_h, long n_ha) {
    const double root_n = std::sqrt(static_cast<double>(n_h));
    const double na = static_cast<double>(n_ha);
    return q + std::sqrt(2.0 * sigma * root_n / na) + 16.0 * root_n / (3.0 * na);
}

/// Argmax of cast_uct_score over the node's children; ties go to the lowest action id.
inline int cast_uct_select(const search_tree& tree, const belief_node& node, bool use_variance = false) {
    if (node.children.empty()) throw contract_violation("cast_uct_select: node has no children");
    int best = -1;
    double best_score = -INFINITY;
    for (int idx : node.children) {
        const auto& an = tree.actions[static_cast<std::size_t>(idx)];
        const double var = an.returns.population_variance();
        const double spread = use_variance ? var : std::sqrt(var);
        const double s = cast_uct_score(an.returns.mean, spread, node.visits, an.visits);
        if (best < 0 || s > best_score ||
            (s == best_score && an.action < tree.actions[static_cast<std::size_t>(best)].action)) {
            best = idx;
            best_score = s;
        }
    }
    return best;
}

/// Pushes a new lambda- sample and refreshes the node's LCB and immediate vector.
inline double update_lcb(belief_node& node, double reward, t_quantiles& t) {
    if (reward < 0.0) throw contract_violation("update_lcb: reward must be non-negative");
    node.rewards.push(reward);
    node.r_lcb = lower_confidence_bound(node.rewards, t);
    node.immediate = {node.r_lcb, -node.entry_cost};
    return node.r_lcb;
}

/// Root decision: among root children, keep vectors on the joint Pareto front
/// and return the action owning the best reward/cost ratio (ties: lowest id).
inline action_id select_root_action(std::span<const std::pair<action_id, const pareto_front*>> children,
                                    double cost_floor = ratio_epsilon) {
    std::vector<rc_vector> all;
    for (const auto& [a, f] : children) all.insert(all.end(), f->vectors().begin(), f->vectors().end());
    if (all.empty()) throw planning_error("root has no evaluated actions");
    const auto joint = pareto_filter(std::move(all));
    action_id best = -1;
    double best_ratio = -INFINITY;
    for (const auto& [a, f] : children) {
        for (const auto& v : f->vectors()) {
            const bool on_front = std::find(joint.vectors().begin(), joint.vectors().end(), v) != joint.vectors().end();
            if (!on_front) continue;
            const double r = reward_per_cost(v.r_lcb, v.cost(), cost_floor);
            if (best < 0 || r > best_ratio || (r == best_ratio && a < best)) {
                best = a;
                best_ratio = r;
            }
        }
    }
    return best;
}

// ---------------------------------------------------------------------------
// Estimate tracking along a tree path

/// Ridge estimate after pushing simulated measurements onto the root data,
/// via rank-one updates of the root posterior covariance. Gain vectors
/// Sigma_d x are rebuilt from cached root columns in O(n * depth).
class path_estimator {
public:
    path_estimator(const action_space& space, const mat& root_sigma, double sigma2, vec root_estimate)
        : space_(&space), sigma_(&root_sigma), sigma2_(sigma2), root_(std::move(root_estimate)),
          cached_(space.size(), 0), columns_(space.size()) {
        const auto n = root_.size();
        scratch_.resize(n);
    }

    std::size_t depth() const { return levels_.size(); }
    const vec& current() const { return levels_.empty() ? root_ : levels_.back().estimate; }

    /// Sigma_d x_b for the current path depth.
    void gain(action_id b, vec& out) {
        const auto& act = (*space_)[b];
        out = root_column(b);
        for (const auto& lv : levels_) out -= lv.u * (region_dot(act, lv.u) / lv.den);
    }

    /// lambda- of measuring b with observation o, without changing the path.
    double lambda_if(action_id b, double o, const vec& beta) {
        const auto& act = (*space_)[b];
        gain(b, scratch_);
        const double den = sigma2_ + region_dot(act, scratch_);
        const vec& est = current();
        const double g = (o - region_dot(act, est)) / den;
        // |beta - est|^2 - |beta - est - g u|^2 = 2 g u.(beta - est) - g^2 |u|^2
        const double cross = scratch_.dot(beta) - scratch_.dot(est);
        return std::max(0.0, 2.0 * g * cross - g * g * scratch_.squaredNorm());
    }

    /// Appends (b, o) and returns the lambda- reward for beta.
    double push(action_id b, double o, const vec& beta) {
        const auto& act = (*space_)[b];
        level lv;
        gain(b, lv.u);
        lv.den = sigma2_ + region_dot(act, lv.u);
        const vec& before = current();
        lv.estimate = before + lv.u * ((o - region_dot(act, before)) / lv.den);
        const double reward = lambda_minus(beta, before, lv.estimate);
        levels_.push_back(std::move(lv));
        return reward;
    }

    void pop() { levels_.pop_back(); }

private:
    struct level {
        vec u;
        double den = 0.0;
        vec estimate;
    };

    const vec& root_column(action_id b) {
        const auto i = static_cast<std::size_t>(b);
        if (!cached_[i]) {
            const auto& act = (*space_)[b];
            vec col = vec::Zero(root_.size());
            for (int c : act.cells) col += sigma_->col(c);
            columns_[i] = col * act.weight;
            cached_[i] = 1;
        }
        return columns_[i];
    }

    const action_space* space_;
    const mat* sigma_;
    double sigma2_;
    vec root_;
    std::vector<char> cached_;
    std::vector<vec> columns_;
    std::vector<level> levels_;
    vec scratch_;
};

// ---------------------------------------------------------------------------
// Planner

struct search_result {
    action_id action = -1;
    std::optional<nlohmann::json> tree_dump;
};

class cast_planner {
public:
    cast_planner(planning_env env, planner_config cfg) : env_(env), cfg_(cfg), t_(cfg.lcb_confidence) {
        cfg_.validate();
        if (env_.space == nullptr || env_.space->size() == 0) throw planning_error("no actions to plan over");
    }

    const planner_config& config() const { return cfg_; }
    const search_tree& tree() const { return tree_; }

    /// Builds a fresh tree over `cfg.episodes` episodes and returns the chosen action.
    search_result search(const measurement_set& data, const gaussian_belief& belief, const vec& root_estimate,
                         const position& agent_pos, rng_t& rng) {
        if (belief.n() != env_.space->grid().n()) throw contract_violation("belief does not match the grid");
        tree_ = {};
        tree_.beliefs.reserve(static_cast<std::size_t>(cfg_.episodes) * static_cast<std::size_t>(cfg_.max_depth) + 1);
        tree_.actions.reserve(static_cast<std::size_t>(cfg_.episodes) * static_cast<std::size_t>(cfg_.max_depth));
        belief_node root;
        root.pos = agent_pos;
        tree_.beliefs.push_back(std::move(root));

        path_estimator path(*env_.space, belief.sigma, belief.sigma2, root_estimate);
        thompson_sampler sampler(belief);
        vec sample(belief.n());
        search_result result;
        (void)data;

        for (int e = 0; e < cfg_.episodes; ++e) {
            sampler.sample_into(rng, sample);
            const auto bin = discretize(sample, cfg_.discretize_threshold);
            simulate(bin.beta_bin, path, 0, rng);
            if (cfg_.tree_dump_episodes > 0 && e + 1 == cfg_.tree_dump_episodes) result.tree_dump = dump_tree();
        }

        std::vector<std::pair<action_id, const pareto_front*>> root_children;
        for (int idx : tree_.root().children) {
            const auto& an = tree_.actions[static_cast<std::size_t>(idx)];
            root_children.emplace_back(an.action, &an.front);
        }
        result.action = select_root_action(root_children, cfg_.cost_floor);
        return result;
    }

    search_result search(const measurement_set& data, const gaussian_belief& belief, const position& agent_pos, rng_t& rng) {
        return search(data, belief, estimate(data, belief, *env_.space), agent_pos, rng);
    }

    /// One SIMULATE descent from belief node `h`. Returns (r'', c'').
    std::pair<double, double> simulate(const vec& beta, path_estimator& path, int h, rng_t& rng) {
        auto& node = tree_.beliefs[static_cast<std::size_t>(h)];
        ++node.visits;
        if (node.depth == cfg_.max_depth) return {0.0, 0.0};

        const int a_idx = choose_action(h, beta, path, rng);
        const position here = tree_.beliefs[static_cast<std::size_t>(h)].pos;
        const int depth = tree_.beliefs[static_cast<std::size_t>(h)].depth;
        auto& an = tree_.actions[static_cast<std::size_t>(a_idx)];
        ++an.visits;
        const auto& act = (*env_.space)[an.action];
        const double o = region_dot(act, beta);
        const long long bucket = observation_bucket(o);

        int child = -1;
        for (const auto& [key, idx] : an.children)
            if (key == bucket) child = idx;
        if (child < 0) {
            belief_node fresh;
            fresh.depth = depth + 1;
            fresh.entry_cost = action_cost(here, act, env_.costs);
            fresh.pos = act.anchor;
            fresh.parent = a_idx;
            fresh.via_action = an.action;
            fresh.observation = o;
            child = static_cast<int>(tree_.beliefs.size());
            tree_.beliefs.push_back(std::move(fresh));
            tree_.actions[static_cast<std::size_t>(a_idx)].children.emplace_back(bucket, child);
        }
        const action_id a = tree_.actions[static_cast<std::size_t>(a_idx)].action;

        const double r = path.push(a, o, beta);
        const double c = tree_.beliefs[static_cast<std::size_t>(child)].entry_cost;
        update_lcb(tree_.beliefs[static_cast<std::size_t>(child)], r, t_);

        const auto [r_next, c_next] = simulate(beta, path, child, rng);
        path.pop();

        const double r_total = r + cfg_.gamma * r_next;
        const double c_total = c + c_next;
        auto& an2 = tree_.actions[static_cast<std::size_t>(a_idx)];
        const double ratio = reward_per_cost(r_total, c_total, cfg_.cost_floor);
        an2.returns.push(ratio);
        if (cfg_.record_returns) an2.recorded.push_back(ratio);

        update_belief_front(child);
        update_action_front(a_idx);
        return {r_total, c_total};
    }

    nlohmann::json dump_tree(std::size_t max_nodes = 2000) const {
        nlohmann::json beliefs = nlohmann::json::array(), actions = nlohmann::json::array();
        auto front_json = [](const pareto_front& f) {
            nlohmann::json out = nlohmann::json::array();
            for (const auto& v : f.vectors()) out.push_back({v.r_lcb, v.neg_cost});
            return out;
        };
        for (std::size_t i = 0; i < tree_.beliefs.size() && i < max_nodes; ++i) {
            const auto& b = tree_.beliefs[i];
            beliefs.push_back({{"id", i}, {"depth", b.depth}, {"visits", b.visits}, {"r_lcb", b.r_lcb},
                               {"entry_cost", b.entry_cost}, {"parent", b.parent}, {"children", b.children},
                               {"front", front_json(b.front)}});
        }
        for (std::size_t i = 0; i < tree_.actions.size() && i < max_nodes; ++i) {
            const auto& a = tree_.actions[i];
            nlohmann::json kids = nlohmann::json::array();
            for (const auto& [key, idx] : a.children) kids.push_back(idx);
            actions.push_back({{"id", i}, {"action", a.action}, {"visits", a.visits}, {"q", a.returns.mean},
                               {"parent", a.parent}, {"children", kids}, {"front", front_json(a.front)}});
        }
        return {{"belief_nodes", beliefs}, {"action_nodes", actions}};
    }

private:
    int choose_action(int h, const vec& beta, path_estimator& path, rng_t& rng) {
        auto& node = tree_.beliefs[static_cast<std::size_t>(h)];
        const auto n_actions = env_.space->size();
        if (should_widen(node.visits, cfg_.alpha_s) && node.children.size() < n_actions) {
            if (node.tried.empty()) node.tried.assign(n_actions, 0);
            const action_id pick = pick_untried(node, beta, path, rng);
            auto& fresh_node = tree_.beliefs[static_cast<std::size_t>(h)];
            fresh_node.tried[static_cast<std::size_t>(pick)] = 1;
            action_node an;
            an.action = pick;
            an.parent = h;
            const int idx = static_cast<int>(tree_.actions.size());
            tree_.actions.push_back(std::move(an));
            tree_.beliefs[static_cast<std::size_t>(h)].children.push_back(idx);
            return idx;
        }
        if (node.children.empty()) throw planning_error("no expandable actions");
        return cast_uct_select(tree_, node, cfg_.uct_use_variance);
    }

    // Untried action with the best one-step lambda- per unit cost under this
    // episode's sample; ties broken uniformly at random.
    action_id pick_untried(const belief_node& node, const vec& beta, path_estimator& path, rng_t& rng) {
        ties_.clear();
        if (cfg_.widening == widen_order::random) {
            for (const auto& act : env_.space->actions())
                if (!node.tried[static_cast<std::size_t>(act.id)]) ties_.push_back(act.id);
        } else {
            double best = -INFINITY;
            for (const auto& act : env_.space->actions()) {
                if (node.tried[static_cast<std::size_t>(act.id)]) continue;
                const double o = region_dot(act, beta);
                const double score =
                    reward_per_cost(path.lambda_if(act.id, o, beta), action_cost(node.pos, act, env_.costs), cfg_.cost_floor);
                if (score > best) {
                    best = score;
                    ties_.clear();
                }
                if (score == best) ties_.push_back(act.id);
            }
        }
        if (ties_.size() == 1) return ties_.front();
        std::uniform_int_distribution<std::size_t> pick(0, ties_.size() - 1);
        return ties_[pick(rng)];
    }

    void update_belief_front(int b) {
        auto& node = tree_.beliefs[static_cast<std::size_t>(b)];
        if (node.depth == cfg_.max_depth || node.children.empty()) {
            node.front = pareto_front::singleton(node.immediate, cfg_.pareto_cap);
            return;
        }
        std::vector<rc_vector> pool;
        for (int idx : node.children) {
            const auto& f = tree_.actions[static_cast<std::size_t>(idx)].front;
            pool.insert(pool.end(), f.vectors().begin(), f.vectors().end());
        }
        node.front = discount_shift(pareto_filter(std::move(pool), cfg_.pareto_cap), node.immediate, cfg_.gamma);
    }

    void update_action_front(int a) {
        auto& an = tree_.actions[static_cast<std::size_t>(a)];
        combine_.clear();
        for (const auto& [key, idx] : an.children) {
            const auto& child = tree_.beliefs[static_cast<std::size_t>(idx)];
            if (child.visits > 0 && !child.front.empty()) combine_.push_back({&child.front, static_cast<double>(child.visits)});
        }
        an.front = weighted_combine(combine_, cfg_.pareto_cap);
    }

    planning_env env_;
    planner_config cfg_;
    t_quantiles t_;
    search_tree tree_;
    std::vector<action_id> ties_;
    std::vector<weighted_front> combine_;
};

// ---------------------------------------------------------------------------
// Audits

struct tree_audit {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

inline tree_audit audit_tree(const search_tree& tree, const planner_config& cfg) {
    tree_audit out;
    auto fail = [&](std::string msg) { out.violations.push_back(std::move(msg)); };
    auto check_front = [&](const pareto_front& f, const std::string& where) {
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (!std::isfinite(f[i].r_lcb) || !std::isfinite(f[i].neg_cost)) fail(where + ": non-finite front vector");
            for (std::size_t j = i + 1; j < f.size(); ++j)
                if (!incomparable(f[i], f[j])) fail(where + ": front members are not mutually incomparable");
        }
        if (f.size() > cfg.pareto_cap) fail(where + ": front exceeds cap");
    };
    for (std::size_t i = 0; i < tree.beliefs.size(); ++i) {
        const auto& b = tree.beliefs[i];
        const std::string where = "belief " + std::to_string(i);
        if (b.depth == cfg.max_depth && !b.children.empty()) fail(where + ": leaf has children");
        if (static_cast<long>(b.children.size()) > floor_pow(b.visits, cfg.alpha_s))
            fail(where + ": more children than the widening bound");
        if (i > 0 && b.rewards.count > b.visits) fail(where + ": more rewards than visits");
        if (!std::isfinite(b.r_lcb) || b.r_lcb < 0.0) fail(where + ": invalid r_lcb");
        if (b.depth < cfg.max_depth && b.visits > 0) {
            long sum = 0;
            for (int idx : b.children) sum += tree.actions[static_cast<std::size_t>(idx)].visits;
            if (sum != b.visits) fail(where + ": visits != sum of action visits");
        }
        if (i > 0 || !b.front.empty()) check_front(b.front, where);
    }
    for (std::size_t i = 0; i < tree.actions.size(); ++i) {
        const auto& a = tree.actions[i];
        const std::string where = "action " + std::to_string(i);
        long sum = 0;
        for (const auto& [key, idx] : a.children) sum += tree.beliefs[static_cast<std::size_t>(idx)].visits;
        if (sum != a.visits) fail(where + ": visits != sum of child visits");
        if (!std::isfinite(a.returns.mean) || a.returns.population_variance() < 0.0) fail(where + ": invalid Q statistics");
        if (!a.recorded.empty()) {
            double s = 0.0;
            for (double x : a.recorded) s += x;
            const double mean = s / static_cast<double>(a.recorded.size());
            if (std::abs(mean - a.returns.mean) > 1e-10 * std::max(1.0, std::abs(mean))) fail(where + ": running Q drifted from recomputed mean");
        }
        check_front(a.front, where);
    }
    return out;
}

} // namespace cast
