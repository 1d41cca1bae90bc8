#pragma once

// Event-driven asynchronous team simulation. Agents never wait for each other:
// each one plans on whatever data it holds when its own action completes.

#include "baselines.hpp"
#include "belief.hpp"
#include "grid.hpp"
#include "planner.hpp"
#include "rng.hpp"

#include <cstdio>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <string>
#include <vector>

namespace cast {

// ---------------------------------------------------------------------------
// Planners as seen by the harness

struct agent_view {
    int agent = 0;
    position pos;
    const measurement_set& data;
    const gaussian_belief& belief;
    const vec& estimate;
    int decisions = 0;
};

class agent_planner {
public:
    virtual ~agent_planner() = default;
    /// Next action, or nullopt when the agent has nothing left to do.
    virtual std::optional<action_id> next(const agent_view& view, rng_t& rng) = 0;
    virtual std::string name() const = 0;
};

class cast_agent final : public agent_planner {
public:
    cast_agent(planning_env env, planner_config cfg) : planner_(env, cfg) {}
    std::optional<action_id> next(const agent_view& v, rng_t& rng) override {
        return planner_.search(v.data, v.belief, v.estimate, v.pos, rng).action;
    }
    std::string name() const override { return "cast"; }
    const cast_planner& planner() const { return planner_; }

private:
    cast_planner planner_;
};

class ps_agent final : public agent_planner {
public:
    ps_agent(std::shared_ptr<const coverage_plan> plan, int agent, bool repeat) : plan_(std::move(plan)), agent_(agent), repeat_(repeat) {}
    std::optional<action_id> next(const agent_view&, rng_t&) override {
        auto a = ps_next(*plan_, agent_, step_);
        if (!a && repeat_ && step_ > 0) {
            step_ = 0;
            a = ps_next(*plan_, agent_, step_);
        }
        if (a) ++step_;
        return a;
    }
    std::string name() const override { return "ps"; }

private:
    std::shared_ptr<const coverage_plan> plan_;
    int agent_;
    bool repeat_;
    std::size_t step_ = 0;
};

class myopic_ts_agent final : public agent_planner {
public:
    myopic_ts_agent(const action_space& space, double threshold) : space_(&space), threshold_(threshold) {}
    std::optional<action_id> next(const agent_view& v, rng_t& rng) override {
        return myopic_ts_next(*space_, v.belief, v.estimate, rng, threshold_);
    }
    std::string name() const override { return "ts-myopic"; }

private:
    const action_space* space_;
    double threshold_;
};

class info_greedy_agent final : public agent_planner {
public:
    explicit info_greedy_agent(const action_space& space) : space_(&space) {}
    std::optional<action_id> next(const agent_view& v, rng_t&) override { return info_greedy_next(*space_, v.data, v.belief.sigma2); }
    std::string name() const override { return "info-greedy"; }

private:
    const action_space* space_;
};

inline const std::vector<std::string>& planner_names() {
    static const std::vector<std::string> names{"cast", "ps", "ts-myopic", "info-greedy"};
    return names;
}

/// One planner per agent, selected by name.
inline std::vector<std::unique_ptr<agent_planner>> make_team(const std::string& name, int agents, const planning_env& env,
                                                             const planner_config& cfg, bool ps_repeat = true) {
    std::vector<std::unique_ptr<agent_planner>> team;
    std::shared_ptr<const coverage_plan> plan;
    if (name == "ps") plan = std::make_shared<const coverage_plan>(make_coverage_plan(*env.space, agents));
    for (int j = 0; j < agents; ++j) {
        if (name == "cast") team.push_back(std::make_unique<cast_agent>(env, cfg));
        else if (name == "ps") team.push_back(std::make_unique<ps_agent>(plan, j, ps_repeat));
        else if (name == "ts-myopic") team.push_back(std::make_unique<myopic_ts_agent>(*env.space, cfg.discretize_threshold));
        else if (name == "info-greedy") team.push_back(std::make_unique<info_greedy_agent>(*env.space));
        else throw config_error("unknown planner '" + name + "'");
    }
    return team;
}

// ---------------------------------------------------------------------------
// Harness types

struct comms_config {
    double drop_prob = 0.0;
    double delay_min = 0.0; // seconds; a draw in [delay_min, delay_max] per delivered copy
    double delay_max = 0.0;

    void validate() const {
        if (!(drop_prob >= 0.0 && drop_prob <= 1.0)) throw config_error("drop_prob must lie in [0, 1]");
        if (delay_min < 0.0 || delay_max < delay_min) throw config_error("need 0 <= delay_min <= delay_max");
    }
};

enum class event_kind { action_complete = 0, message_delivery = 1, decide = 2 };

inline const char* to_string(event_kind k) {
    switch (k) {
    case event_kind::action_complete: return "action";
    case event_kind::message_delivery: return "delivery";
    case event_kind::decide: return "decide";
    }
    return "?";
}

struct sim_event {
    double time = 0.0;
    event_kind kind = event_kind::decide;
    int agent = 0;
    long seq = 0;
    measurement payload; // action_complete: the pending action; delivery: the message
    long measurement_id = -1;
};

struct event_order {
    bool operator()(const sim_event& a, const sim_event& b) const {
        if (a.time != b.time) return a.time > b.time;
        if (a.kind != b.kind) return a.kind > b.kind;
        if (a.agent != b.agent) return a.agent > b.agent;
        return a.seq > b.seq;
    }
};

enum class stop_rule { full_recovery, exhaustion };

struct log_record {
    double time = 0.0;
    event_kind kind = event_kind::action_complete;
    int agent = 0;
    int source = 0;
    action_id action = 0;
    double observation = 0.0;
    double cost_so_far = 0.0;
    double recovery_rate = 0.0;
    int false_positives = 0;
};

struct decision_snapshot {
    int agent = 0;
    double time = 0.0;
    std::vector<long> data_ids; // global measurement ids held at decision time
};

struct trial_log {
    std::vector<log_record> records;
    std::vector<decision_snapshot> decisions; // only with trial_setup::audit
    std::vector<double> completion_time;      // by measurement id
    bool complete = false;
    int stop_index = -1;   // record at which the stop rule fired
    double total_cost = 0.0;
    double ceiling = 0.0;
    std::vector<double> agent_cost;
    std::vector<int> agent_actions;
    std::vector<std::vector<std::size_t>> data_sizes; // per agent, at each decision
};

struct trial_setup {
    const action_space* space = nullptr;
    ground_truth truth;
    noise_model noise;
    cost_model costs;
    comms_config comms;
    position start;
    stop_rule stop = stop_rule::full_recovery;
    double budget_ceiling = INFINITY;
    long max_actions = 100000;
    double threshold = 0.5;
    double prior_var = 1.0;
    int refresh_every = 32;
    std::uint64_t seed = 0;
    bool audit = false;
};

inline double recovery_rate(const vec& team_estimate, const ground_truth& truth, double threshold = 0.5) {
    if (truth.k() == 0) return 1.0;
    int hit = 0;
    for (int i : truth.target_indices) hit += team_estimate[i] > threshold ? 1 : 0;
    return static_cast<double>(hit) / truth.k();
}

inline int false_positives(const vec& team_estimate, const ground_truth& truth, double threshold = 0.5) {
    int fp = 0;
    for (Eigen::Index i = 0; i < team_estimate.size(); ++i) fp += (team_estimate[i] > threshold && truth.beta[i] == 0.0) ? 1 : 0;
    return fp;
}

/// Team cost recorded at log index `until` (default: when the stop rule fired,
/// or the ceiling for an incomplete trial).
inline double total_team_cost(const trial_log& log, std::optional<std::size_t> until = std::nullopt) {
    if (until) return *until < log.records.size() ? log.records[*until].cost_so_far : log.total_cost;
    if (!log.complete) return log.ceiling;
    return log.total_cost;
}

// ---------------------------------------------------------------------------
// Event loop

inline trial_log run_trial(const trial_setup& setup, std::vector<std::unique_ptr<agent_planner>>& planners) {
    if (setup.space == nullptr) throw contract_violation("run_trial: no action space");
    setup.noise.validate();
    setup.costs.validate();
    setup.comms.validate();
    const auto& space = *setup.space;
    const int agents = static_cast<int>(planners.size());
    if (agents < 1) throw config_error("run_trial: need at least one agent");
    const int n = space.grid().n();

    struct agent_state {
        position pos;
        belief_tracker tracker;
        std::vector<sim_event> inbox;
        std::vector<long> data_ids;
        double incurred = 0.0;
        int actions = 0;
        int decisions = 0;
        double pending_cost = 0.0;
        rng_t plan_rng, noise_rng;
    };

    const auto prior = make_prior(n, setup.noise.sigma2, setup.prior_var);
    std::vector<agent_state> team;
    team.reserve(static_cast<std::size_t>(agents));
    for (int j = 0; j < agents; ++j) {
        const auto ju = static_cast<std::uint64_t>(j);
        team.push_back({setup.start, belief_tracker(space, prior, setup.refresh_every), {}, {}, 0.0, 0, 0, 0.0,
                        make_rng(setup.seed, {static_cast<std::uint64_t>(stream::planner), ju}),
                        make_rng(setup.seed, {static_cast<std::uint64_t>(stream::noise), ju})});
    }
    belief_tracker team_view(space, prior, setup.refresh_every);
    rng_t comms_rng = make_rng(setup.seed, {static_cast<std::uint64_t>(stream::comms)});

    trial_log log;
    log.ceiling = setup.budget_ceiling;
    log.agent_cost.assign(static_cast<std::size_t>(agents), 0.0);
    log.agent_actions.assign(static_cast<std::size_t>(agents), 0);
    log.data_sizes.resize(static_cast<std::size_t>(agents));

    std::priority_queue<sim_event, std::vector<sim_event>, event_order> queue;
    long seq = 0;
    auto schedule = [&](sim_event ev) {
        ev.seq = seq++;
        queue.push(std::move(ev));
    };
    double team_cost = 0.0;
    long total_actions = 0;

    const double initial_rate = recovery_rate(team_view.current_estimate(), setup.truth, setup.threshold);
    if (setup.stop == stop_rule::full_recovery && initial_rate >= 1.0) {
        log.complete = true;
        return log;
    }
    for (int j = 0; j < agents; ++j) schedule({0.0, event_kind::decide, j});

    while (!queue.empty()) {
        const sim_event ev = queue.top();
        queue.pop();
        auto& ag = team[static_cast<std::size_t>(ev.agent)];

        if (ev.kind == event_kind::message_delivery) {
            ag.inbox.push_back(ev);
            log.records.push_back({ev.time, ev.kind, ev.agent, ev.payload.agent, ev.payload.action, ev.payload.observation, team_cost,
                                   recovery_rate(team_view.current_estimate(), setup.truth, setup.threshold),
                                   false_positives(team_view.current_estimate(), setup.truth, setup.threshold)});
            continue;
        }

        if (ev.kind == event_kind::decide) {
            for (const auto& msg : ag.inbox) {
                ag.tracker.add(msg.payload.action, msg.payload.observation);
                ag.data_ids.push_back(msg.measurement_id);
            }
            ag.inbox.clear();
            log.data_sizes[static_cast<std::size_t>(ev.agent)].push_back(ag.tracker.data().count());
            if (setup.audit) log.decisions.push_back({ev.agent, ev.time, ag.data_ids});
            const agent_view view{ev.agent, ag.pos, ag.tracker.data(), ag.tracker.belief(), ag.tracker.current_estimate(), ag.decisions};
            const auto choice = planners[static_cast<std::size_t>(ev.agent)]->next(view, ag.plan_rng);
            ++ag.decisions;
            if (!choice) continue; // agent retires
            const double c = action_cost(ag.pos, space[*choice], setup.costs);
            ag.pending_cost = c;
            sim_event done{ev.time + c, event_kind::action_complete, ev.agent};
            done.payload = {*choice, 0.0, ev.agent, ev.time + c};
            schedule(done);
            continue;
        }

        // action complete
        const auto& act = space[ev.payload.action];
        const double y = observe(act, setup.truth, setup.noise, ag.noise_rng);
        ag.pos = act.anchor;
        ag.incurred += ag.pending_cost;
        ++ag.actions;
        // per-agent running sums added in agent order, so the figure does not
        // depend on how completions interleave
        team_cost = 0.0;
        for (const auto& other : team) team_cost += other.incurred;
        ++total_actions;
        const long id = static_cast<long>(log.completion_time.size());
        log.completion_time.push_back(ev.time);
        ag.tracker.add(act.id, y);
        ag.data_ids.push_back(id);
        team_view.add(act.id, y);

        for (int other = 0; other < agents; ++other) {
            if (other == ev.agent) continue;
            std::uniform_real_distribution<double> unit(0.0, 1.0);
            if (unit(comms_rng) < setup.comms.drop_prob) continue;
            double delay = setup.comms.delay_min;
            if (setup.comms.delay_max > setup.comms.delay_min) {
                std::uniform_real_distribution<double> d(setup.comms.delay_min, setup.comms.delay_max);
                delay = d(comms_rng);
            }
            sim_event msg{ev.time + delay, event_kind::message_delivery, other};
            msg.payload = {act.id, y, ev.agent, ev.time};
            msg.measurement_id = id;
            schedule(msg);
        }

        const double rate = recovery_rate(team_view.current_estimate(), setup.truth, setup.threshold);
        log.records.push_back({ev.time, ev.kind, ev.agent, ev.agent, act.id, y, team_cost, rate,
                               false_positives(team_view.current_estimate(), setup.truth, setup.threshold)});
        for (int j = 0; j < agents; ++j) {
            log.agent_cost[static_cast<std::size_t>(j)] = team[static_cast<std::size_t>(j)].incurred;
            log.agent_actions[static_cast<std::size_t>(j)] = team[static_cast<std::size_t>(j)].actions;
        }

        if (setup.stop == stop_rule::full_recovery && rate >= 1.0) {
            log.complete = true;
            log.stop_index = static_cast<int>(log.records.size()) - 1;
            log.total_cost = team_cost;
            return log;
        }
        if (team_cost > setup.budget_ceiling || total_actions >= setup.max_actions) {
            log.total_cost = team_cost;
            return log;
        }
        schedule({ev.time, event_kind::decide, ev.agent});
    }
    // every agent retired
    log.total_cost = team_cost;
    log.complete = setup.stop == stop_rule::exhaustion;
    if (log.complete) log.stop_index = static_cast<int>(log.records.size()) - 1;
    return log;
}

// ---------------------------------------------------------------------------
// JSON-lines

inline std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline void write_jsonl(std::ostream& os, const trial_log& log) {
    for (const auto& r : log.records) {
        os << "{\"time\":" << format_double(r.time) << ",\"kind\":\"" << to_string(r.kind) << "\",\"agent\":" << r.agent
           << ",\"source\":" << r.source << ",\"action_id\":" << r.action << ",\"observation\":" << format_double(r.observation)
           << ",\"cost_so_far\":" << format_double(r.cost_so_far) << ",\"recovery_rate\":" << format_double(r.recovery_rate)
           << ",\"false_positives\":" << r.false_positives << "}\n";
    }
}

} // namespace cast
