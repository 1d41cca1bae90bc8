#pragma once

// Multi-trial orchestration: seeded truths, aggregation (mean / s.e.), recovery
// curves and the CSV / JSON / JSON-lines outputs.

#include "baselines.hpp"
#include "grid.hpp"
#include "planner.hpp"
#include "rng.hpp"
#include "sim.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace cast {

struct experiment_config {
    grid_spec grid{8, 8, 10.0, 5.0};
    int k = 2;
    int agents = 2; // J
    double sensing_cost = 0.0;
    double sigma2 = 1.0 / 16.0;
    double prior_var = 1.0;
    anchor_mode anchor = anchor_mode::center;
    double threshold = 0.5;
    std::string planner = "cast";
    planner_config planner_cfg;
    comms_config comms;
    int trials = 10;
    std::uint64_t base_seed = 1;
    double budget_multiplier = 50.0; // ceiling = multiplier * PS sweep cost
    long max_actions = 0;            // 0: 20 * n * J
    bool ps_repeat = true;
    std::string output_dir = "out";
    int parallel = 1;

    void validate() const {
        grid.validate();
        if (k < 0 || k > grid.n()) throw config_error("k must lie in [0, n]");
        if (agents < 1) throw config_error("need at least one agent");
        if (sensing_cost < 0.0) throw config_error("sensing_cost must be non-negative");
        if (!(sigma2 > 0.0)) throw config_error("sigma2 must be positive");
        if (!(prior_var > 0.0)) throw config_error("prior_var must be positive");
        if (trials < 1) throw config_error("trials must be >= 1");
        if (!(budget_multiplier > 0.0)) throw config_error("budget_multiplier must be positive");
        if (parallel < 1) throw config_error("parallel must be >= 1");
        if (std::find(planner_names().begin(), planner_names().end(), planner) == planner_names().end())
            throw config_error("unknown planner '" + planner + "'");
        planner_cfg.validate();
        comms.validate();
    }

    cost_model costs() const { return {sensing_cost, grid.speed}; }
    long action_limit() const { return max_actions > 0 ? max_actions : 20L * grid.n() * agents; }
};

// ---------------------------------------------------------------------------
// JSON

inline nlohmann::json to_json(const experiment_config& c) {
    const auto& p = c.planner_cfg;
    return {
        {"grid", {{"rows", c.grid.rows}, {"cols", c.grid.cols}, {"cell_width", c.grid.cell_width}, {"speed", c.grid.speed}}},
        {"k", c.k},
        {"agents", c.agents},
        {"sensing_cost", c.sensing_cost},
        {"sigma2", c.sigma2},
        {"prior_var", c.prior_var},
        {"anchor", c.anchor == anchor_mode::center ? "center" : "corner"},
        {"threshold", c.threshold},
        {"planner", c.planner},
        {"planner_cfg",
         {{"episodes", p.episodes},
          {"max_depth", p.max_depth},
          {"gamma", p.gamma},
          {"alpha_s", p.alpha_s},
          {"lcb_confidence", p.lcb_confidence},
          {"pareto_cap", p.pareto_cap},
          {"discretize_threshold", p.discretize_threshold},
          {"widening", p.widening == widen_order::heuristic ? "heuristic" : "random"},
          {"uct_use_variance", p.uct_use_variance},
          {"cost_floor", p.cost_floor}}},
        {"comms", {{"drop_prob", c.comms.drop_prob}, {"delay_min", c.comms.delay_min}, {"delay_max", c.comms.delay_max}}},
        {"trials", c.trials},
        {"base_seed", c.base_seed},
        {"budget_multiplier", c.budget_multiplier},
        {"max_actions", c.max_actions},
        {"ps_repeat", c.ps_repeat},
    };
}

/// Overlays the keys present in `j` onto `c`.
inline void apply_json(experiment_config& c, const nlohmann::json& j) {
    auto get = [](const nlohmann::json& src, const char* key, auto& dst) {
        if (src.contains(key)) src.at(key).get_to(dst);
    };
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        get(g, "rows", c.grid.rows);
        get(g, "cols", c.grid.cols);
        get(g, "cell_width", c.grid.cell_width);
        get(g, "speed", c.grid.speed);
    }
    get(j, "k", c.k);
    get(j, "agents", c.agents);
    get(j, "sensing_cost", c.sensing_cost);
    get(j, "sigma2", c.sigma2);
    get(j, "prior_var", c.prior_var);
    if (j.contains("anchor")) c.anchor = j.at("anchor").get<std::string>() == "corner" ? anchor_mode::corner : anchor_mode::center;
    get(j, "threshold", c.threshold);
    get(j, "planner", c.planner);
    if (j.contains("planner_cfg")) {
        const auto& p = j.at("planner_cfg");
        get(p, "episodes", c.planner_cfg.episodes);
        get(p, "max_depth", c.planner_cfg.max_depth);
        get(p, "gamma", c.planner_cfg.gamma);
        get(p, "alpha_s", c.planner_cfg.alpha_s);
        get(p, "lcb_confidence", c.planner_cfg.lcb_confidence);
        get(p, "pareto_cap", c.planner_cfg.pareto_cap);
        get(p, "discretize_threshold", c.planner_cfg.discretize_threshold);
        if (p.contains("widening"))
            c.planner_cfg.widening = p.at("widening").get<std::string>() == "random" ? widen_order::random : widen_order::heuristic;
        get(p, "uct_use_variance", c.planner_cfg.uct_use_variance);
        get(p, "cost_floor", c.planner_cfg.cost_floor);
    }
    if (j.contains("comms")) {
        const auto& m = j.at("comms");
        get(m, "drop_prob", c.comms.drop_prob);
        get(m, "delay_min", c.comms.delay_min);
        get(m, "delay_max", c.comms.delay_max);
    }
    get(j, "trials", c.trials);
    get(j, "base_seed", c.base_seed);
    get(j, "budget_multiplier", c.budget_multiplier);
    get(j, "max_actions", c.max_actions);
    get(j, "ps_repeat", c.ps_repeat);
}

inline experiment_config config_from_json(const nlohmann::json& j, experiment_config base = {}) {
    apply_json(base, j);
    return base;
}

/// FNV-1a over the canonical JSON of everything that affects results.
inline std::string config_hash(const experiment_config& c) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : to_json(c).dump()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------
// Presets

inline const std::vector<std::string>& preset_names() {
    static const std::vector<std::string> names{"paper-16x16", "paper-16x16-k", "desk", "desk-k"};
    return names;
}

inline experiment_config preset(const std::string& name) {
    experiment_config c;
    c.sigma2 = 1.0 / 16.0;
    c.planner_cfg.gamma = 0.97;
    c.planner_cfg.alpha_s = 0.5;
    c.planner_cfg.max_depth = 2;
    if (name == "paper-16x16" || name == "paper-16x16-k") {
        c.grid = {16, 16, 10.0, 5.0};
        c.k = 5;
        c.agents = name == "paper-16x16" ? 4 : 8;
        c.planner_cfg.episodes = 25000;
        c.trials = name == "paper-16x16" ? 10 : 5;
    } else if (name == "desk" || name == "desk-k") {
        c.grid = {8, 8, 10.0, 5.0};
        c.k = 2;
        c.agents = 2;
        c.planner_cfg.episodes = 2000;
        c.trials = name == "desk" ? 10 : 5;
        // an identity prior makes thresholded samples dense on a small grid
        c.prior_var = 0.1;
    } else {
        throw config_error("unknown preset '" + name + "'");
    }
    // half a one-cell hop; keeps free-sensing ratios finite without hiding travel
    c.planner_cfg.cost_floor = 0.5 * c.grid.cell_width / c.grid.speed;
    return c;
}

// ---------------------------------------------------------------------------
// Running

struct curve_point {
    double cost = 0.0;
    double rate = 0.0;
};

struct trial_result {
    int index = 0;
    std::uint64_t seed = 0;
    double total_cost = 0.0; // ceiling when incomplete
    bool complete = false;
    long actions = 0;
    std::vector<curve_point> curve; // step points: rate holds from this cost onward
    trial_log log;
};

struct curve_sample {
    double cost = 0.0;
    double mean_rate = 0.0;
    double se_rate = 0.0;
};

struct aggregate_result {
    std::vector<double> costs; // per trial, by index
    std::vector<bool> complete;
    double mean = 0.0;
    double se = 0.0;
    std::vector<curve_sample> curve;

    int incomplete() const { return static_cast<int>(std::count(complete.begin(), complete.end(), false)); }
};

struct experiment_result {
    experiment_config config;
    std::string hash;
    std::vector<trial_result> trials;
    aggregate_result aggregate;
};

inline position start_corner() { return {0.0, 0.0}; }

inline double budget_ceiling(const experiment_config& cfg, const action_space& space) {
    return cfg.budget_multiplier * ps_sweep_cost(space, make_coverage_plan(space, cfg.agents), cfg.costs(), start_corner());
}

/// Step curve of team recovery rate against team cost from a trial log.
inline std::vector<curve_point> recovery_curve(const trial_log& log, double initial_rate) {
    std::vector<curve_point> curve{{0.0, initial_rate}};
    for (const auto& r : log.records) {
        if (r.kind != event_kind::action_complete) continue;
        if (r.recovery_rate != curve.back().rate) curve.push_back({r.cost_so_far, r.recovery_rate});
    }
    return curve;
}

inline double mean_of(const std::vector<double>& xs) {
    double s = 0.0;
    for (double x : xs) s += x;
    return xs.empty() ? 0.0 : s / static_cast<double>(xs.size());
}

/// Sample standard deviation over sqrt(count); zero for a single value.
inline double standard_error(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double m = mean_of(xs);
    double ss = 0.0;
    for (double x : xs) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(xs.size() - 1)) / std::sqrt(static_cast<double>(xs.size()));
}

inline double rate_at(const std::vector<curve_point>& curve, double cost) {
    double rate = curve.front().rate;
    for (const auto& p : curve) {
        if (p.cost > cost) break;
        rate = p.rate;
    }
    return rate;
}

/// Mean / s.e. of total cost; curves are aligned on the union of every trial's
/// change-point costs, each trial's step curve holding its last value.
inline aggregate_result aggregate(const std::vector<double>& costs, const std::vector<bool>& complete,
                                  const std::vector<std::vector<curve_point>>& curves) {
    aggregate_result out;
    out.costs = costs;
    out.complete = complete;
    out.mean = mean_of(costs);
    out.se = standard_error(costs);
    std::vector<double> grid;
    for (const auto& c : curves)
        for (const auto& p : c) grid.push_back(p.cost);
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    if (grid.empty()) grid.push_back(0.0);
    for (double g : grid) {
        std::vector<double> rates;
        for (const auto& c : curves) rates.push_back(c.empty() ? 1.0 : rate_at(c, g));
        out.curve.push_back({g, rates.empty() ? 1.0 : mean_of(rates), standard_error(rates)});
    }
    return out;
}

inline trial_result run_one_trial(const experiment_config& cfg, const action_space& space, int index, double ceiling) {
    trial_result tr;
    tr.index = index;
    tr.seed = cfg.base_seed + static_cast<std::uint64_t>(index);
    rng_t truth_rng = make_rng(tr.seed, {static_cast<std::uint64_t>(stream::truth)});

    trial_setup setup;
    setup.space = &space;
    setup.truth = random_truth(cfg.grid, cfg.k, truth_rng);
    setup.noise = {cfg.sigma2};
    setup.costs = cfg.costs();
    setup.comms = cfg.comms;
    setup.start = start_corner();
    setup.budget_ceiling = ceiling;
    setup.max_actions = cfg.action_limit();
    setup.threshold = cfg.threshold;
    setup.prior_var = cfg.prior_var;
    setup.seed = tr.seed;

    auto team = make_team(cfg.planner, cfg.agents, {&space, cfg.costs()}, cfg.planner_cfg, cfg.ps_repeat);
    tr.log = run_trial(setup, team);
    tr.complete = tr.log.complete;
    tr.total_cost = total_team_cost(tr.log);
    for (int a : tr.log.agent_actions) tr.actions += a;
    tr.curve = recovery_curve(tr.log, cfg.k == 0 ? 1.0 : 0.0);
    return tr;
}

inline experiment_result run_experiment(const experiment_config& cfg) {
    cfg.validate();
    const auto space = build_action_space(cfg.grid, cfg.anchor);
    const double ceiling = budget_ceiling(cfg, space);
    experiment_result res;
    res.config = cfg;
    res.hash = config_hash(cfg);
    res.trials.resize(static_cast<std::size_t>(cfg.trials));

    std::atomic<int> next{0};
    auto worker = [&] {
        for (int i = next++; i < cfg.trials; i = next++) res.trials[static_cast<std::size_t>(i)] = run_one_trial(cfg, space, i, ceiling);
    };
    const int threads = std::min(cfg.parallel, cfg.trials);
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::vector<double> costs;
    std::vector<bool> complete;
    std::vector<std::vector<curve_point>> curves;
    for (const auto& t : res.trials) {
        costs.push_back(t.total_cost);
        complete.push_back(t.complete);
        if (cfg.k > 0) curves.push_back(t.curve);
    }
    res.aggregate = aggregate(costs, complete, curves);
    return res;
}

// ---------------------------------------------------------------------------
// Output

namespace detail {

inline std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + p.string());
    return os;
}

inline std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& p) {
    std::ifstream is(p);
    if (!is) throw std::runtime_error("cannot read " + p.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    return rows;
}

} // namespace detail

inline std::string summary_header() { return "planner,J,k,c_s,trials,mean,se,incomplete,config_hash"; }

inline std::string summary_row(const experiment_config& cfg, const aggregate_result& agg, const std::string& hash) {
    return cfg.planner + "," + std::to_string(cfg.agents) + "," + std::to_string(cfg.k) + "," + format_double(cfg.sensing_cost) + "," +
           std::to_string(cfg.trials) + "," + format_double(agg.mean) + "," + format_double(agg.se) + "," +
           std::to_string(agg.incomplete()) + "," + hash;
}

/// summary.csv, trials.csv, curve.csv and config.json.
inline void emit_tables(const experiment_result& res, const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create " + dir.string() + ": " + ec.message());
    const auto& agg = res.aggregate;
    {
        auto os = detail::open_out(dir / "summary.csv");
        os << summary_header() << '\n' << summary_row(res.config, agg, res.hash) << '\n';
    }
    {
        auto os = detail::open_out(dir / "trials.csv");
        os << "trial,seed,total_cost,complete,actions,config_hash\n";
        for (const auto& t : res.trials)
            os << t.index << ',' << t.seed << ',' << format_double(t.total_cost) << ',' << (t.complete ? 1 : 0) << ',' << t.actions << ','
               << res.hash << '\n';
    }
    {
        auto os = detail::open_out(dir / "curve.csv");
        os << "cost,mean_rate,se_rate,config_hash\n";
        for (const auto& c : agg.curve)
            os << format_double(c.cost) << ',' << format_double(c.mean_rate) << ',' << format_double(c.se_rate) << ',' << res.hash << '\n';
    }
    {
        auto os = detail::open_out(dir / "config.json");
        nlohmann::json j = to_json(res.config);
        j["config_hash"] = res.hash;
        os << j.dump(2) << '\n';
    }
}

/// emit_tables plus one logs/trial_NNN.jsonl per trial.
inline void emit_outputs(const experiment_result& res, const std::filesystem::path& dir) {
    emit_tables(res, dir);
    std::error_code ec;
    std::filesystem::create_directories(dir / "logs", ec);
    if (ec) throw std::runtime_error("cannot create " + (dir / "logs").string() + ": " + ec.message());
    for (const auto& t : res.trials) {
        char name[32];
        std::snprintf(name, sizeof name, "trial_%03d.jsonl", t.index);
        auto os = detail::open_out(dir / "logs" / name);
        os << "{\"config_hash\":\"" << res.hash << "\",\"trial\":" << t.index << ",\"seed\":" << t.seed
           << ",\"ceiling\":" << format_double(t.log.ceiling) << "}\n";
        write_jsonl(os, t.log);
    }
}

/// Reads trials.csv and curve.csv back into an aggregate.
inline aggregate_result parse_outputs(const std::filesystem::path& dir) {
    aggregate_result agg;
    const auto trials = detail::read_csv(dir / "trials.csv");
    for (std::size_t i = 1; i < trials.size(); ++i) {
        agg.costs.push_back(std::stod(trials[i].at(2)));
        agg.complete.push_back(trials[i].at(3) == "1");
    }
    agg.mean = mean_of(agg.costs);
    agg.se = standard_error(agg.costs);
    const auto curve = detail::read_csv(dir / "curve.csv");
    for (std::size_t i = 1; i < curve.size(); ++i)
        agg.curve.push_back({std::stod(curve[i].at(0)), std::stod(curve[i].at(1)), std::stod(curve[i].at(2))});
    return agg;
}

struct summary_row_data {
    std::string planner;
    int agents = 0, k = 0, trials = 0, incomplete = 0;
    double sensing_cost = 0.0, mean = 0.0, se = 0.0;
    std::string hash;
};

inline std::vector<summary_row_data> parse_summary(const std::filesystem::path& file) {
    std::vector<summary_row_data> out;
    const auto rows = detail::read_csv(file);
    for (std::size_t i = 1; i < rows.size(); ++i) {
        const auto& r = rows[i];
        out.push_back({r.at(0), std::stoi(r.at(1)), std::stoi(r.at(2)), std::stoi(r.at(4)), std::stoi(r.at(7)), std::stod(r.at(3)),
                       std::stod(r.at(5)), std::stod(r.at(6)), r.at(8)});
    }
    return out;
}

/// Re-aggregates an output directory from its config and JSON-lines logs alone.
inline experiment_result replay(const std::filesystem::path& dir) {
    std::ifstream cfg_in(dir / "config.json");
    if (!cfg_in) throw std::runtime_error("cannot read " + (dir / "config.json").string());
    const auto cfg_json = nlohmann::json::parse(cfg_in);
    experiment_result res;
    res.config = config_from_json(cfg_json);
    res.hash = config_hash(res.config);
    if (cfg_json.contains("config_hash") && cfg_json.at("config_hash").get<std::string>() != res.hash)
        throw std::runtime_error("config hash mismatch in " + dir.string());

    std::vector<double> costs;
    std::vector<bool> complete;
    std::vector<std::vector<curve_point>> curves;
    for (int i = 0; i < res.config.trials; ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "trial_%03d.jsonl", i);
        std::ifstream is(dir / "logs" / name);
        if (!is) throw std::runtime_error("missing log " + std::string(name));
        std::string line;
        std::getline(is, line);
        const auto header = nlohmann::json::parse(line);
        if (header.at("config_hash").get<std::string>() != res.hash) throw std::runtime_error("log hash mismatch in " + std::string(name));
        const double ceiling = header.at("ceiling").get<double>();
        trial_result tr;
        tr.index = i;
        tr.seed = header.at("seed").get<std::uint64_t>();
        std::vector<curve_point> curve{{0.0, res.config.k == 0 ? 1.0 : 0.0}};
        double last_cost = 0.0, last_rate = curve.front().rate;
        while (std::getline(is, line)) {
            const auto rec = nlohmann::json::parse(line);
            if (rec.at("kind").get<std::string>() != "action") continue;
            ++tr.actions;
            last_cost = rec.at("cost_so_far").get<double>();
            last_rate = rec.at("recovery_rate").get<double>();
            if (last_rate != curve.back().rate) curve.push_back({last_cost, last_rate});
        }
        tr.complete = last_rate >= 1.0;
        tr.total_cost = tr.complete ? (res.config.k == 0 ? 0.0 : last_cost) : ceiling;
        tr.curve = curve;
        costs.push_back(tr.total_cost);
        complete.push_back(tr.complete);
        if (res.config.k > 0) curves.push_back(curve);
        res.trials.push_back(std::move(tr));
    }
    res.aggregate = aggregate(costs, complete, curves);
    return res;
}

// ---------------------------------------------------------------------------
// Sweeps

struct sweep_spec {
    experiment_config base;
    std::vector<int> agents;
    std::vector<int> ks;
    std::vector<double> sensing_costs;
    std::vector<std::string> planners;

    std::vector<experiment_config> expand() const {
        std::vector<experiment_config> out;
        for (const auto& p : planners)
            for (int j : agents)
                for (int k : ks)
                    for (double cs : sensing_costs) {
                        auto c = base;
                        c.planner = p;
                        c.agents = j;
                        c.k = k;
                        c.sensing_cost = cs;
                        out.push_back(c);
                    }
        return out;
    }

    nlohmann::json to_json() const {
        return {{"base", cast::to_json(base)}, {"agents", agents}, {"ks", ks}, {"sensing_costs", sensing_costs}, {"planners", planners}};
    }
};

inline std::string sweep_hash(const sweep_spec& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : s.to_json().dump()) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string table_header() { return summary_header() + ",sweep_hash"; }

/// Appends one row to a sweep table, refusing to mix rows from different sweeps.
inline void append_table_row(const std::filesystem::path& file, const std::string& row, const std::string& sweep) {
    if (std::filesystem::exists(file)) {
        const auto rows = detail::read_csv(file);
        for (std::size_t i = 1; i < rows.size(); ++i)
            if (rows[i].empty() || rows[i].back() != sweep) throw std::runtime_error("table " + file.string() + " belongs to another sweep");
    } else {
        auto os = detail::open_out(file);
        os << table_header() << '\n';
    }
    std::ofstream os(file, std::ios::app | std::ios::binary);
    os << row << ',' << sweep << '\n';
}

/// Runs every configuration of the sweep into `dir/<index>_<planner>_J<j>_k<k>_cs<c_s>/`
/// and collects the summary rows in `dir/table.csv`.
template <class Progress>
inline std::vector<experiment_result> run_sweep(const sweep_spec& spec, const std::filesystem::path& dir, Progress&& progress) {
    const auto hash = sweep_hash(spec);
    std::filesystem::create_directories(dir);
    {
        auto os = detail::open_out(dir / "sweep.json");
        auto j = spec.to_json();
        j["sweep_hash"] = hash;
        os << j.dump(2) << '\n';
    }
    std::filesystem::remove(dir / "table.csv");
    std::vector<experiment_result> out;
    int index = 0;
    for (const auto& cfg : spec.expand()) {
        auto res = run_experiment(cfg);
        char name[96];
        std::snprintf(name, sizeof name, "%02d_%s_J%d_k%d_cs%s", index++, cfg.planner.c_str(), cfg.agents, cfg.k, format_double(cfg.sensing_cost).c_str());
        emit_outputs(res, dir / name);
        append_table_row(dir / "table.csv", summary_row(cfg, res.aggregate, res.hash), hash);
        progress(res);
        out.push_back(std::move(res));
    }
    return out;
}

} // namespace cast
