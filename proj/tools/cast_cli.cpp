// cast_cli: run, sweep and replay active-search experiments.

#include "cast/experiment.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>

namespace {

using namespace cast;

/// Flags shared by `run` and `sweep`; each one overrides the preset / config file.
struct config_flags {
    std::string preset = "desk";
    std::string config_path;
    std::vector<std::function<void(experiment_config&)>> setters;

    template <class T>
    void bind(CLI::App* app, const std::string& name, const std::string& help, std::function<void(experiment_config&, const T&)> set) {
        auto value = std::make_shared<T>();
        auto* opt = app->add_option(name, *value, help);
        setters.push_back([opt, value, set](experiment_config& c) {
            if (opt->count() > 0) set(c, *value);
        });
    }

    void attach(CLI::App* app, bool sweep) {
        app->add_option("--preset", preset, "base preset")->check(CLI::IsMember(preset_names()));
        app->add_option("--config", config_path, "JSON config overlaid on the preset")->check(CLI::ExistingFile);
        bind<std::uint64_t>(app, "--seed", "base seed; trial i uses seed + i", [](auto& c, auto v) { c.base_seed = v; });
        bind<std::string>(app, "--out", "output directory", [](auto& c, auto v) { c.output_dir = v; });
        bind<int>(app, "--trials", "number of trials", [](auto& c, auto v) { c.trials = v; });
        bind<int>(app, "--parallel", "trials run concurrently", [](auto& c, auto v) { c.parallel = v; });
        bind<int>(app, "--rows", "grid rows", [](auto& c, auto v) { c.grid.rows = v; });
        bind<int>(app, "--cols", "grid columns", [](auto& c, auto v) { c.grid.cols = v; });
        bind<double>(app, "--cell-width", "cell width (m)", [](auto& c, auto v) { c.grid.cell_width = v; });
        bind<double>(app, "--speed", "agent speed (m/s)", [](auto& c, auto v) { c.grid.speed = v; });
        bind<double>(app, "--sigma2", "observation noise variance", [](auto& c, auto v) { c.sigma2 = v; });
        bind<double>(app, "--prior-var", "prior variance per cell", [](auto& c, auto v) { c.prior_var = v; });
        bind<std::string>(app, "--anchor", "region anchor: center or corner", [](auto& c, auto v) {
            if (v != "center" && v != "corner") throw CLI::ValidationError("--anchor", "expected center or corner");
            c.anchor = v == "corner" ? anchor_mode::corner : anchor_mode::center;
        });
        bind<int>(app, "--episodes", "MCTS episodes per decision (m)", [](auto& c, auto v) { c.planner_cfg.episodes = v; });
        bind<int>(app, "--max-depth", "tree depth (d_max)", [](auto& c, auto v) { c.planner_cfg.max_depth = v; });
        bind<double>(app, "--gamma", "discount", [](auto& c, auto v) { c.planner_cfg.gamma = v; });
        bind<double>(app, "--alpha-s", "widening exponent", [](auto& c, auto v) { c.planner_cfg.alpha_s = v; });
        bind<std::size_t>(app, "--pareto-cap", "max vectors per front", [](auto& c, auto v) { c.planner_cfg.pareto_cap = v; });
        bind<double>(app, "--cost-floor", "denominator floor for reward/cost", [](auto& c, auto v) { c.planner_cfg.cost_floor = v; });
        bind<std::string>(app, "--widening", "heuristic or random", [](auto& c, auto v) {
            if (v != "heuristic" && v != "random") throw CLI::ValidationError("--widening", "expected heuristic or random");
            c.planner_cfg.widening = v == "random" ? widen_order::random : widen_order::heuristic;
        });
        bind<double>(app, "--drop-prob", "message drop probability", [](auto& c, auto v) { c.comms.drop_prob = v; });
        bind<double>(app, "--delay-min", "min message delay (s)", [](auto& c, auto v) { c.comms.delay_min = v; });
        bind<double>(app, "--delay-max", "max message delay (s)", [](auto& c, auto v) { c.comms.delay_max = v; });
        bind<double>(app, "--budget-multiplier", "ceiling as a multiple of the PS sweep cost", [](auto& c, auto v) { c.budget_multiplier = v; });
        bind<long>(app, "--max-actions", "team action limit per trial (0 = auto)", [](auto& c, auto v) { c.max_actions = v; });
        if (!sweep) {
            bind<std::string>(app, "--planner", "cast, ps, ts-myopic or info-greedy", [](auto& c, auto v) { c.planner = v; });
            bind<int>(app, "--k", "number of targets", [](auto& c, auto v) { c.k = v; });
            bind<int>(app, "--agents,-J", "team size", [](auto& c, auto v) { c.agents = v; });
            bind<double>(app, "--sensing-cost", "c_s (s)", [](auto& c, auto v) { c.sensing_cost = v; });
        }
    }

    experiment_config resolve() const {
        auto c = cast::preset(preset);
        if (!config_path.empty()) {
            std::ifstream is(config_path);
            apply_json(c, nlohmann::json::parse(is));
        }
        for (const auto& s : setters) s(c);
        return c;
    }
};

void print_summary(const experiment_result& r) {
    std::cout << summary_row(r.config, r.aggregate, r.hash) << '\n';
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cost-aware asynchronous multi-agent active search experiments"};
    app.require_subcommand(1);

    config_flags run_flags;
    auto* run = app.add_subcommand("run", "run one configuration");
    run_flags.attach(run, false);

    config_flags sweep_flags;
    std::vector<int> sweep_agents, sweep_ks;
    std::vector<double> sweep_cs;
    std::vector<std::string> sweep_planners;
    auto* sweep = app.add_subcommand("sweep", "cartesian product over J, k, c_s and planner");
    sweep_flags.attach(sweep, true);
    sweep->add_option("--agents,-J", sweep_agents, "team sizes")->delimiter(',');
    sweep->add_option("--k", sweep_ks, "target counts")->delimiter(',');
    sweep->add_option("--sensing-cost", sweep_cs, "sensing costs c_s")->delimiter(',');
    sweep->add_option("--planner", sweep_planners, "planners")->delimiter(',')->check(CLI::IsMember(planner_names()));

    std::string replay_from, replay_out;
    auto* rep = app.add_subcommand("replay", "re-aggregate an output directory from its logs");
    rep->add_option("--from", replay_from, "directory written by run")->required()->check(CLI::ExistingDirectory);
    rep->add_option("--out", replay_out, "write the re-aggregated outputs here");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) {
            const auto cfg = run_flags.resolve();
            const auto res = run_experiment(cfg);
            emit_outputs(res, cfg.output_dir);
            std::cout << summary_header() << '\n';
            print_summary(res);
        } else if (*sweep) {
            sweep_spec spec;
            spec.base = sweep_flags.resolve();
            spec.agents = sweep_agents.empty() ? std::vector<int>{spec.base.agents} : sweep_agents;
            spec.ks = sweep_ks.empty() ? std::vector<int>{spec.base.k} : sweep_ks;
            spec.sensing_costs = sweep_cs.empty() ? std::vector<double>{spec.base.sensing_cost} : sweep_cs;
            spec.planners = sweep_planners.empty() ? std::vector<std::string>{spec.base.planner} : sweep_planners;
            std::cout << summary_header() << '\n';
            run_sweep(spec, spec.base.output_dir, [](const experiment_result& r) {
                print_summary(r);
                std::cout.flush();
            });
        } else if (*rep) {
            const auto res = replay(replay_from);
            if (!replay_out.empty()) emit_tables(res, replay_out);
            std::cout << summary_header() << '\n';
            print_summary(res);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
