#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hedgelab/agent.hpp"
#include "hedgelab/baselines.hpp"
#include "hedgelab/config.hpp"
#include "hedgelab/eval.hpp"

namespace fs = std::filesystem;
using namespace hedgelab;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_set = false;
    unsigned workers = 1;
};

ExperimentConfig load(const CommonOpts& opts) {
    ExperimentConfig cfg =
        opts.config_path.empty() ? ExperimentConfig{} : load_config(opts.config_path);
    if (opts.seed_set) cfg.seed = opts.seed;
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    return cfg;
}

void write_resolved(const ExperimentConfig& cfg) {
    fs::create_directories(cfg.out_dir);
    std::ofstream os(fs::path(cfg.out_dir) / "resolved_config.json");
    os << resolve_config(cfg).dump(2) << "\n";
}

Policy checkpoint_policy(const std::string& path, const ExperimentConfig& cfg,
                         std::shared_ptr<D4pgQrAgent>& keepalive) {
    Checkpoint ck = Checkpoint::load_file(path);
    Rng rng(0);
    keepalive = std::make_shared<D4pgQrAgent>(cfg.agent, StateFeatures::count, rng);
    keepalive->from_checkpoint(ck);
    auto agent = keepalive;
    return [agent](const StateFeatures& f, const ActionInterval&) {
        return agent->act(f.as_vector());
    };
}

int cmd_simulate(const CommonOpts& opts) {
    ExperimentConfig cfg = load(opts);
    write_resolved(cfg);
    std::ostringstream os;
    os << "scenario,day,spot,vol,arrivals\n";
    os << std::setprecision(10);
    for (std::size_t s = 0; s < cfg.scenarios.count; ++s) {
        Rng rng = cfg.scenarios.stream(s);
        MarketState market{cfg.env.initial_spot, cfg.market.sigma0, 0};
        for (int day = 0; day <= cfg.env.horizon_days; ++day) {
            const int arrivals = day < cfg.env.horizon_days
                                     ? int(sample_arrivals(rng, market, cfg.env).size())
                                     : 0;
            os << s << ',' << day << ',' << market.spot << ',' << market.vol << ',' << arrivals
               << '\n';
            if (day < cfg.env.horizon_days)
                market = step_market(market, cfg.market, cfg.market.dt(), draw_normal(rng),
                                     draw_normal(rng));
        }
    }
    const std::string path = (fs::path(cfg.out_dir) / "paths.csv").string();
    write_file(path, os.str());
    std::cout << "wrote " << path << "\n";
    return 0;
}

void write_training_log(const std::string& path, const TrainResult& result) {
    std::ostringstream os;
    os << "step,critic_loss,actor_f,eval_objective,noise_scale\n" << std::setprecision(8);
    for (const auto& row : result.log)
        os << row.step << ',' << row.critic_loss << ',' << row.actor_f << ','
           << row.eval_objective << ',' << row.noise_scale << '\n';
    write_file(path, os.str());
}

std::string train_cached(const ExperimentConfig& cfg, bool allow_train) {
    const fs::path dir = fs::path(cfg.out_dir) / "checkpoints";
    fs::create_directories(dir);
    const fs::path ckpt = dir / (config_hash(cfg) + ".ckpt");
    if (fs::exists(ckpt)) return ckpt.string();
    if (!allow_train)
        throw std::runtime_error("no cached checkpoint at " + ckpt.string() +
                                 " and training not permitted");
    Rng init_rng = make_stream(cfg.seed, 0x1717);
    D4pgQrAgent agent(cfg.agent, StateFeatures::count, init_rng);
    TrainResult result = agent.train(cfg.env, cfg.market, cfg.seed);
    Checkpoint ck = agent.to_checkpoint();
    ck.meta["config_hash"] = config_hash(cfg);
    ck.meta["learner_steps"] = std::to_string(result.learner_steps);
    ck.save_file(ckpt.string());
    write_training_log((dir / (config_hash(cfg) + "_log.csv")).string(), result);
    return ckpt.string();
}

int cmd_train(const CommonOpts& opts) {
    ExperimentConfig cfg = load(opts);
    write_resolved(cfg);
    const std::string ckpt = train_cached(cfg, true);
    std::cout << "checkpoint: " << ckpt << "\n";
    return 0;
}

int cmd_evaluate(const CommonOpts& opts, const std::string& checkpoint,
                 const std::vector<std::string>& baselines) {
    ExperimentConfig cfg = load(opts);
    write_resolved(cfg);
    std::vector<EvalReport> reports;
    for (const auto& name : baselines) {
        const BaselineKind kind = baseline_from_name(name);
        if (kind == BaselineKind::delta_vega && cfg.market.constant_vol())
            throw std::runtime_error("delta-vega baseline requires stochastic volatility");
        reports.push_back(evaluate_policy(name, baseline_policy(kind), cfg.scenarios, cfg.env,
                                          cfg.market, opts.workers));
    }
    if (!checkpoint.empty()) {
        std::shared_ptr<D4pgQrAgent> keepalive;
        Policy policy = checkpoint_policy(checkpoint, cfg, keepalive);
        reports.push_back(
            evaluate_policy("rl", policy, cfg.scenarios, cfg.env, cfg.market, opts.workers));
    }
    if (reports.empty()) throw std::runtime_error("nothing to evaluate: give --checkpoint and/or --baseline");

    fs::create_directories(cfg.out_dir);
    write_file((fs::path(cfg.out_dir) / "comparison.csv").string(), comparison_table_csv(reports));
    for (const auto& r : reports) {
        std::ostringstream gains;
        gains << "gain\n" << std::setprecision(10);
        for (double g : r.gains) gains << g << '\n';
        write_file((fs::path(cfg.out_dir) / ("gains_" + r.policy_name + ".csv")).string(),
                   gains.str());
        write_file((fs::path(cfg.out_dir) / ("histogram_" + r.policy_name + ".csv")).string(),
                   histogram_csv(gain_histogram(r.gains, 50)));
    }
    std::cout << comparison_table_csv(reports);
    return 0;
}

int cmd_robustness(const CommonOpts& opts, const std::string& grid_param,
                   const std::vector<double>& grid_values, bool allow_train) {
    ExperimentConfig cfg = load(opts);
    write_resolved(cfg);
    std::ostringstream os;
    os << "train_" << grid_param
       << ",objective,value,gamma_hedge_ratio,vega_hedge_ratio,expected_transaction_cost\n";
    os << std::setprecision(6);
    for (double value : grid_values) {
        ExperimentConfig train_cfg = cfg;
        if (grid_param == "vol_of_vol") train_cfg.market.vol_of_vol = value;
        else if (grid_param == "sigma0") train_cfg.market.sigma0 = value;
        else throw std::runtime_error("robustness: --param must be vol_of_vol or sigma0");
        const std::string ckpt = train_cached(train_cfg, allow_train);
        std::shared_ptr<D4pgQrAgent> keepalive;
        Policy policy = checkpoint_policy(ckpt, cfg, keepalive);
        // evaluation always under the true (base-config) market parameters
        EvalReport r = evaluate_policy("rl", policy, cfg.scenarios, cfg.env, cfg.market,
                                       opts.workers);
        auto row = [&](const char* objective, double v) {
            os << value << ',' << objective << ',' << v << ',' << r.ratios.gamma << ','
               << r.ratios.vega << ',' << r.expected_cost << '\n';
        };
        row("mean_std", r.metrics.mean_std);
        row("var95", r.metrics.var95);
        row("cvar95", r.metrics.cvar95);
    }
    const std::string path = (fs::path(cfg.out_dir) / ("robustness_" + grid_param + ".csv")).string();
    write_file(path, os.str());
    std::cout << os.str();
    return 0;
}

std::vector<double> read_gains_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open " + path);
    std::string line;
    std::getline(is, line);  // header
    std::vector<double> gains;
    while (std::getline(is, line))
        if (!line.empty()) gains.push_back(std::stod(line));
    return gains;
}

int cmd_report(const CommonOpts& opts, const std::vector<std::string>& gains_files,
               double percentile) {
    ExperimentConfig cfg = load(opts);
    fs::create_directories(cfg.out_dir);
    std::vector<FrontierPoint> points;
    for (const auto& file : gains_files) {
        const std::string name = fs::path(file).stem().string();
        points.push_back(frontier_point(name, read_gains_csv(file), percentile));
    }
    const std::string path = (fs::path(cfg.out_dir) / "frontier.csv").string();
    write_file(path, frontier_csv(points));
    std::cout << frontier_csv(points);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hedgelab: distributional RL gamma/vega hedging laboratory"};
    app.require_subcommand(1);

    CommonOpts opts;
    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", opts.config_path, "experiment config file (JSON)");
        cmd->add_option("--out", opts.out_dir, "output directory");
        cmd->add_option("--seed", opts.seed, "override config seed")
            ->each([&](const std::string&) { opts.seed_set = true; });
        cmd->add_option("--workers", opts.workers, "evaluation worker threads");
    };

    auto* simulate = app.add_subcommand("simulate", "emit daily paths and arrival counts as CSV");
    add_common(simulate);

    auto* train = app.add_subcommand("train", "train a D4PG-QR agent, write checkpoint + log");
    add_common(train);

    std::string checkpoint;
    std::vector<std::string> baselines;
    auto* evaluate = app.add_subcommand("evaluate", "evaluate policies on a shared scenario set");
    add_common(evaluate);
    evaluate->add_option("--checkpoint", checkpoint, "trained agent checkpoint");
    evaluate->add_option("--baseline", baselines,
                         "baseline name (delta | delta-gamma | delta-vega); repeatable");

    std::string grid_param = "vol_of_vol";
    std::vector<double> grid_values;
    bool no_train = false;
    auto* robustness = app.add_subcommand(
        "robustness", "train agents across a misspecified-parameter grid, evaluate under truth");
    add_common(robustness);
    robustness->add_option("--param", grid_param, "grid parameter: vol_of_vol | sigma0");
    robustness->add_option("--values", grid_values, "grid values (space- or comma-separated)")
        ->required()
        ->delimiter(',');
    robustness->add_flag("--no-train", no_train, "require cached checkpoints");

    std::vector<std::string> gains_files;
    double percentile = 0.95;
    auto* report = app.add_subcommand("report", "frontier report from exported gains CSVs");
    add_common(report);
    report->add_option("--gains", gains_files, "gains CSV files from evaluate")->required();
    report->add_option("--percentile", percentile, "VaR percentile for the risk axis");

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) return cmd_simulate(opts);
        if (train->parsed()) return cmd_train(opts);
        if (evaluate->parsed()) return cmd_evaluate(opts, checkpoint, baselines);
        if (robustness->parsed()) return cmd_robustness(opts, grid_param, grid_values, !no_train);
        if (report->parsed()) return cmd_report(opts, gains_files, percentile);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
