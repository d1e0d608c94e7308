#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "hedgelab/env.hpp"
#include "hedgelab/risk.hpp"
#include "hedgelab/rng.hpp"

namespace hedgelab {

struct ScenarioSet {
    std::size_t count = 5000;
    std::uint64_t base_seed = 0;

    Rng stream(std::size_t scenario_index) const { return make_stream(base_seed, scenario_index); }
};

struct ScenarioRun {
    std::vector<double> gains;           // one per scenario
    std::vector<double> costs;           // total transaction cost per scenario
    std::vector<EpisodeResult> episodes; // full diagnostics
};

// One episode per scenario with scenario-indexed RNG streams, so every
// policy evaluated on the same set observes identical paths and arrivals.
// Scenarios are independent; results are written by index, so the output is
// identical for any worker count.
inline ScenarioRun run_scenarios(const Policy& policy, const ScenarioSet& set,
                                 const EnvConfig& config, const MarketParams& params,
                                 bool keep_episodes = true, unsigned workers = 1) {
    ScenarioRun run;
    run.gains.resize(set.count);
    run.costs.resize(set.count);
    if (keep_episodes) run.episodes.resize(set.count);
    auto work = [&](std::size_t begin, std::size_t stride) {
        for (std::size_t i = begin; i < set.count; i += stride) {
            EpisodeResult ep = episode(policy, set.stream(i), config, params);
            run.gains[i] = ep.total_gain;
            run.costs[i] = ep.total_cost;
            if (keep_episodes) run.episodes[i] = std::move(ep);
        }
    };
    if (workers <= 1) {
        work(0, 1);
    } else {
        std::vector<std::thread> threads;
        for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work, w, workers);
        for (auto& t : threads) t.join();
    }
    return run;
}

struct HedgeRatios {
    double gamma = 0.0;
    double vega = 0.0;
};

// Mean of the per-action ratios 1 - X_post / X_pre over all hedging actions
// in all scenarios; steps with |X_pre| ~ 0 are excluded (ratio undefined).
inline HedgeRatios hedge_ratio_stats(const std::vector<EpisodeResult>& episodes,
                                     double degenerate_eps = 1e-12) {
    double gamma_sum = 0.0, vega_sum = 0.0;
    std::size_t gamma_n = 0, vega_n = 0;
    for (const auto& ep : episodes) {
        for (const auto& step : ep.steps) {
            if (std::abs(step.gamma_before) > degenerate_eps) {
                gamma_sum += 1.0 - step.gamma_after / step.gamma_before;
                ++gamma_n;
            }
            if (std::abs(step.vega_before) > degenerate_eps) {
                vega_sum += 1.0 - step.vega_after / step.vega_before;
                ++vega_n;
            }
        }
    }
    HedgeRatios out;
    if (gamma_n) out.gamma = gamma_sum / double(gamma_n);
    if (vega_n) out.vega = vega_sum / double(vega_n);
    return out;
}

struct EvalReport {
    std::string policy_name;
    SampleMetrics metrics;
    HedgeRatios ratios;
    double expected_cost = 0.0;
    std::vector<double> gains;
};

inline EvalReport evaluate_policy(const std::string& name, const Policy& policy,
                                  const ScenarioSet& set, const EnvConfig& config,
                                  const MarketParams& params, unsigned workers = 1) {
    ScenarioRun run = run_scenarios(policy, set, config, params, true, workers);
    EvalReport report;
    report.policy_name = name;
    report.metrics = sample_metrics(run.gains);
    report.ratios = hedge_ratio_stats(run.episodes);
    double cost = 0.0;
    for (double c : run.costs) cost += c;
    report.expected_cost = cost / double(run.costs.size());
    report.gains = std::move(run.gains);
    return report;
}

// Policy comparison table: one row per
// (policy, objective) with hedge ratios and expected cost.
inline std::string comparison_table_csv(const std::vector<EvalReport>& reports) {
    std::ostringstream os;
    os << "policy,objective,value,gamma_hedge_ratio,vega_hedge_ratio,expected_transaction_cost\n";
    os << std::setprecision(6);
    for (const auto& r : reports) {
        auto row = [&](const char* objective, double value) {
            os << r.policy_name << ',' << objective << ',' << value << ',' << r.ratios.gamma << ','
               << r.ratios.vega << ',' << r.expected_cost << '\n';
        };
        row("mean_std", r.metrics.mean_std);
        row("var95", r.metrics.var95);
        row("cvar95", r.metrics.cvar95);
    }
    return os.str();
}

struct Histogram {
    double lo = 0.0;
    double hi = 0.0;
    std::vector<std::size_t> counts;
    std::vector<double> tail_rug;  // lowest-5% sample values
};

inline Histogram gain_histogram(const std::vector<double>& gains, std::size_t bins) {
    if (gains.empty()) throw std::invalid_argument("gain_histogram: empty gains");
    if (bins == 0) throw std::invalid_argument("gain_histogram: zero bins");
    Histogram h;
    h.lo = *std::min_element(gains.begin(), gains.end());
    h.hi = *std::max_element(gains.begin(), gains.end());
    h.counts.assign(bins, 0);
    const double width = h.hi > h.lo ? (h.hi - h.lo) / double(bins) : 1.0;
    for (double g : gains) {
        auto bin = std::size_t((g - h.lo) / width);
        if (bin >= bins) bin = bins - 1;
        h.counts[bin]++;
    }
    std::vector<double> sorted = gains;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t tail = std::max<std::size_t>(1, std::size_t(0.05 * double(sorted.size())));
    h.tail_rug.assign(sorted.begin(), sorted.begin() + tail);
    return h;
}

inline std::string histogram_csv(const Histogram& h) {
    std::ostringstream os;
    os << std::setprecision(10);
    os << "bin_lo,bin_hi,count\n";
    const double width = h.counts.empty() ? 0.0
                         : (h.hi > h.lo ? (h.hi - h.lo) / double(h.counts.size()) : 1.0);
    for (std::size_t i = 0; i < h.counts.size(); ++i)
        os << h.lo + width * double(i) << ',' << h.lo + width * double(i + 1) << ','
           << h.counts[i] << '\n';
    os << "rug\n";
    for (double v : h.tail_rug) os << v << '\n';
    return os.str();
}

struct FrontierPoint {
    std::string name;
    double risk = 0.0;       // VaR of loss at the point's percentile
    double mean_gain = 0.0;
};

inline FrontierPoint frontier_point(const std::string& name, const std::vector<double>& gains,
                                    double percentile) {
    std::vector<double> sorted = gains;
    std::sort(sorted.begin(), sorted.end());
    FrontierPoint pt;
    pt.name = name;
    pt.risk = -detail::midpoint_quantile(sorted, 1.0 - percentile);
    double mean = 0.0;
    for (double g : gains) mean += g;
    pt.mean_gain = mean / double(gains.size());
    return pt;
}

inline std::string frontier_csv(const std::vector<FrontierPoint>& points) {
    std::ostringstream os;
    os << "name,risk,mean_gain\n" << std::setprecision(8);
    for (const auto& p : points) os << p.name << ',' << p.risk << ',' << p.mean_gain << '\n';
    return os.str();
}

inline std::string diagnostics_csv(const EpisodeResult& ep) {
    std::ostringstream os;
    os << "day,spot,vol,portfolio_value,delta,gamma_pre,gamma_post,vega_pre,vega_post,"
          "hedge_contracts,cost,reward\n";
    os << std::setprecision(10);
    for (const auto& s : ep.steps)
        os << s.day << ',' << s.spot << ',' << s.vol << ',' << s.portfolio_value << ','
           << s.delta_before << ',' << s.gamma_before << ',' << s.gamma_after << ','
           << s.vega_before << ',' << s.vega_after << ',' << s.hedge_contracts << ','
           << s.cost << ',' << s.reward << '\n';
    return os.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << content;
}

}  // namespace hedgelab
