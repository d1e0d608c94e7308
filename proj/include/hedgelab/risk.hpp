#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace hedgelab {

enum class Objective { mean_std, var, cvar };

struct ObjectiveSpec {
    Objective kind = Objective::var;
    double c = 1.645;  // std multiplier for mean_std
    double p = 0.95;   // confidence level for var / cvar

    void validate() const {
        if (!(p > 0.0 && p < 1.0)) throw std::invalid_argument("ObjectiveSpec: p must be in (0,1)");
        if (!(c >= 0.0)) throw std::invalid_argument("ObjectiveSpec: c must be >= 0");
    }
};

// Quantile midpoints tau_j = (2j - 1) / (2M), j = 1..M.
inline std::vector<double> quantile_midpoints(int m) {
    if (m < 1) throw std::invalid_argument("quantile_midpoints: M must be >= 1");
    std::vector<double> tau(m);
    for (int j = 0; j < m; ++j) tau[j] = (2.0 * j + 1.0) / (2.0 * m);
    return tau;
}

namespace detail {

// Interpolated level-q quantile of sorted values placed at midpoints
// (i + 0.5) / n; clamped to the extreme order statistics outside the
// midpoint range. Optionally reports the interpolation weights.
inline double midpoint_quantile(const std::vector<double>& sorted, double q,
                                std::vector<std::pair<std::size_t, double>>* weights = nullptr) {
    const std::size_t n = sorted.size();
    if (n == 0) throw std::invalid_argument("midpoint_quantile: empty sample");
    const double pos = q * double(n) - 0.5;
    if (pos <= 0.0) {
        if (weights) weights->push_back({0, 1.0});
        return sorted.front();
    }
    if (pos >= double(n - 1)) {
        if (weights) weights->push_back({n - 1, 1.0});
        return sorted.back();
    }
    const std::size_t lo = std::size_t(pos);
    const double t = pos - double(lo);
    if (weights) {
        weights->push_back({lo, 1.0 - t});
        weights->push_back({lo + 1, t});
    }
    return (1.0 - t) * sorted[lo] + t * sorted[lo + 1];
}

// Mean of the lowest mass-q tail where each value carries mass 1/n, with
// fractional weight on the boundary value.
inline double lower_tail_mean(const std::vector<double>& sorted, double q,
                              std::vector<std::pair<std::size_t, double>>* weights = nullptr) {
    const std::size_t n = sorted.size();
    if (n == 0) throw std::invalid_argument("lower_tail_mean: empty sample");
    const double atoms = std::min(q * double(n), double(n));
    const std::size_t full = std::size_t(atoms);
    const double frac = atoms - double(full);
    double acc = 0.0;
    for (std::size_t i = 0; i < full; ++i) {
        acc += sorted[i];
        if (weights) weights->push_back({i, 1.0 / atoms});
    }
    if (frac > 0.0 && full < n) {
        acc += frac * sorted[full];
        if (weights) weights->push_back({full, frac / atoms});
    }
    return acc / atoms;
}

}  // namespace detail

// Loss-functional of a gain distribution given as atoms at quantile
// midpoints; lower is better for every objective.
inline double risk_functional(const std::vector<double>& atoms, const ObjectiveSpec& objective) {
    objective.validate();
    if (atoms.empty()) throw std::invalid_argument("risk_functional: empty distribution");
    const std::size_t m = atoms.size();
    switch (objective.kind) {
        case Objective::mean_std: {
            const double mean = std::accumulate(atoms.begin(), atoms.end(), 0.0) / double(m);
            double var = 0.0;
            for (double g : atoms) var += (g - mean) * (g - mean);
            return -mean + objective.c * std::sqrt(var / double(m));
        }
        case Objective::var: {
            std::vector<double> sorted = atoms;
            std::sort(sorted.begin(), sorted.end());
            return -detail::midpoint_quantile(sorted, 1.0 - objective.p);
        }
        case Objective::cvar: {
            std::vector<double> sorted = atoms;
            std::sort(sorted.begin(), sorted.end());
            return -detail::lower_tail_mean(sorted, 1.0 - objective.p);
        }
    }
    throw std::logic_error("risk_functional: unknown objective");
}

// Gradient of risk_functional with respect to the atoms (original order).
// VaR/CVaR are piecewise linear in the atoms; ties share the sorted order
// chosen by stable_sort (lower original index first).
inline std::vector<double> risk_functional_grad(const std::vector<double>& atoms,
                                                const ObjectiveSpec& objective) {
    objective.validate();
    const std::size_t m = atoms.size();
    if (m == 0) throw std::invalid_argument("risk_functional_grad: empty distribution");
    std::vector<double> grad(m, 0.0);
    if (objective.kind == Objective::mean_std) {
        const double mean = std::accumulate(atoms.begin(), atoms.end(), 0.0) / double(m);
        double var = 0.0;
        for (double g : atoms) var += (g - mean) * (g - mean);
        const double sd = std::sqrt(var / double(m));
        for (std::size_t j = 0; j < m; ++j) {
            grad[j] = -1.0 / double(m);
            if (sd > 0.0) grad[j] += objective.c * (atoms[j] - mean) / (double(m) * sd);
        }
        return grad;
    }
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return atoms[a] < atoms[b]; });
    std::vector<double> sorted(m);
    for (std::size_t i = 0; i < m; ++i) sorted[i] = atoms[order[i]];
    std::vector<std::pair<std::size_t, double>> weights;
    if (objective.kind == Objective::var)
        detail::midpoint_quantile(sorted, 1.0 - objective.p, &weights);
    else
        detail::lower_tail_mean(sorted, 1.0 - objective.p, &weights);
    for (const auto& [idx, w] : weights) grad[order[idx]] -= w;
    return grad;
}

struct SampleMetrics {
    double mean_std = 0.0;  // mean(loss) + c * sample std (divisor n-1)
    double var95 = 0.0;
    double cvar95 = 0.0;
    double mean_gain = 0.0;
    double std_gain = 0.0;
};

// Empirical loss metrics from a vector of gains. Percentile estimation uses
// the same midpoint interpolation as risk_functional so critic estimates and
// empirical metrics are directly comparable.
inline SampleMetrics sample_metrics(const std::vector<double>& gains, double c = 1.645,
                                    double p = 0.95, std::size_t min_samples = 100) {
    if (gains.size() < min_samples)
        throw std::invalid_argument("sample_metrics: too few samples");
    const std::size_t n = gains.size();
    SampleMetrics out;
    const double mean = std::accumulate(gains.begin(), gains.end(), 0.0) / double(n);
    double ss = 0.0;
    for (double g : gains) ss += (g - mean) * (g - mean);
    const double sd = std::sqrt(ss / double(n - 1));
    out.mean_gain = mean;
    out.std_gain = sd;
    out.mean_std = -mean + c * sd;
    std::vector<double> sorted = gains;
    std::sort(sorted.begin(), sorted.end());
    out.var95 = -detail::midpoint_quantile(sorted, 1.0 - p);
    out.cvar95 = -detail::lower_tail_mean(sorted, 1.0 - p);
    return out;
}

}  // namespace hedgelab
