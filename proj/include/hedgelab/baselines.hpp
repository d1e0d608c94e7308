#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>

#include "hedgelab/env.hpp"

namespace hedgelab {

enum class BaselineKind { delta_only, delta_gamma, delta_vega };

inline BaselineKind baseline_from_name(const std::string& name) {
    if (name == "delta") return BaselineKind::delta_only;
    if (name == "delta-gamma") return BaselineKind::delta_gamma;
    if (name == "delta-vega") return BaselineKind::delta_vega;
    throw std::invalid_argument("unknown baseline: " + name +
                                " (expected delta | delta-gamma | delta-vega)");
}

// Action that realizes the target hedge position, clipped into the feasible
// interval. A degenerate interval maps everything to 0.
inline double baseline_action(const ActionInterval& interval, BaselineKind kind) {
    double target = 0.0;
    switch (kind) {
        case BaselineKind::delta_only: target = 0.0; break;
        case BaselineKind::delta_gamma: target = interval.h_gamma; break;
        case BaselineKind::delta_vega: target = interval.h_vega; break;
    }
    const double width = interval.hi - interval.lo;
    if (width <= 0.0) return 0.0;
    const double clipped = std::clamp(target, interval.lo, interval.hi);
    return (clipped - interval.lo) / width;
}

inline Policy baseline_policy(BaselineKind kind) {
    return [kind](const StateFeatures&, const ActionInterval& interval) {
        return baseline_action(interval, kind);
    };
}

}  // namespace hedgelab
