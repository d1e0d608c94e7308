#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hedgelab/baselines.hpp"

using namespace hedgelab;

TEST_CASE("baseline_from_name") {
    REQUIRE(baseline_from_name("delta") == BaselineKind::delta_only);
    REQUIRE(baseline_from_name("delta-gamma") == BaselineKind::delta_gamma);
    REQUIRE(baseline_from_name("delta-vega") == BaselineKind::delta_vega);
    REQUIRE_THROWS(baseline_from_name("gamma"));
    REQUIRE_THROWS(baseline_from_name(""));
}

TEST_CASE("baseline_action realizes the neutralization targets") {
    // portfolio gamma -50, vega 20, hedge gamma 0.5, vega 2 per contract
    const ActionInterval iv = action_interval(-50.0, 20.0, 0.5, 2.0, false);
    REQUIRE(iv.lo == -10.0);
    REQUIRE(iv.hi == 100.0);

    REQUIRE(iv.map(baseline_action(iv, BaselineKind::delta_only)) == 0.0);
    REQUIRE_THAT(iv.map(baseline_action(iv, BaselineKind::delta_gamma)),
                 Catch::Matchers::WithinAbs(100.0, 1e-12));
    REQUIRE_THAT(iv.map(baseline_action(iv, BaselineKind::delta_vega)),
                 Catch::Matchers::WithinAbs(-10.0, 1e-12));
}

TEST_CASE("baseline_action clips targets outside the interval") {
    ActionInterval iv;
    iv.lo = 0.0;
    iv.hi = 4.0;
    iv.h_gamma = 7.0;   // beyond hi
    iv.h_vega = -3.0;   // below lo
    REQUIRE(baseline_action(iv, BaselineKind::delta_gamma) == 1.0);
    REQUIRE(baseline_action(iv, BaselineKind::delta_vega) == 0.0);
}

TEST_CASE("baseline_action maps a degenerate interval to zero") {
    ActionInterval iv;  // lo == hi == 0
    for (auto kind :
         {BaselineKind::delta_only, BaselineKind::delta_gamma, BaselineKind::delta_vega})
        REQUIRE(baseline_action(iv, kind) == 0.0);
}

TEST_CASE("delta-only baseline never trades hedge options") {
    MarketParams params;
    EnvConfig config;
    EpisodeResult r = episode(baseline_policy(BaselineKind::delta_only), Rng(11), config, params);
    REQUIRE(r.total_cost == 0.0);
    for (const auto& s : r.steps) {
        REQUIRE(s.hedge_contracts == 0.0);
        REQUIRE(s.cost == 0.0);
        REQUIRE_THAT(s.residual_delta, Catch::Matchers::WithinAbs(0.0, 1e-9));
    }
}

TEST_CASE("delta-gamma baseline zeroes portfolio gamma every day") {
    MarketParams params;
    params.vol_of_vol = 0.0;
    EnvConfig config;
    EpisodeResult r = episode(baseline_policy(BaselineKind::delta_gamma), Rng(5), config, params);
    bool traded = false;
    for (const auto& s : r.steps) {
        REQUIRE_THAT(s.gamma_after, Catch::Matchers::WithinAbs(0.0, 1e-9));
        REQUIRE_THAT(s.residual_delta, Catch::Matchers::WithinAbs(0.0, 1e-9));
        if (s.hedge_contracts != 0.0) traded = true;
    }
    REQUIRE(traded);
    REQUIRE(r.total_cost > 0.0);
}

TEST_CASE("delta-vega baseline zeroes portfolio vega every day") {
    MarketParams params;
    params.vol_of_vol = 0.3;
    params.rho = -0.4;
    EnvConfig config;
    EpisodeResult r = episode(baseline_policy(BaselineKind::delta_vega), Rng(6), config, params);
    for (const auto& s : r.steps) {
        // the vega target sits inside the interval by construction, so no clipping
        REQUIRE_THAT(s.vega_after, Catch::Matchers::WithinAbs(0.0, 1e-9));
        REQUIRE_THAT(s.residual_delta, Catch::Matchers::WithinAbs(0.0, 1e-9));
    }
}

TEST_CASE("baseline costs scale with kappa, gamma-neutral path unchanged") {
    MarketParams params;
    params.vol_of_vol = 0.0;
    EnvConfig cheap;
    cheap.kappa = 0.005;
    EnvConfig dear;
    dear.kappa = 0.02;
    EpisodeResult a = episode(baseline_policy(BaselineKind::delta_gamma), Rng(21), cheap, params);
    EpisodeResult b = episode(baseline_policy(BaselineKind::delta_gamma), Rng(21), dear, params);
    REQUIRE(a.total_cost > 0.0);
    REQUIRE_THAT(b.total_cost, Catch::Matchers::WithinRel(4.0 * a.total_cost, 1e-9));
    // identical trades, only the cost differs
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i)
        REQUIRE(a.steps[i].hedge_contracts == b.steps[i].hedge_contracts);
}

TEST_CASE("risk-limit gate forces all baselines flat when closed") {
    MarketParams params;
    params.vol_of_vol = 0.0;
    EnvConfig config;
    config.gamma_limit = 1e9;  // never exceeded
    for (auto kind : {BaselineKind::delta_gamma, BaselineKind::delta_only}) {
        EpisodeResult r = episode(baseline_policy(kind), Rng(3), config, params);
        for (const auto& s : r.steps) REQUIRE(s.hedge_contracts == 0.0);
        REQUIRE(r.total_cost == 0.0);
    }
}
