#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hedgelab/market.hpp"
#include "hedgelab/rng.hpp"

namespace hedgelab {

struct EnvConfig {
    double arrival_intensity = 1.0;   // client options per day
    int client_maturity_days = 60;
    int hedge_maturity_days = 30;
    double kappa = 0.01;              // proportional cost on hedge option value
    int horizon_days = 30;
    int units_per_contract = 100;
    std::optional<double> gamma_limit;  // dollar-gamma risk limit, if set
    double initial_spot = 10.0;

    void validate() const {
        if (!(arrival_intensity >= 0.0)) throw std::invalid_argument("EnvConfig: arrival_intensity < 0");
        if (!(kappa >= 0.0)) throw std::invalid_argument("EnvConfig: kappa < 0");
        if (horizon_days < 1) throw std::invalid_argument("EnvConfig: horizon_days < 1");
        if (units_per_contract < 1) throw std::invalid_argument("EnvConfig: units_per_contract < 1");
        if (gamma_limit && !(*gamma_limit > 0.0)) throw std::invalid_argument("EnvConfig: gamma_limit <= 0");
    }
};

enum class PositionOrigin { client, hedge };

struct OptionPosition {
    double strike = 0.0;
    int expiry_day = 0;
    bool is_call = true;
    double contracts = 0.0;  // signed; 1 contract = units_per_contract units
    PositionOrigin origin = PositionOrigin::client;
};

struct PortfolioAggregates {
    double value = 0.0;  // P, currency
    double delta = 0.0;  // in units of underlying
    double gamma = 0.0;
    double vega = 0.0;
};

struct PortfolioState {
    std::vector<OptionPosition> positions;
    double underlying_units = 0.0;
    double cash = 0.0;  // mid-market trade ledger; transaction costs tracked separately
    MarketState market;
};

struct StateFeatures {
    double spot = 0.0;         // divided by initial spot
    double portfolio_gamma = 0.0;  // dollar-gamma scale, x spot^2 / 1e4
    double portfolio_vega = 0.0;   // divided by 1e2
    double hedge_gamma = 0.0;      // per hedge contract, same scales
    double hedge_vega = 0.0;

    std::vector<double> as_vector() const {
        return {spot, portfolio_gamma, portfolio_vega, hedge_gamma, hedge_vega};
    }
    static constexpr int count = 5;
};

struct StepDiagnostics {
    int day = 0;
    double spot = 0.0;
    double vol = 0.0;
    double portfolio_value = 0.0;
    double delta_before = 0.0;
    double gamma_before = 0.0;
    double gamma_after = 0.0;
    double vega_before = 0.0;
    double vega_after = 0.0;
    double hedge_contracts = 0.0;
    double cost = 0.0;
    double reward = 0.0;
    double residual_delta = 0.0;  // option delta + underlying after the rebalance
};

struct StepOutcome {
    StateFeatures next_features;
    double reward = 0.0;
    bool done = false;
    StepDiagnostics diagnostics;
};

// Feasible hedge interval plus the two full-neutralization targets.
struct ActionInterval {
    double lo = 0.0;
    double hi = 0.0;
    double h_gamma = 0.0;  // contracts that zero portfolio gamma
    double h_vega = 0.0;   // contracts that zero portfolio vega

    double map(double a) const { return lo + a * (hi - lo); }
};

inline std::vector<OptionPosition> sample_arrivals(Rng& rng, const MarketState& market,
                                                   const EnvConfig& config) {
    std::vector<OptionPosition> arrivals;
    const int n = draw_poisson(rng, config.arrival_intensity);
    arrivals.reserve(n);
    for (int i = 0; i < n; ++i) {
        OptionPosition pos;
        pos.strike = market.spot;  // struck ATM at arrival
        pos.expiry_day = market.day + config.client_maturity_days;
        pos.is_call = true;
        pos.contracts = draw_uniform(rng) < 0.5 ? 1.0 : -1.0;
        pos.origin = PositionOrigin::client;
        arrivals.push_back(pos);
    }
    return arrivals;
}

inline PortfolioAggregates aggregate_portfolio(const PortfolioState& portfolio,
                                               const MarketParams& params,
                                               int units_per_contract) {
    PortfolioAggregates agg;
    for (const auto& pos : portfolio.positions) {
        const OptionQuote quote =
            quote_option(portfolio.market, params, pos.strike, pos.expiry_day, pos.is_call);
        const double scale = pos.contracts * units_per_contract;
        agg.value += scale * quote.price_per_unit;
        agg.delta += scale * quote.delta;
        agg.gamma += scale * quote.gamma;
        agg.vega += scale * quote.vega;
    }
    return agg;
}

// The feasible interval keeps at least one of the gamma/vega post-to-pre
// ratios in [0,1]. Constant-vol mode ignores the vega target.
inline ActionInterval action_interval(double gamma_p, double vega_p, double gamma_h,
                                      double vega_h, bool constant_vol) {
    if (!(gamma_h > 0.0)) throw std::invalid_argument("action_interval: hedge gamma must be > 0");
    if (!constant_vol && !(vega_h > 0.0))
        throw std::invalid_argument("action_interval: hedge vega must be > 0");
    ActionInterval iv;
    iv.h_gamma = -gamma_p / gamma_h;
    iv.h_vega = constant_vol ? 0.0 : -vega_p / vega_h;
    if (constant_vol) {
        iv.lo = std::min(0.0, iv.h_gamma);
        iv.hi = std::max(0.0, iv.h_gamma);
    } else {
        iv.lo = std::min({0.0, iv.h_gamma, iv.h_vega});
        iv.hi = std::max({0.0, iv.h_gamma, iv.h_vega});
    }
    return iv;
}

inline double dollar_gamma(double gamma_agg, double spot) {
    return gamma_agg * spot * spot / 100.0;
}

// Risk-limit gate: trading permitted only when |dollar gamma| exceeds the
// limit (strict inequality).
inline bool risk_limit_gate(double portfolio_dollar_gamma, double gamma_limit) {
    if (!(gamma_limit > 0.0)) throw std::invalid_argument("risk_limit_gate: limit must be > 0");
    return std::abs(portfolio_dollar_gamma) > gamma_limit;
}

struct EpisodeResult {
    double total_gain = 0.0;
    double total_cost = 0.0;
    double initial_wealth = 0.0;
    double terminal_wealth = 0.0;
    std::vector<StepDiagnostics> steps;
};

// Policy: maps the observed features (and the feasible interval, which the
// rule-based baselines need) to an action in [0,1].
using Policy = std::function<double(const StateFeatures&, const ActionInterval&)>;

class HedgingEnv {
public:
    HedgingEnv(EnvConfig config, MarketParams params, Rng rng)
        : config_(std::move(config)), params_(std::move(params)), rng_(std::move(rng)) {
        config_.validate();
        params_.validate();
        reset();
    }

    void reset() {
        portfolio_ = PortfolioState{};
        portfolio_.market = MarketState{config_.initial_spot, params_.sigma0, 0};
        done_ = false;
        total_cost_ = 0.0;
        arrive(portfolio_.market.day);  // arrivals begin on day 0, before the first decision
        initial_wealth_ = wealth();
        refresh_view();
    }

    bool done() const { return done_; }
    const PortfolioState& portfolio() const { return portfolio_; }
    const StateFeatures& features() const { return features_; }
    const ActionInterval& interval() const { return interval_; }
    double total_cost() const { return total_cost_; }
    double initial_wealth() const { return initial_wealth_; }
    double wealth() const {
        const PortfolioAggregates agg =
            aggregate_portfolio(portfolio_, params_, config_.units_per_contract);
        return portfolio_.cash + portfolio_.underlying_units * portfolio_.market.spot + agg.value;
    }

    StepOutcome step(double action) {
        if (done_) throw std::logic_error("HedgingEnv::step: episode is done");
        if (!std::isfinite(action)) throw std::invalid_argument("HedgingEnv::step: non-finite action");
        action = std::clamp(action, 0.0, 1.0);

        const double units = config_.units_per_contract;
        const MarketState before = portfolio_.market;
        const double w0 =
            portfolio_.cash + portfolio_.underlying_units * before.spot + agg_.value;

        StepDiagnostics diag;
        diag.day = before.day;
        diag.spot = before.spot;
        diag.vol = before.vol;
        diag.portfolio_value = agg_.value;
        diag.delta_before = agg_.delta;
        diag.gamma_before = agg_.gamma;
        diag.vega_before = agg_.vega;

        // (1)-(2) trade the ATM hedge call
        const double hedge_contracts = gate_open_ ? interval_.map(action) : 0.0;
        double cost = 0.0;
        if (hedge_contracts != 0.0) {
            OptionPosition hedge;
            hedge.strike = before.spot;
            hedge.expiry_day = before.day + config_.hedge_maturity_days;
            hedge.is_call = true;
            hedge.contracts = hedge_contracts;
            hedge.origin = PositionOrigin::hedge;
            portfolio_.positions.push_back(hedge);
            portfolio_.cash -= hedge_contracts * units * hedge_quote_.price_per_unit;
            cost = config_.kappa * std::abs(hedge_quote_.price_per_unit * hedge_contracts * units);
        }
        diag.hedge_contracts = hedge_contracts;
        diag.cost = cost;
        total_cost_ += cost;
        diag.gamma_after = agg_.gamma + hedge_contracts * units * hedge_quote_.gamma;
        diag.vega_after = agg_.vega + hedge_contracts * units * hedge_quote_.vega;

        // (3) delta-neutralize with the underlying (costless)
        const double option_delta = agg_.delta + hedge_contracts * units * hedge_quote_.delta;
        const double target_units = -option_delta;
        portfolio_.cash += (portfolio_.underlying_units - target_units) * before.spot;
        portfolio_.underlying_units = target_units;
        diag.residual_delta =
            aggregate_portfolio(portfolio_, params_, config_.units_per_contract).delta +
            portfolio_.underlying_units;

        // (4) advance the market one day under the real-world drift
        const double z1 = draw_normal(rng_);
        const double z2 = draw_normal(rng_);
        portfolio_.market = step_market(before, params_, params_.dt(), z1, z2);

        done_ = portfolio_.market.day >= config_.horizon_days;

        // (5) new-day arrivals (none on the terminal valuation day)
        if (!done_) arrive(portfolio_.market.day);

        // (6) reward: mark-to-market wealth change net of transaction cost.
        // Expiry settlement trades intrinsic value for cash, so aggregating
        // after it still values expired-today options correctly.
        settle_expired();
        refresh_view();
        const double w1 =
            portfolio_.cash + portfolio_.underlying_units * portfolio_.market.spot + agg_.value;
        const double reward = (w1 - w0) - cost;
        diag.reward = reward;

        StepOutcome out;
        out.next_features = features_;
        out.reward = reward;
        out.done = done_;
        out.diagnostics = diag;
        return out;
    }

private:
    void arrive(int day) {
        (void)day;
        auto arrivals = sample_arrivals(rng_, portfolio_.market, config_);
        const double units = config_.units_per_contract;
        for (const auto& pos : arrivals) {
            const OptionQuote quote =
                quote_option(portfolio_.market, params_, pos.strike, pos.expiry_day, pos.is_call);
            portfolio_.cash -= pos.contracts * units * quote.price_per_unit;
            portfolio_.positions.push_back(pos);
        }
    }

    // Options at expiry settle to cash at intrinsic value (wealth-neutral).
    void settle_expired() {
        const double units = config_.units_per_contract;
        auto& ps = portfolio_.positions;
        for (auto it = ps.begin(); it != ps.end();) {
            if (it->expiry_day <= portfolio_.market.day) {
                const double intrinsic =
                    it->is_call ? std::max(portfolio_.market.spot - it->strike, 0.0)
                                : std::max(it->strike - portfolio_.market.spot, 0.0);
                portfolio_.cash += it->contracts * units * intrinsic;
                it = ps.erase(it);
            } else {
                ++it;
            }
        }
    }

    // Recompute aggregates, today's hedge quote, features, and the feasible
    // interval for the current day.
    void refresh_view() {
        agg_ = aggregate_portfolio(portfolio_, params_, config_.units_per_contract);
        if (done_) return;
        const MarketState& m = portfolio_.market;
        hedge_quote_ = quote_option(m, params_, m.spot, m.day + config_.hedge_maturity_days, true);
        const double units = config_.units_per_contract;
        interval_ = action_interval(agg_.gamma, agg_.vega, units * hedge_quote_.gamma,
                                    units * hedge_quote_.vega, params_.constant_vol());
        gate_open_ = true;
        if (config_.gamma_limit) {
            gate_open_ = risk_limit_gate(dollar_gamma(agg_.gamma, m.spot), *config_.gamma_limit);
            if (!gate_open_) interval_ = ActionInterval{};  // collapses to [0,0]
        }
        const double dollar_scale = m.spot * m.spot / 1e4;
        features_.spot = m.spot / config_.initial_spot;
        features_.portfolio_gamma = agg_.gamma * dollar_scale;
        features_.portfolio_vega = agg_.vega / 1e2;
        features_.hedge_gamma = units * hedge_quote_.gamma * dollar_scale;
        features_.hedge_vega = units * hedge_quote_.vega / 1e2;
    }

    EnvConfig config_;
    MarketParams params_;
    Rng rng_;
    PortfolioState portfolio_;
    PortfolioAggregates agg_;
    OptionQuote hedge_quote_;
    StateFeatures features_;
    ActionInterval interval_;
    bool gate_open_ = true;
    bool done_ = false;
    double total_cost_ = 0.0;
    double initial_wealth_ = 0.0;
};

inline EpisodeResult episode(const Policy& policy, Rng rng, const EnvConfig& config,
                             const MarketParams& params) {
    HedgingEnv env(config, params, std::move(rng));
    EpisodeResult result;
    result.initial_wealth = env.initial_wealth();
    while (!env.done()) {
        const double a = policy(env.features(), env.interval());
        StepOutcome out = env.step(a);
        result.total_gain += out.reward;
        result.steps.push_back(out.diagnostics);
    }
    result.total_cost = env.total_cost();
    result.terminal_wealth = env.wealth();
    return result;
}

}  // namespace hedgelab
