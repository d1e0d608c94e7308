#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace hedgelab {

inline double norm_pdf(double x) {
    static const double inv_sqrt_2pi = 0.3989422804014326779;
    return inv_sqrt_2pi * std::exp(-0.5 * x * x);
}

inline double norm_cdf(double x) {
    return 0.5 * std::erfc(-x * M_SQRT1_2);
}

struct MarketParams {
    double sigma0 = 0.30;      // initial volatility, per annum
    double vol_of_vol = 0.0;   // v
    double rho = 0.0;          // correlation between asset and vol shocks
    double r = 0.0;            // risk-free rate
    double q = 0.0;            // dividend yield
    double mu = 0.0;           // real-world drift
    int day_count = 252;       // trading days per year

    void validate() const {
        if (!(sigma0 > 0.0)) throw std::invalid_argument("MarketParams: sigma0 must be > 0");
        if (!(vol_of_vol >= 0.0)) throw std::invalid_argument("MarketParams: vol_of_vol must be >= 0");
        if (!(rho >= -1.0 && rho <= 1.0)) throw std::invalid_argument("MarketParams: rho must be in [-1,1]");
        if (day_count <= 0) throw std::invalid_argument("MarketParams: day_count must be positive");
        if (!std::isfinite(r) || !std::isfinite(q) || !std::isfinite(mu))
            throw std::invalid_argument("MarketParams: non-finite rate");
    }

    bool constant_vol() const { return vol_of_vol == 0.0; }
    double dt() const { return 1.0 / day_count; }
};

struct MarketState {
    double spot = 10.0;
    double vol = 0.30;
    int day = 0;
};

struct OptionQuote {
    double price_per_unit = 0.0;
    double delta = 0.0;
    double gamma = 0.0;  // per unit, 1/currency
    double vega = 0.0;   // per unit, currency per unit vol
};

// Exact lognormal step under start-of-step volatility. z1, z2 are independent
// standard normals; the vol shock correlation is applied internally.
inline MarketState step_market(const MarketState& state, const MarketParams& params,
                               double dt, double z1, double z2) {
    if (!(dt > 0.0)) throw std::invalid_argument("step_market: dt must be > 0");
    if (!std::isfinite(z1) || !std::isfinite(z2) || !std::isfinite(state.spot) ||
        !std::isfinite(state.vol))
        throw std::invalid_argument("step_market: non-finite input");

    const double v = params.vol_of_vol;
    const double z2c = params.rho * z1 + std::sqrt(1.0 - params.rho * params.rho) * z2;
    const double sqdt = std::sqrt(dt);

    MarketState next;
    next.spot = state.spot *
                std::exp((params.mu - 0.5 * state.vol * state.vol) * dt + state.vol * sqdt * z1);
    next.vol = state.vol * std::exp(-0.5 * v * v * dt + v * sqdt * z2c);
    next.day = state.day + 1;
    return next;
}

// Hagan lognormal-SABR (beta = 1) implied volatility.
inline double implied_vol(double forward, double strike, double T, double sigma0, double v,
                          double rho) {
    if (!(forward > 0.0 && strike > 0.0 && T > 0.0 && sigma0 > 0.0))
        throw std::invalid_argument("implied_vol: forward, strike, T, sigma0 must be > 0");
    const double B =
        1.0 + (rho * v * sigma0 / 4.0 + (2.0 - 3.0 * rho * rho) * v * v / 24.0) * T;
    const double log_moneyness = std::log(forward / strike);
    if (v == 0.0 || std::abs(log_moneyness) < 1e-8) return sigma0 * B;

    const double phi = (v / sigma0) * log_moneyness;
    const double chi =
        std::log((std::sqrt(1.0 - 2.0 * rho * phi + phi * phi) + phi - rho) / (1.0 - rho));
    if (chi == 0.0) throw std::runtime_error("implied_vol: degenerate chi");
    return sigma0 * B * phi / chi;
}

// Black-Scholes-Merton price per unit; T = 0 returns intrinsic value.
inline double bsm_price(double spot, double strike, double T, double r, double q,
                        double sigma_imp, bool is_call) {
    if (!(spot > 0.0 && strike > 0.0 && sigma_imp > 0.0))
        throw std::invalid_argument("bsm_price: spot, strike, sigma must be > 0");
    if (T < 0.0) throw std::invalid_argument("bsm_price: negative maturity");
    if (T == 0.0) {
        return is_call ? std::max(spot - strike, 0.0) : std::max(strike - spot, 0.0);
    }
    const double sq = sigma_imp * std::sqrt(T);
    const double d1 = (std::log(spot / strike) + (r - q + 0.5 * sigma_imp * sigma_imp) * T) / sq;
    const double d2 = d1 - sq;
    const double call = spot * std::exp(-q * T) * norm_cdf(d1) -
                        strike * std::exp(-r * T) * norm_cdf(d2);
    if (is_call) return call;
    // put-call parity
    return call - spot * std::exp(-q * T) + strike * std::exp(-r * T);
}

// Delta/gamma for a call; vega uses the standard S e^{-qT} sqrt(T) N'(d1).
// At expiry gamma and vega are 0 and delta is a step function (1/2 ATM).
inline OptionQuote greeks(double spot, double strike, double T, double r, double q,
                          double sigma_imp, bool is_call = true) {
    if (!(spot > 0.0 && strike > 0.0 && sigma_imp > 0.0))
        throw std::invalid_argument("greeks: spot, strike, sigma must be > 0");
    OptionQuote out;
    if (T <= 0.0) {
        double call_delta;
        if (spot > strike) call_delta = 1.0;
        else if (spot < strike) call_delta = 0.0;
        else call_delta = 0.5;
        out.delta = is_call ? call_delta : call_delta - 1.0;
        return out;
    }
    const double sq = sigma_imp * std::sqrt(T);
    const double d1 = (std::log(spot / strike) + (r - q + 0.5 * sigma_imp * sigma_imp) * T) / sq;
    const double disc_q = std::exp(-q * T);
    out.delta = is_call ? norm_cdf(d1) * disc_q : (norm_cdf(d1) - 1.0) * disc_q;
    out.gamma = norm_pdf(d1) * disc_q / (spot * sq);
    out.vega = spot * disc_q * std::sqrt(T) * norm_pdf(d1);
    return out;
}

// Full per-unit quote: Hagan implied vol into BSM price and Greeks.
inline OptionQuote quote_option(const MarketState& market, const MarketParams& params,
                                double strike, int expiry_day, bool is_call) {
    if (expiry_day < market.day)
        throw std::invalid_argument("quote_option: option already expired");
    const double T = double(expiry_day - market.day) / params.day_count;
    OptionQuote out;
    if (T == 0.0) {
        out.price_per_unit = bsm_price(market.spot, strike, 0.0, params.r, params.q,
                                       market.vol, is_call);
        OptionQuote g = greeks(market.spot, strike, 0.0, params.r, params.q, market.vol, is_call);
        out.delta = g.delta;
        return out;
    }
    const double forward = market.spot * std::exp((params.r - params.q) * T);
    const double sigma_imp =
        implied_vol(forward, strike, T, market.vol, params.vol_of_vol, params.rho);
    out = greeks(market.spot, strike, T, params.r, params.q, sigma_imp, is_call);
    out.price_per_unit = bsm_price(market.spot, strike, T, params.r, params.q, sigma_imp, is_call);
    return out;
}

}  // namespace hedgelab
