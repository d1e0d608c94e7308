#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "hedgelab/agent.hpp"
#include "hedgelab/env.hpp"
#include "hedgelab/eval.hpp"
#include "hedgelab/market.hpp"
#include "hedgelab/risk.hpp"

namespace hedgelab {

using nlohmann::json;

struct ExperimentConfig {
    MarketParams market;
    EnvConfig env;
    AgentConfig agent;
    ScenarioSet scenarios;
    std::uint64_t seed = 1;
    std::string out_dir = "out";
};

namespace detail {

// Reads known keys and rejects anything unrecognized, so typos in experiment
// sweeps fail loudly.
class StrictObject {
public:
    StrictObject(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw std::invalid_argument("config: " + path_ + " must be an object");
    }

    ~StrictObject() noexcept(false) {
        if (std::uncaught_exceptions()) return;
        for (auto it = j_.begin(); it != j_.end(); ++it)
            if (!seen_.count(it.key()))
                throw std::invalid_argument("config: unknown key '" + path_ + it.key() + "'");
    }

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        if (j_.contains(key)) {
            try {
                out = j_.at(key).get<T>();
            } catch (const json::exception& e) {
                throw std::invalid_argument("config: bad value for '" + path_ + key +
                                            "': " + e.what());
            }
        }
    }

    bool descend(const char* key, const std::function<void(const json&, const std::string&)>& fn) {
        seen_.insert(key);
        if (!j_.contains(key)) return false;
        fn(j_.at(key), path_ + key + ".");
        return true;
    }

private:
    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

inline ObjectiveSpec parse_objective(const json& j, const std::string& path) {
    ObjectiveSpec spec;
    StrictObject o(j, path);
    std::string kind = "var";
    o.get("kind", kind);
    if (kind == "mean_std") spec.kind = Objective::mean_std;
    else if (kind == "var") spec.kind = Objective::var;
    else if (kind == "cvar") spec.kind = Objective::cvar;
    else throw std::invalid_argument("config: " + path + "kind must be mean_std | var | cvar");
    o.get("c", spec.c);
    o.get("p", spec.p);
    spec.validate();
    return spec;
}

}  // namespace detail

inline ExperimentConfig parse_config(const json& j) {
    ExperimentConfig cfg;
    detail::StrictObject root(j, "");
    root.get("seed", cfg.seed);
    root.get("out_dir", cfg.out_dir);

    root.descend("market", [&](const json& mj, const std::string& path) {
        detail::StrictObject m(mj, path);
        m.get("sigma0", cfg.market.sigma0);
        m.get("vol_of_vol", cfg.market.vol_of_vol);
        m.get("rho", cfg.market.rho);
        m.get("r", cfg.market.r);
        m.get("q", cfg.market.q);
        m.get("mu", cfg.market.mu);
        m.get("day_count", cfg.market.day_count);
    });
    cfg.market.validate();

    root.descend("env", [&](const json& ej, const std::string& path) {
        detail::StrictObject e(ej, path);
        e.get("arrival_intensity", cfg.env.arrival_intensity);
        e.get("client_maturity_days", cfg.env.client_maturity_days);
        e.get("hedge_maturity_days", cfg.env.hedge_maturity_days);
        e.get("kappa", cfg.env.kappa);
        e.get("horizon_days", cfg.env.horizon_days);
        e.get("units_per_contract", cfg.env.units_per_contract);
        e.get("initial_spot", cfg.env.initial_spot);
        double limit = 0.0;
        e.get("gamma_limit", limit);
        if (limit > 0.0) cfg.env.gamma_limit = limit;
    });
    cfg.env.validate();

    root.descend("agent", [&](const json& aj, const std::string& path) {
        detail::StrictObject a(aj, path);
        a.get("atom_count", cfg.agent.atom_count);
        a.get("huber_k", cfg.agent.huber_k);
        a.get("gamma_discount", cfg.agent.gamma_discount);
        a.get("batch_size", cfg.agent.batch_size);
        a.get("actor_lr", cfg.agent.actor_lr);
        a.get("critic_lr", cfg.agent.critic_lr);
        a.get("soft_update_coefficient", cfg.agent.soft_update_coefficient);
        a.get("noise_initial", cfg.agent.noise_initial);
        a.get("noise_final", cfg.agent.noise_final);
        a.get("buffer_capacity", cfg.agent.buffer_capacity);
        a.get("warmup_transitions", cfg.agent.warmup_transitions);
        a.get("total_steps", cfg.agent.total_steps);
        a.get("reward_scale", cfg.agent.reward_scale);
        a.get("hidden", cfg.agent.hidden);
        a.get("eval_every", cfg.agent.eval_every);
        a.get("eval_episodes", cfg.agent.eval_episodes);
        a.descend("objective", [&](const json& oj, const std::string& opath) {
            cfg.agent.objective = detail::parse_objective(oj, opath);
        });
    });
    cfg.agent.validate();

    root.descend("scenarios", [&](const json& sj, const std::string& path) {
        detail::StrictObject s(sj, path);
        s.get("count", cfg.scenarios.count);
        s.get("base_seed", cfg.scenarios.base_seed);
    });
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot open config file: " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw std::runtime_error("config parse error in " + path + ": " + e.what());
    }
    return parse_config(j);
}

// Fully resolved config (defaults expanded); re-running with this file
// reproduces the experiment.
inline json resolve_config(const ExperimentConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["out_dir"] = cfg.out_dir;
    j["market"] = {{"sigma0", cfg.market.sigma0},       {"vol_of_vol", cfg.market.vol_of_vol},
                   {"rho", cfg.market.rho},             {"r", cfg.market.r},
                   {"q", cfg.market.q},                 {"mu", cfg.market.mu},
                   {"day_count", cfg.market.day_count}};
    j["env"] = {{"arrival_intensity", cfg.env.arrival_intensity},
                {"client_maturity_days", cfg.env.client_maturity_days},
                {"hedge_maturity_days", cfg.env.hedge_maturity_days},
                {"kappa", cfg.env.kappa},
                {"horizon_days", cfg.env.horizon_days},
                {"units_per_contract", cfg.env.units_per_contract},
                {"gamma_limit", cfg.env.gamma_limit.value_or(0.0)},
                {"initial_spot", cfg.env.initial_spot}};
    const char* kind = cfg.agent.objective.kind == Objective::mean_std ? "mean_std"
                       : cfg.agent.objective.kind == Objective::var    ? "var"
                                                                       : "cvar";
    j["agent"] = {{"atom_count", cfg.agent.atom_count},
                  {"huber_k", cfg.agent.huber_k},
                  {"gamma_discount", cfg.agent.gamma_discount},
                  {"batch_size", cfg.agent.batch_size},
                  {"actor_lr", cfg.agent.actor_lr},
                  {"critic_lr", cfg.agent.critic_lr},
                  {"soft_update_coefficient", cfg.agent.soft_update_coefficient},
                  {"noise_initial", cfg.agent.noise_initial},
                  {"noise_final", cfg.agent.noise_final},
                  {"buffer_capacity", cfg.agent.buffer_capacity},
                  {"warmup_transitions", cfg.agent.warmup_transitions},
                  {"total_steps", cfg.agent.total_steps},
                  {"reward_scale", cfg.agent.reward_scale},
                  {"hidden", cfg.agent.hidden},
                  {"eval_every", cfg.agent.eval_every},
                  {"eval_episodes", cfg.agent.eval_episodes},
                  {"objective",
                   {{"kind", kind}, {"c", cfg.agent.objective.c}, {"p", cfg.agent.objective.p}}}};
    j["scenarios"] = {{"count", cfg.scenarios.count}, {"base_seed", cfg.scenarios.base_seed}};
    return j;
}

// Stable hash of the resolved config, used to key checkpoint caching.
inline std::string config_hash(const ExperimentConfig& cfg) {
    const std::string s = resolve_config(cfg).dump();
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    std::ostringstream os;
    os << std::hex << h;
    return os.str();
}

}  // namespace hedgelab
