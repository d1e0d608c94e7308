#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hedgelab/checkpoint.hpp"
#include "hedgelab/env.hpp"
#include "hedgelab/net.hpp"
#include "hedgelab/risk.hpp"
#include "hedgelab/rng.hpp"

namespace hedgelab {

inline double huber(double u, double k) {
    const double au = std::abs(u);
    return au <= k ? 0.5 * u * u : k * (au - 0.5 * k);
}

inline double huber_grad(double u, double k) {
    if (std::abs(u) <= k) return u;
    return u < 0.0 ? -k : k;
}

// Asymmetric quantile Huber loss h_tau^k(u).
inline double quantile_huber(double u, double tau, double k) {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("quantile_huber: tau must be in (0,1)");
    if (!(k > 0.0)) throw std::invalid_argument("quantile_huber: k must be > 0");
    const double weight = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
    return weight * huber(u, k);
}

inline double quantile_huber_grad(double u, double tau, double k) {
    const double weight = std::abs(tau - (u < 0.0 ? 1.0 : 0.0));
    return weight * huber_grad(u, k);
}

struct Transition {
    std::vector<double> state;
    double action = 0.0;
    double reward = 0.0;
    std::vector<double> next_state;
    bool done = false;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
        if (capacity_ == 0) throw std::invalid_argument("ReplayBuffer: zero capacity");
    }

    void add(Transition t) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[insertions_ % capacity_] = std::move(t);
        }
        ++insertions_;
    }

    std::size_t size() const { return data_.size(); }
    std::size_t insertions() const { return insertions_; }
    const Transition& at(std::size_t i) const { return data_[i]; }

    std::size_t sample_index(Rng& rng) const {
        if (data_.empty()) throw std::logic_error("ReplayBuffer: sampling from empty buffer");
        std::uniform_int_distribution<std::size_t> dist(0, data_.size() - 1);
        return dist(rng);
    }

private:
    std::size_t capacity_;
    std::size_t insertions_ = 0;
    std::vector<Transition> data_;
};

struct AgentConfig {
    int atom_count = 51;                 // M
    double huber_k = 1.0;
    double gamma_discount = 1.0;
    int batch_size = 64;
    double actor_lr = 1e-4;
    double critic_lr = 1e-3;
    double soft_update_coefficient = 0.005;
    double noise_initial = 0.2;
    double noise_final = 0.02;
    std::size_t buffer_capacity = 1'000'000;
    std::size_t warmup_transitions = 1'000;
    std::size_t total_steps = 50'000;
    double reward_scale = 10.0;          // rewards divided by this inside the critic
    std::vector<int> hidden = {64, 64};
    ObjectiveSpec objective;
    std::size_t eval_every = 5'000;      // periodic evaluation snapshots; 0 disables
    std::size_t eval_episodes = 100;

    void validate() const {
        if (atom_count < 2) throw std::invalid_argument("AgentConfig: atom_count must be >= 2");
        if (!(huber_k > 0.0)) throw std::invalid_argument("AgentConfig: huber_k must be > 0");
        if (!(actor_lr > 0.0 && critic_lr > 0.0)) throw std::invalid_argument("AgentConfig: rates must be > 0");
        if (!(soft_update_coefficient > 0.0 && soft_update_coefficient <= 1.0))
            throw std::invalid_argument("AgentConfig: soft_update_coefficient must be in (0,1]");
        if (batch_size < 1) throw std::invalid_argument("AgentConfig: batch_size must be >= 1");
        if (!(reward_scale > 0.0)) throw std::invalid_argument("AgentConfig: reward_scale must be > 0");
        objective.validate();
    }
};

// Per-sample quantile Huber critic loss and its gradient with respect to the
// predicted atoms; the expectation is the mean over target atoms.
inline double critic_loss(const std::vector<double>& predicted, const std::vector<double>& target,
                          double huber_k, const std::vector<double>& tau,
                          std::vector<double>* grad_out = nullptr) {
    const std::size_t m = predicted.size();
    if (target.size() != m || tau.size() != m)
        throw std::invalid_argument("critic_loss: atom count mismatch");
    double loss = 0.0;
    if (grad_out) grad_out->assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double acc = 0.0, gacc = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double u = target[i] - predicted[j];
            acc += quantile_huber(u, tau[j], huber_k);
            gacc -= quantile_huber_grad(u, tau[j], huber_k);
        }
        loss += acc / double(m);
        if (grad_out) (*grad_out)[j] = gacc / double(m);
    }
    return loss;
}

struct TrainLogRow {
    std::size_t step = 0;
    double critic_loss = 0.0;
    double actor_f = 0.0;
    double eval_objective = std::numeric_limits<double>::quiet_NaN();
    double noise_scale = 0.0;
};

struct TrainResult {
    std::vector<TrainLogRow> log;
    std::size_t learner_steps = 0;
};

class D4pgQrAgent {
public:
    D4pgQrAgent(AgentConfig config, int feature_count, Rng& rng)
        : config_(std::move(config)),
          feature_count_(feature_count),
          tau_(quantile_midpoints(config_.atom_count)),
          buffer_(config_.buffer_capacity) {
        config_.validate();
        NetworkSpec actor_spec;
        actor_spec.widths.push_back(feature_count_);
        for (int h : config_.hidden) actor_spec.widths.push_back(h);
        actor_spec.widths.push_back(1);
        actor_spec.output = OutputActivation::bounded;
        NetworkSpec critic_spec;
        critic_spec.widths.push_back(feature_count_ + 1);
        for (int h : config_.hidden) critic_spec.widths.push_back(h);
        critic_spec.widths.push_back(config_.atom_count);
        critic_spec.output = OutputActivation::identity;
        actor_ = Network(actor_spec, rng);
        critic_ = Network(critic_spec, rng);
        target_actor_ = actor_;
        target_critic_ = critic_;
    }

    const AgentConfig& config() const { return config_; }
    Network& actor() { return actor_; }
    Network& critic() { return critic_; }
    Network& target_actor() { return target_actor_; }
    Network& target_critic() { return target_critic_; }
    ReplayBuffer& buffer() { return buffer_; }
    const std::vector<double>& tau() const { return tau_; }

    double act(const std::vector<double>& features) const {
        return actor_.forward(features)[0];
    }

    // Exploration: Gaussian noise on the deterministic action, clipped.
    static double explore(double action, double noise_scale, Rng& rng) {
        if (noise_scale <= 0.0) return action;
        return std::clamp(action + noise_scale * draw_normal(rng), 0.0, 1.0);
    }

    std::vector<double> critic_atoms(const Network& critic, const std::vector<double>& state,
                                     double action, ForwardCache* cache = nullptr) const {
        std::vector<double> input = state;
        input.push_back(action);
        return critic.forward(input, cache);
    }

    // Y_i = R_i + gamma * Z_target(S', pi_target(S')); done uses R alone.
    std::vector<double> bellman_targets(const Transition& t) const {
        const double r = t.reward / config_.reward_scale;
        std::vector<double> targets(config_.atom_count, r);
        if (!t.done && config_.gamma_discount != 0.0) {
            const double next_action = target_actor_.forward(t.next_state)[0];
            const std::vector<double> next_atoms =
                critic_atoms(target_critic_, t.next_state, next_action);
            for (int j = 0; j < config_.atom_count; ++j)
                targets[j] = r + config_.gamma_discount * next_atoms[j];
        }
        return targets;
    }

    // One critic update on a sampled batch; returns the mean loss.
    double update_critic(const std::vector<std::size_t>& batch) {
        NetworkGrads grads = critic_.zero_grads();
        double total_loss = 0.0;
        std::vector<double> atom_grad;
        for (std::size_t idx : batch) {
            const Transition& t = buffer_.at(idx);
            const std::vector<double> targets = bellman_targets(t);
            ForwardCache cache;
            const std::vector<double> predicted = critic_atoms(critic_, t.state, t.action, &cache);
            total_loss += critic_loss(predicted, targets, config_.huber_k, tau_, &atom_grad);
            for (double& g : atom_grad) g /= double(batch.size());
            critic_.backward(cache, atom_grad, grads);
        }
        AdamConfig adam{config_.critic_lr};
        if (!critic_.adam_step(grads, adam)) non_finite_events_++;
        return total_loss / double(batch.size());
    }

    // One actor update: descend f(Z_w(S, pi(S))) through the critic's action
    // input. Returns the batch-mean f.
    double update_actor(const std::vector<std::size_t>& batch) {
        NetworkGrads actor_grads = actor_.zero_grads();
        NetworkGrads scratch = critic_.zero_grads();  // discarded; critic is fixed here
        double total_f = 0.0;
        for (std::size_t idx : batch) {
            const Transition& t = buffer_.at(idx);
            ForwardCache actor_cache;
            const double a = actor_.forward(t.state, &actor_cache)[0];
            ForwardCache critic_cache;
            const std::vector<double> atoms = critic_atoms(critic_, t.state, a, &critic_cache);
            total_f += risk_functional(atoms, config_.objective);
            const std::vector<double> df = risk_functional_grad(atoms, config_.objective);
            const std::vector<double> input_grad = critic_.backward(critic_cache, df, scratch);
            const double da = input_grad[feature_count_] / double(batch.size());
            actor_.backward(actor_cache, {da}, actor_grads);
        }
        AdamConfig adam{config_.actor_lr};
        if (!actor_.adam_step(actor_grads, adam)) non_finite_events_++;
        return total_f / double(batch.size());
    }

    void soft_update_targets() {
        Network::soft_update(actor_, target_actor_, config_.soft_update_coefficient);
        Network::soft_update(critic_, target_critic_, config_.soft_update_coefficient);
    }

    // Full training loop: act with exploration, store transitions, learn
    // after warmup. Aborts on repeated non-finite losses.
    TrainResult train(const EnvConfig& env_config, const MarketParams& params,
                      std::uint64_t seed) {
        TrainResult result;
        Rng learn_rng = make_stream(seed, 0xa11ce);
        std::uint64_t episode_index = 0;
        std::size_t learner_steps = 0;
        double last_critic_loss = 0.0, last_actor_f = 0.0;

        while (learner_steps < config_.total_steps) {
            HedgingEnv env(env_config, params, make_stream(seed, episode_index++));
            while (!env.done() && learner_steps < config_.total_steps) {
                const double noise = noise_scale(learner_steps);
                const std::vector<double> state = env.features().as_vector();
                const double a = explore(act(state), noise, learn_rng);
                StepOutcome out = env.step(a);
                Transition t;
                t.state = state;
                t.action = a;
                t.reward = out.reward;
                t.next_state = out.next_features.as_vector();
                t.done = out.done;
                buffer_.add(std::move(t));

                if (buffer_.size() >= config_.warmup_transitions &&
                    buffer_.size() >= std::size_t(config_.batch_size)) {
                    std::vector<std::size_t> batch(config_.batch_size);
                    for (auto& idx : batch) idx = buffer_.sample_index(learn_rng);
                    last_critic_loss = update_critic(batch);
                    last_actor_f = update_actor(batch);
                    soft_update_targets();
                    ++learner_steps;
                    if (!std::isfinite(last_critic_loss) || !std::isfinite(last_actor_f))
                        non_finite_events_++;
                    if (non_finite_events_ >= 3)
                        throw std::runtime_error(
                            "D4pgQrAgent::train: diverged (3 non-finite losses) at step " +
                            std::to_string(learner_steps));
                    if (config_.eval_every > 0 && learner_steps % config_.eval_every == 0) {
                        TrainLogRow row;
                        row.step = learner_steps;
                        row.critic_loss = last_critic_loss;
                        row.actor_f = last_actor_f;
                        row.noise_scale = noise;
                        row.eval_objective = evaluate_objective(env_config, params, seed);
                        result.log.push_back(row);
                    }
                }
            }
        }
        result.learner_steps = learner_steps;
        return result;
    }

    // Empirical objective of the deterministic policy on held-out seeds.
    double evaluate_objective(const EnvConfig& env_config, const MarketParams& params,
                              std::uint64_t seed) const {
        if (config_.eval_episodes == 0) return std::numeric_limits<double>::quiet_NaN();
        std::vector<double> gains;
        gains.reserve(config_.eval_episodes);
        Policy policy = [this](const StateFeatures& f, const ActionInterval&) {
            return act(f.as_vector());
        };
        for (std::size_t e = 0; e < config_.eval_episodes; ++e) {
            gains.push_back(
                episode(policy, make_stream(seed ^ 0x5eedbeef, e), env_config, params).total_gain);
        }
        const SampleMetrics m =
            sample_metrics(gains, config_.objective.c, config_.objective.p, 1);
        switch (config_.objective.kind) {
            case Objective::mean_std: return m.mean_std;
            case Objective::var: return m.var95;
            case Objective::cvar: return m.cvar95;
        }
        return std::numeric_limits<double>::quiet_NaN();
    }

    double noise_scale(std::size_t learner_step) const {
        if (config_.total_steps == 0 || learner_step >= config_.total_steps)
            return config_.noise_final;
        const double frac = double(learner_step) / double(config_.total_steps);
        return config_.noise_initial + frac * (config_.noise_final - config_.noise_initial);
    }

    Checkpoint to_checkpoint() const {
        Checkpoint ck;
        ck.meta["atom_count"] = std::to_string(config_.atom_count);
        ck.meta["feature_count"] = std::to_string(feature_count_);
        ck.meta["reward_scale"] = std::to_string(config_.reward_scale);
        checkpoint_put_network(ck, "actor", actor_);
        checkpoint_put_network(ck, "critic", critic_);
        checkpoint_put_network(ck, "target_actor", target_actor_);
        checkpoint_put_network(ck, "target_critic", target_critic_);
        return ck;
    }

    void from_checkpoint(const Checkpoint& ck) {
        if (std::stoi(ck.meta_value("feature_count")) != feature_count_)
            throw std::runtime_error("checkpoint: feature count mismatch");
        if (std::stoi(ck.meta_value("atom_count")) != config_.atom_count)
            throw std::runtime_error("checkpoint: atom count mismatch");
        actor_ = checkpoint_get_network(ck, "actor");
        critic_ = checkpoint_get_network(ck, "critic");
        target_actor_ = checkpoint_get_network(ck, "target_actor");
        target_critic_ = checkpoint_get_network(ck, "target_critic");
    }

private:
    AgentConfig config_;
    int feature_count_;
    std::vector<double> tau_;
    ReplayBuffer buffer_;
    Network actor_, critic_, target_actor_, target_critic_;
    int non_finite_events_ = 0;
};

}  // namespace hedgelab
