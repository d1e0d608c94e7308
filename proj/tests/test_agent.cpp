#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>

#include "hedgelab/agent.hpp"
#include "hedgelab/baselines.hpp"

using namespace hedgelab;

namespace {

AgentConfig small_agent_config() {
    AgentConfig cfg;
    cfg.hidden = {16, 16};
    cfg.atom_count = 11;
    cfg.buffer_capacity = 10000;
    cfg.warmup_transitions = 64;
    cfg.eval_every = 0;
    return cfg;
}

// Inverse standard normal CDF via bisection on norm_cdf; oracle use only.
double normal_quantile(double p) {
    double lo = -10.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (norm_cdf(mid) < p ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("quantile_huber basics") {
    for (double tau : {0.1, 0.5, 0.9})
        REQUIRE(quantile_huber(0.0, tau, 1.0) == 0.0);
    // tau = 1/2: symmetric, half the Huber value
    for (double u : {0.3, 1.7, -2.5}) {
        REQUIRE_THAT(quantile_huber(u, 0.5, 1.0),
                     Catch::Matchers::WithinAbs(quantile_huber(-u, 0.5, 1.0), 1e-15));
        REQUIRE_THAT(quantile_huber(u, 0.5, 1.0),
                     Catch::Matchers::WithinAbs(0.5 * huber(u, 1.0), 1e-15));
    }
    // hand evaluation: u=2, k=1, tau=0.9 -> 0.9 * 1 * (2 - 0.5) = 1.35
    REQUIRE_THAT(quantile_huber(2.0, 0.9, 1.0), Catch::Matchers::WithinAbs(1.35, 1e-12));
    REQUIRE_THROWS(quantile_huber(1.0, 0.0, 1.0));
    REQUIRE_THROWS(quantile_huber(1.0, 0.5, 0.0));
}

TEST_CASE("quantile_huber_grad matches finite differences") {
    for (double tau : {0.25, 0.5, 0.9})
        for (double u : {-2.0, -0.6, 0.4, 1.3}) {
            const double h = 1e-7;
            const double fd =
                (quantile_huber(u + h, tau, 1.0) - quantile_huber(u - h, tau, 1.0)) / (2 * h);
            REQUIRE_THAT(quantile_huber_grad(u, tau, 1.0), Catch::Matchers::WithinAbs(fd, 1e-6));
        }
}

TEST_CASE("replay buffer is a ring with uniform sampling") {
    ReplayBuffer buffer(100);
    for (int i = 0; i < 250; ++i) {
        Transition t;
        t.reward = double(i);
        buffer.add(std::move(t));
    }
    REQUIRE(buffer.size() == 100);
    REQUIRE(buffer.insertions() == 250);
    // the oldest retained reward is 150
    double min_reward = 1e9;
    for (std::size_t i = 0; i < buffer.size(); ++i)
        min_reward = std::min(min_reward, buffer.at(i).reward);
    REQUIRE(min_reward == 150.0);

    // chi-square uniformity over sampled indices
    Rng rng(31);
    const int draws = 100000;
    std::vector<int> counts(100, 0);
    for (int i = 0; i < draws; ++i) counts[buffer.sample_index(rng)]++;
    const double expected = double(draws) / 100.0;
    double chi2 = 0.0;
    for (int c : counts) chi2 += (c - expected) * (c - expected) / expected;
    // 99 dof, 0.01 critical value ~ 134.6
    REQUIRE(chi2 < 134.6);
}

TEST_CASE("bellman targets") {
    Rng rng(8);
    AgentConfig cfg = small_agent_config();
    cfg.atom_count = 3;
    D4pgQrAgent agent(cfg, 5, rng);

    Transition done_t;
    done_t.state = {0, 0, 0, 0, 0};
    done_t.next_state = {0, 0, 0, 0, 0};
    done_t.reward = 3.0 * cfg.reward_scale;
    done_t.done = true;
    for (double y : agent.bellman_targets(done_t)) REQUIRE(y == 3.0);

    // force the target critic to emit atoms (1, 2, 3) regardless of input
    auto& critic = agent.target_critic();
    for (auto& layer : critic.layers()) {
        std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    critic.layers().back().bias = {1.0, 2.0, 3.0};

    Transition t = done_t;
    t.done = false;
    t.reward = 0.5 * cfg.reward_scale;
    const std::vector<double> y = agent.bellman_targets(t);
    REQUIRE_THAT(y[0], Catch::Matchers::WithinAbs(1.5, 1e-12));
    REQUIRE_THAT(y[1], Catch::Matchers::WithinAbs(2.5, 1e-12));
    REQUIRE_THAT(y[2], Catch::Matchers::WithinAbs(3.5, 1e-12));

    AgentConfig zero_gamma = cfg;
    zero_gamma.gamma_discount = 0.0;
    Rng rng2(8);
    D4pgQrAgent agent2(zero_gamma, 5, rng2);
    for (double v : agent2.bellman_targets(t)) REQUIRE(v == 0.5);
}

TEST_CASE("critic_loss is zero when prediction equals a degenerate target") {
    const std::vector<double> tau = quantile_midpoints(5);
    const std::vector<double> atoms(5, 2.5);
    std::vector<double> grad;
    REQUIRE(critic_loss(atoms, atoms, 1.0, tau, &grad) == 0.0);
    for (double g : grad) REQUIRE(g == 0.0);
    REQUIRE_THROWS(critic_loss(atoms, {1.0}, 1.0, tau));
}

TEST_CASE("critic_loss gradient matches finite differences") {
    const int m = 7;
    const std::vector<double> tau = quantile_midpoints(m);
    Rng rng(5);
    std::vector<double> predicted(m), target(m);
    for (double& v : predicted) v = draw_normal(rng);
    for (double& v : target) v = draw_normal(rng);
    std::vector<double> grad;
    critic_loss(predicted, target, 1.0, tau, &grad);
    for (int j = 0; j < m; ++j) {
        const double h = 1e-7;
        std::vector<double> up = predicted, dn = predicted;
        up[j] += h;
        dn[j] -= h;
        const double fd =
            (critic_loss(up, target, 1.0, tau) - critic_loss(dn, target, 1.0, tau)) / (2 * h);
        REQUIRE_THAT(grad[j], Catch::Matchers::WithinAbs(fd, 1e-6));
    }
}

TEST_CASE("quantile regression on free atoms recovers known quantiles") {
    // fixed discrete distribution; tight Huber threshold keeps the minimizer
    // close to the true quantile
    const std::vector<double> values{-2.0, -1.0, 0.0, 1.0, 3.0};
    const std::vector<double> probs{0.1, 0.2, 0.3, 0.25, 0.15};
    const int m = 51;
    const std::vector<double> tau = quantile_midpoints(m);

    Rng rng(404);
    std::discrete_distribution<int> dist(probs.begin(), probs.end());
    std::vector<double> atoms(m, 0.0);
    std::vector<double> m1(m, 0.0), m2(m, 0.0);
    const double k = 0.01;
    const int iters = 100000 / m;  // ~1e5 samples total
    long step = 0;
    for (int it = 0; it < iters; ++it) {
        std::vector<double> targets(m);
        for (double& t : targets) t = values[dist(rng)];
        std::vector<double> grad;
        critic_loss(atoms, targets, k, tau, &grad);
        ++step;
        const double lr = it < iters / 2 ? 0.05 : 0.004;  // decay so atoms settle
        for (int j = 0; j < m; ++j) {  // adam on the free atoms
            m1[j] = 0.9 * m1[j] + 0.1 * grad[j];
            m2[j] = 0.999 * m2[j] + 0.001 * grad[j] * grad[j];
            const double mh = m1[j] / (1.0 - std::pow(0.9, step));
            const double vh = m2[j] / (1.0 - std::pow(0.999, step));
            atoms[j] -= lr * mh / (std::sqrt(vh) + 1e-8);
        }
    }
    // true tau-quantiles of the discrete distribution
    for (int j = 0; j < m; ++j) {
        double cum = 0.0;
        double want = values.back();
        for (std::size_t i = 0; i < values.size(); ++i) {
            cum += probs[i];
            if (tau[j] <= cum + 1e-12) {
                want = values[i];
                break;
            }
        }
        // skip atoms whose tau sits on a CDF plateau boundary
        bool near_boundary = false;
        double cumb = 0.0;
        for (double p : probs) {
            cumb += p;
            if (std::abs(tau[j] - cumb) < 0.02) near_boundary = true;
        }
        if (near_boundary) continue;
        REQUIRE_THAT(atoms[j], Catch::Matchers::WithinAbs(want, 0.02));
    }
}

TEST_CASE("single-atom quantile regression is median regression") {
    Rng rng(7);
    std::vector<double> sample(2001);
    for (double& v : sample) v = draw_normal(rng) * 2.0 + 0.3;
    std::vector<double> sorted = sample;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];

    const std::vector<double> tau{0.5};
    std::vector<double> atom{0.0};
    const double k = 1e-3;
    for (int epoch = 0; epoch < 200; ++epoch) {
        for (double s : sample) {
            std::vector<double> grad;
            critic_loss(atom, {s}, k, tau, &grad);
            atom[0] -= 0.01 * grad[0] / k;  // normalized step inside the Huber zone
        }
    }
    REQUIRE_THAT(atom[0], Catch::Matchers::WithinAbs(median, 0.1));
}

TEST_CASE("risk functionals on a degenerate distribution") {
    for (auto kind : {Objective::mean_std, Objective::var, Objective::cvar}) {
        ObjectiveSpec obj;
        obj.kind = kind;
        REQUIRE_THAT(risk_functional(std::vector<double>(51, 4.2), obj),
                     Catch::Matchers::WithinAbs(-4.2, 1e-12));
    }
}

TEST_CASE("risk functionals against the analytic normal oracle") {
    const int m = 51;
    const std::vector<double> tau = quantile_midpoints(m);
    std::vector<double> atoms(m);
    for (int j = 0; j < m; ++j) atoms[j] = normal_quantile(tau[j]);

    ObjectiveSpec mean_std;
    mean_std.kind = Objective::mean_std;
    ObjectiveSpec var;
    var.kind = Objective::var;
    ObjectiveSpec cvar;
    cvar.kind = Objective::cvar;
    REQUIRE_THAT(risk_functional(atoms, mean_std), Catch::Matchers::WithinAbs(1.645, 0.08));
    REQUIRE_THAT(risk_functional(atoms, var), Catch::Matchers::WithinAbs(1.645, 0.08));
    REQUIRE_THAT(risk_functional(atoms, cvar), Catch::Matchers::WithinAbs(2.06, 0.08));
}

TEST_CASE("risk functionals are translation equivariant and VaR <= CVaR") {
    Rng rng(13);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> atoms(17);
        for (double& v : atoms) v = 3.0 * draw_normal(rng);
        ObjectiveSpec var;
        var.kind = Objective::var;
        ObjectiveSpec cvar;
        cvar.kind = Objective::cvar;
        ObjectiveSpec mean_std;
        mean_std.kind = Objective::mean_std;

        REQUIRE(risk_functional(atoms, var) <= risk_functional(atoms, cvar) + 1e-12);

        const double c = draw_normal(rng);
        std::vector<double> shifted = atoms;
        for (double& v : shifted) v += c;
        for (const auto& obj : {mean_std, var, cvar})
            REQUIRE_THAT(risk_functional(shifted, obj),
                         Catch::Matchers::WithinAbs(risk_functional(atoms, obj) - c, 1e-10));
    }
}

TEST_CASE("risk functional gradients match finite differences") {
    Rng rng(19);
    for (auto kind : {Objective::mean_std, Objective::var, Objective::cvar}) {
        ObjectiveSpec obj;
        obj.kind = kind;
        std::vector<double> atoms(21);
        for (double& v : atoms) v = draw_normal(rng);
        const std::vector<double> grad = risk_functional_grad(atoms, obj);
        for (std::size_t j = 0; j < atoms.size(); ++j) {
            const double h = 1e-7;
            std::vector<double> up = atoms, dn = atoms;
            up[j] += h;
            dn[j] -= h;
            const double fd = (risk_functional(up, obj) - risk_functional(dn, obj)) / (2 * h);
            REQUIRE_THAT(grad[j], Catch::Matchers::WithinAbs(fd, 1e-5));
        }
    }
}

TEST_CASE("critic-loss gradient through the full network matches finite differences") {
    Rng rng(23);
    AgentConfig cfg = small_agent_config();
    cfg.atom_count = 5;
    cfg.hidden = {8};
    D4pgQrAgent agent(cfg, 3, rng);
    const std::vector<double> tau = agent.tau();

    std::vector<Transition> batch(4);
    for (auto& t : batch) {
        t.state = {draw_normal(rng), draw_normal(rng), draw_normal(rng)};
        t.action = draw_uniform(rng);
        t.reward = draw_normal(rng);
        t.next_state = t.state;
        t.done = true;  // targets independent of the critic under test
    }

    auto batch_loss = [&]() {
        double acc = 0.0;
        for (const auto& t : batch) {
            const std::vector<double> targets = agent.bellman_targets(t);
            const std::vector<double> pred = agent.critic_atoms(agent.critic(), t.state, t.action);
            acc += critic_loss(pred, targets, cfg.huber_k, tau);
        }
        return acc / double(batch.size());
    };

    NetworkGrads grads = agent.critic().zero_grads();
    for (const auto& t : batch) {
        const std::vector<double> targets = agent.bellman_targets(t);
        ForwardCache cache;
        const std::vector<double> pred =
            agent.critic_atoms(agent.critic(), t.state, t.action, &cache);
        std::vector<double> atom_grad;
        critic_loss(pred, targets, cfg.huber_k, tau, &atom_grad);
        for (double& g : atom_grad) g /= double(batch.size());
        agent.critic().backward(cache, atom_grad, grads);
    }

    auto& layers = agent.critic().layers();
    int checked = 0;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        for (std::size_t k = 0; k < layers[l].weights.data.size(); k += 7) {
            double& p = layers[l].weights.data[k];
            const double saved = p, h = 1e-6;
            p = saved + h;
            const double up = batch_loss();
            p = saved - h;
            const double dn = batch_loss();
            p = saved;
            const double fd = (up - dn) / (2 * h);
            REQUIRE(std::abs(grads[l].weights.data[k] - fd) <= 1e-4 * std::max(1.0, std::abs(fd)));
            ++checked;
        }
    }
    REQUIRE(checked > 10);
}

TEST_CASE("actor gradient is zero when the critic ignores the action") {
    Rng rng(3);
    AgentConfig cfg = small_agent_config();
    D4pgQrAgent agent(cfg, 5, rng);
    // zero the action column of the critic's first layer
    auto& first = agent.critic().layers()[0];
    for (int i = 0; i < first.weights.rows; ++i) first.weights.at(i, 5) = 0.0;

    Transition t;
    t.state = {0.5, 0.1, -0.2, 0.3, 0.0};
    t.action = 0.4;
    t.reward = 0.0;
    t.next_state = t.state;
    t.done = true;
    agent.buffer().add(t);

    const auto before = agent.actor().layers();
    agent.update_actor({0});
    for (std::size_t l = 0; l < before.size(); ++l) {
        REQUIRE(agent.actor().layers()[l].weights.data == before[l].weights.data);
        REQUIRE(agent.actor().layers()[l].bias == before[l].bias);
    }
}

TEST_CASE("actor converges to the optimum of a constructed critic") {
    // critic atoms = -|a - 0.7| for every atom, so f = |a - 0.7| under
    // mean-std with c = 0; the actor should drive its output to 0.7
    Rng rng(15);
    AgentConfig cfg = small_agent_config();
    cfg.objective.kind = Objective::mean_std;
    cfg.objective.c = 0.0;
    cfg.actor_lr = 5e-3;
    cfg.hidden = {8};
    cfg.atom_count = 5;
    D4pgQrAgent agent(cfg, 2, rng);

    auto& critic = agent.critic();
    for (auto& layer : critic.layers()) {
        std::fill(layer.weights.data.begin(), layer.weights.data.end(), 0.0);
        std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
    }
    // hidden unit 0 = relu(a - 0.7), hidden unit 1 = relu(0.7 - a)
    critic.layers()[0].weights.at(0, 2) = 1.0;
    critic.layers()[0].bias[0] = -0.7;
    critic.layers()[0].weights.at(1, 2) = -1.0;
    critic.layers()[0].bias[1] = 0.7;
    for (int j = 0; j < 5; ++j) {
        critic.layers()[1].weights.at(j, 0) = -1.0;
        critic.layers()[1].weights.at(j, 1) = -1.0;
    }

    Transition t;
    t.state = {0.3, -0.4};
    t.action = 0.5;
    t.reward = 0.0;
    t.next_state = t.state;
    t.done = true;
    agent.buffer().add(t);

    for (int i = 0; i < 4000; ++i) agent.update_actor({0});
    REQUIRE_THAT(agent.act({0.3, -0.4}), Catch::Matchers::WithinAbs(0.7, 0.01));
}

TEST_CASE("explore with zero noise is the identity, large noise clips") {
    Rng rng(2);
    REQUIRE(D4pgQrAgent::explore(0.37, 0.0, rng) == 0.37);
    int at_bounds = 0;
    const int n = 20000;
    double sum = 0.0;
    for (int i = 0; i < n; ++i) {
        const double a = D4pgQrAgent::explore(0.5, 5.0, rng);
        REQUIRE(a >= 0.0);
        REQUIRE(a <= 1.0);
        if (a == 0.0 || a == 1.0) ++at_bounds;
        sum += a;
    }
    // with scale 5, nearly all mass clips to the bounds, split evenly
    REQUIRE(at_bounds > n * 0.8);
    REQUIRE_THAT(sum / n, Catch::Matchers::WithinAbs(0.5, 0.02));
}

TEST_CASE("noise schedule anneals linearly to the final scale") {
    AgentConfig cfg = small_agent_config();
    cfg.total_steps = 1000;
    Rng rng(1);
    D4pgQrAgent agent(cfg, 5, rng);
    REQUIRE(agent.noise_scale(0) == cfg.noise_initial);
    REQUIRE_THAT(agent.noise_scale(500),
                 Catch::Matchers::WithinAbs(0.5 * (cfg.noise_initial + cfg.noise_final), 1e-12));
    REQUIRE(agent.noise_scale(1000) == cfg.noise_final);
    REQUIRE(agent.noise_scale(5000) == cfg.noise_final);
}

TEST_CASE("training is deterministic under a fixed seed") {
    MarketParams params;
    params.vol_of_vol = 0.0;
    EnvConfig env;
    env.kappa = 0.01;
    env.horizon_days = 5;
    AgentConfig cfg = small_agent_config();
    cfg.total_steps = 60;
    cfg.warmup_transitions = 32;

    auto run = [&]() {
        Rng rng(99);
        D4pgQrAgent agent(cfg, StateFeatures::count, rng);
        agent.train(env, params, 1234);
        return agent.actor().layers();
    };
    const auto a = run();
    const auto b = run();
    for (std::size_t l = 0; l < a.size(); ++l) {
        REQUIRE(a[l].weights.data == b[l].weights.data);
        REQUIRE(a[l].bias == b[l].bias);
    }
}

TEST_CASE("checkpoint round-trip preserves the agent") {
    Rng rng(44);
    AgentConfig cfg = small_agent_config();
    D4pgQrAgent agent(cfg, StateFeatures::count, rng);
    Checkpoint ck = agent.to_checkpoint();
    std::stringstream ss;
    ck.save(ss);
    Checkpoint back = Checkpoint::load(ss);

    Rng rng2(45);
    D4pgQrAgent restored(cfg, StateFeatures::count, rng2);
    restored.from_checkpoint(back);
    const std::vector<double> s{1.0, 0.2, -0.3, 0.5, 0.1};
    REQUIRE(restored.act(s) == agent.act(s));

    AgentConfig other = cfg;
    other.atom_count = 7;
    Rng rng3(46);
    D4pgQrAgent wrong(other, StateFeatures::count, rng3);
    REQUIRE_THROWS(wrong.from_checkpoint(back));
}
