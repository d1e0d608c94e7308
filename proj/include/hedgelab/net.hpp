#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "hedgelab/rng.hpp"

namespace hedgelab {

enum class OutputActivation { identity, bounded };  // bounded = logistic, output in (0,1)

struct NetworkSpec {
    std::vector<int> widths;  // input, hidden..., output
    OutputActivation output = OutputActivation::identity;

    void validate() const {
        if (widths.size() < 3) throw std::invalid_argument("NetworkSpec: need at least one hidden layer");
        for (int w : widths)
            if (w < 1) throw std::invalid_argument("NetworkSpec: widths must be >= 1");
    }
    int input_width() const { return widths.front(); }
    int output_width() const { return widths.back(); }
    std::size_t layer_count() const { return widths.size() - 1; }
};

// Row-major dense matrix, minimal on purpose.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(std::size_t(r) * c, 0.0) {}
    double& at(int i, int j) { return data[std::size_t(i) * cols + j]; }
    double at(int i, int j) const { return data[std::size_t(i) * cols + j]; }
};

struct LayerParams {
    Matrix weights;             // out x in
    std::vector<double> bias;   // out
};

struct LayerGrads {
    Matrix weights;
    std::vector<double> bias;
};

using NetworkGrads = std::vector<LayerGrads>;

struct ForwardCache {
    std::vector<std::vector<double>> activations;  // per layer, post-activation; [0] = input
    std::vector<std::vector<double>> pre;          // pre-activation per layer
};

struct AdamState {
    std::vector<LayerGrads> m;
    std::vector<LayerGrads> v;
    long step = 0;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Network {
public:
    Network() = default;

    Network(NetworkSpec spec, Rng& rng) : spec_(std::move(spec)) {
        spec_.validate();
        layers_.resize(spec_.layer_count());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const int fan_in = spec_.widths[l];
            const int fan_out = spec_.widths[l + 1];
            layers_[l].weights = Matrix(fan_out, fan_in);
            layers_[l].bias.assign(fan_out, 0.0);
            const double scale = std::sqrt(1.0 / fan_in);
            for (double& w : layers_[l].weights.data) w = scale * draw_normal(rng);
        }
        reset_adam();
    }

    const NetworkSpec& spec() const { return spec_; }
    std::vector<LayerParams>& layers() { return layers_; }
    const std::vector<LayerParams>& layers() const { return layers_; }
    AdamState& adam() { return adam_; }
    const AdamState& adam() const { return adam_; }

    void reset_adam() {
        adam_.m = zero_grads();
        adam_.v = zero_grads();
        adam_.step = 0;
    }

    NetworkGrads zero_grads() const {
        NetworkGrads g(layers_.size());
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            g[l].weights = Matrix(layers_[l].weights.rows, layers_[l].weights.cols);
            g[l].bias.assign(layers_[l].bias.size(), 0.0);
        }
        return g;
    }

    std::vector<double> forward(const std::vector<double>& input, ForwardCache* cache = nullptr) const {
        if (int(input.size()) != spec_.input_width())
            throw std::invalid_argument("Network::forward: input width mismatch");
        if (cache) {
            cache->activations.assign(1, input);
            cache->pre.clear();
        }
        std::vector<double> x = input;
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            const LayerParams& layer = layers_[l];
            std::vector<double> z(layer.bias);
            for (int i = 0; i < layer.weights.rows; ++i) {
                const double* wrow = &layer.weights.data[std::size_t(i) * layer.weights.cols];
                double acc = 0.0;
                for (int j = 0; j < layer.weights.cols; ++j) acc += wrow[j] * x[j];
                z[i] += acc;
            }
            if (cache) cache->pre.push_back(z);
            const bool last = (l + 1 == layers_.size());
            if (!last) {
                for (double& v : z) v = v > 0.0 ? v : 0.0;  // ReLU
            } else if (spec_.output == OutputActivation::bounded) {
                for (double& v : z) v = 1.0 / (1.0 + std::exp(-v));
            }
            if (cache) cache->activations.push_back(z);
            x = std::move(z);
        }
        return x;
    }

    // Reverse-mode gradients of the forward computation. Returns the gradient
    // with respect to the input; parameter gradients are accumulated into
    // `grads` (scaled contributions sum across calls).
    std::vector<double> backward(const ForwardCache& cache, std::vector<double> out_grad,
                                 NetworkGrads& grads) const {
        if (out_grad.size() != std::size_t(spec_.output_width()))
            throw std::invalid_argument("Network::backward: output gradient width mismatch");
        if (cache.pre.size() != layers_.size())
            throw std::invalid_argument("Network::backward: cache does not match network");

        std::vector<double> delta = std::move(out_grad);
        if (spec_.output == OutputActivation::bounded) {
            const auto& y = cache.activations.back();
            for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= y[i] * (1.0 - y[i]);
        }
        for (std::size_t l = layers_.size(); l-- > 0;) {
            if (l + 1 < layers_.size()) {
                const auto& z = cache.pre[l];
                for (std::size_t i = 0; i < delta.size(); ++i)
                    if (z[i] <= 0.0) delta[i] = 0.0;
            }
            const LayerParams& layer = layers_[l];
            const auto& a_prev = cache.activations[l];
            LayerGrads& g = grads[l];
            for (int i = 0; i < layer.weights.rows; ++i) {
                const double d = delta[i];
                g.bias[i] += d;
                double* grow = &g.weights.data[std::size_t(i) * layer.weights.cols];
                for (int j = 0; j < layer.weights.cols; ++j) grow[j] += d * a_prev[j];
            }
            std::vector<double> prev_delta(layer.weights.cols, 0.0);
            for (int i = 0; i < layer.weights.rows; ++i) {
                const double d = delta[i];
                const double* wrow = &layer.weights.data[std::size_t(i) * layer.weights.cols];
                for (int j = 0; j < layer.weights.cols; ++j) prev_delta[j] += d * wrow[j];
            }
            delta = std::move(prev_delta);
        }
        return delta;
    }

    // Adam with bias correction, stepping in -gradient direction. Skips the
    // update (and reports false) if any gradient entry is non-finite.
    bool adam_step(const NetworkGrads& grads, const AdamConfig& cfg) {
        for (const auto& g : grads) {
            for (double v : g.weights.data)
                if (!std::isfinite(v)) return false;
            for (double v : g.bias)
                if (!std::isfinite(v)) return false;
        }
        adam_.step += 1;
        const double bc1 = 1.0 - std::pow(cfg.beta1, double(adam_.step));
        const double bc2 = 1.0 - std::pow(cfg.beta2, double(adam_.step));
        for (std::size_t l = 0; l < layers_.size(); ++l) {
            auto update = [&](double& p, double& m, double& v, double g) {
                m = cfg.beta1 * m + (1.0 - cfg.beta1) * g;
                v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g;
                p -= cfg.lr * (m / bc1) / (std::sqrt(v / bc2) + cfg.eps);
            };
            for (std::size_t k = 0; k < layers_[l].weights.data.size(); ++k)
                update(layers_[l].weights.data[k], adam_.m[l].weights.data[k],
                       adam_.v[l].weights.data[k], grads[l].weights.data[k]);
            for (std::size_t k = 0; k < layers_[l].bias.size(); ++k)
                update(layers_[l].bias[k], adam_.m[l].bias[k], adam_.v[l].bias[k],
                       grads[l].bias[k]);
        }
        return true;
    }

    // target <- c * online + (1 - c) * target
    static void soft_update(const Network& online, Network& target, double coefficient) {
        if (online.layers_.size() != target.layers_.size())
            throw std::invalid_argument("soft_update: layer count mismatch");
        for (std::size_t l = 0; l < online.layers_.size(); ++l) {
            const auto& src = online.layers_[l];
            auto& dst = target.layers_[l];
            if (src.weights.data.size() != dst.weights.data.size() ||
                src.bias.size() != dst.bias.size())
                throw std::invalid_argument("soft_update: shape mismatch");
            for (std::size_t k = 0; k < src.weights.data.size(); ++k)
                dst.weights.data[k] =
                    coefficient * src.weights.data[k] + (1.0 - coefficient) * dst.weights.data[k];
            for (std::size_t k = 0; k < src.bias.size(); ++k)
                dst.bias[k] = coefficient * src.bias[k] + (1.0 - coefficient) * dst.bias[k];
        }
    }

private:
    NetworkSpec spec_;
    std::vector<LayerParams> layers_;
    AdamState adam_;
};

}  // namespace hedgelab
