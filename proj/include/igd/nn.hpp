#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "igd/rng.hpp"

namespace igd {

/// Row-major (rows x cols) dense matrix.
struct Matrix {
    int rows = 0;
    int cols = 0;
    Vec data;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

    double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
};

enum class Activation { Relu };

/// Fully connected network: affine + relu on hidden layers, affine output.
/// weights[l] is (layer_dims[l+1] x layer_dims[l]).
struct MlpParams {
    std::vector<int> layer_dims;
    std::vector<Matrix> weights;
    std::vector<Vec> biases;
    Activation hidden_activation = Activation::Relu;

    int num_layers() const { return static_cast<int>(weights.size()); }
    int input_dim() const { return layer_dims.front(); }
    int output_dim() const { return layer_dims.back(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& w : weights) n += w.data.size();
        for (const auto& b : biases) n += b.size();
        return n;
    }
};

/// Gradients (or any other MlpParams-shaped accumulator).
struct MlpGrads {
    std::vector<Matrix> weights;
    std::vector<Vec> biases;
};

inline MlpGrads zero_grads_like(const MlpParams& p) {
    MlpGrads g;
    g.weights.reserve(p.weights.size());
    g.biases.reserve(p.biases.size());
    for (const auto& w : p.weights) g.weights.emplace_back(w.rows, w.cols);
    for (const auto& b : p.biases) g.biases.emplace_back(b.size(), 0.0);
    return g;
}

inline void accumulate(MlpGrads& acc, const MlpGrads& g, double scale = 1.0) {
    for (std::size_t l = 0; l < acc.weights.size(); ++l) {
        for (std::size_t i = 0; i < acc.weights[l].data.size(); ++i)
            acc.weights[l].data[i] += scale * g.weights[l].data[i];
        for (std::size_t i = 0; i < acc.biases[l].size(); ++i)
            acc.biases[l][i] += scale * g.biases[l][i];
    }
}

/// Glorot-uniform weights, zero biases, deterministic per seed.
inline MlpParams init_params(const std::vector<int>& layer_dims, std::uint64_t seed) {
    if (layer_dims.size() < 2)
        throw std::invalid_argument("init_params: need at least input and output dims");
    for (int d : layer_dims)
        if (d < 1) throw std::invalid_argument("init_params: layer dims must be positive");

    Rng rng(seed);
    MlpParams p;
    p.layer_dims = layer_dims;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
        const int fan_in = layer_dims[l];
        const int fan_out = layer_dims[l + 1];
        Matrix w(fan_out, fan_in);
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (auto& x : w.data) x = (2.0 * rng.uniform() - 1.0) * limit;
        p.weights.push_back(std::move(w));
        p.biases.emplace_back(static_cast<std::size_t>(fan_out), 0.0);
    }
    return p;
}

namespace detail {

// Post-activation values per layer; activations[0] is the input.
inline void forward_pass(const MlpParams& p, const Vec& input, std::vector<Vec>& activations) {
    if (static_cast<int>(input.size()) != p.input_dim())
        throw std::invalid_argument("mlp_forward: input dimension mismatch");
    activations.clear();
    activations.push_back(input);
    const int L = p.num_layers();
    for (int l = 0; l < L; ++l) {
        const Matrix& w = p.weights[static_cast<std::size_t>(l)];
        const Vec& b = p.biases[static_cast<std::size_t>(l)];
        const Vec& in = activations.back();
        Vec out(static_cast<std::size_t>(w.rows));
        for (int r = 0; r < w.rows; ++r) {
            double acc = b[static_cast<std::size_t>(r)];
            const double* wrow = &w.data[static_cast<std::size_t>(r) * w.cols];
            for (int c = 0; c < w.cols; ++c) acc += wrow[c] * in[static_cast<std::size_t>(c)];
            out[static_cast<std::size_t>(r)] = (l + 1 < L && acc < 0.0) ? 0.0 : acc;
        }
        activations.push_back(std::move(out));
    }
}

// Backpropagates d(loss)/d(output) through the cached activations.
inline MlpGrads backward_pass(const MlpParams& p, const std::vector<Vec>& activations,
                              Vec delta) {
    MlpGrads g = zero_grads_like(p);
    const int L = p.num_layers();
    for (int l = L - 1; l >= 0; --l) {
        const Vec& in = activations[static_cast<std::size_t>(l)];
        Matrix& gw = g.weights[static_cast<std::size_t>(l)];
        Vec& gb = g.biases[static_cast<std::size_t>(l)];
        for (int r = 0; r < gw.rows; ++r) {
            const double d = delta[static_cast<std::size_t>(r)];
            gb[static_cast<std::size_t>(r)] = d;
            double* grow = &gw.data[static_cast<std::size_t>(r) * gw.cols];
            for (int c = 0; c < gw.cols; ++c) grow[c] = d * in[static_cast<std::size_t>(c)];
        }
        if (l > 0) {
            const Matrix& w = p.weights[static_cast<std::size_t>(l)];
            Vec prev(static_cast<std::size_t>(w.cols), 0.0);
            for (int r = 0; r < w.rows; ++r) {
                const double d = delta[static_cast<std::size_t>(r)];
                const double* wrow = &w.data[static_cast<std::size_t>(r) * w.cols];
                for (int c = 0; c < w.cols; ++c) prev[static_cast<std::size_t>(c)] += d * wrow[c];
            }
            // relu mask from the cached post-activation of layer l
            const Vec& act = activations[static_cast<std::size_t>(l)];
            for (std::size_t i = 0; i < prev.size(); ++i)
                if (act[i] <= 0.0) prev[i] = 0.0;
            delta = std::move(prev);
        }
    }
    return g;
}

}  // namespace detail

inline Vec mlp_forward(const MlpParams& p, const Vec& input) {
    std::vector<Vec> acts;
    detail::forward_pass(p, input, acts);
    return acts.back();
}

/// Numerically stable softmax; outputs are positive and sum to 1.
inline Vec softmax(const Vec& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    Vec out(logits.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        out[i] = std::exp(logits[i] - m);
        sum += out[i];
    }
    for (auto& x : out) x /= sum;
    return out;
}

struct LossGrad {
    double loss = 0.0;
    MlpGrads grads;
};

/// Mean squared error over output coordinates, with exact backprop gradients.
inline LossGrad mse_loss_grad(const MlpParams& p, const Vec& input, const Vec& target) {
    std::vector<Vec> acts;
    detail::forward_pass(p, input, acts);
    const Vec& out = acts.back();
    if (out.size() != target.size())
        throw std::invalid_argument("mse_loss_grad: target dimension mismatch");
    const double n = static_cast<double>(out.size());
    LossGrad r;
    Vec delta(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double d = out[i] - target[i];
        r.loss += d * d / n;
        delta[i] = 2.0 * d / n;
    }
    r.grads = detail::backward_pass(p, acts, std::move(delta));
    return r;
}

/// Cross-entropy: -log softmax(logits)[label], with exact gradients.
inline LossGrad xent_loss_grad(const MlpParams& p, const Vec& input, int label) {
    std::vector<Vec> acts;
    detail::forward_pass(p, input, acts);
    const Vec& logits = acts.back();
    if (label < 0 || label >= static_cast<int>(logits.size()))
        throw std::invalid_argument("xent_loss_grad: label out of range");
    const double m = *std::max_element(logits.begin(), logits.end());
    double lse = 0.0;
    for (double z : logits) lse += std::exp(z - m);
    lse = m + std::log(lse);
    LossGrad r;
    r.loss = lse - logits[static_cast<std::size_t>(label)];
    Vec delta(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) {
        delta[i] = std::exp(logits[i] - lse);
        if (static_cast<int>(i) == label) delta[i] -= 1.0;
    }
    r.grads = detail::backward_pass(p, acts, std::move(delta));
    return r;
}

struct AdamState {
    int step_count = 0;
    MlpGrads first_moment;
    MlpGrads second_moment;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

inline AdamState make_adam_state(const MlpParams& p, double lr = 1e-3) {
    if (lr <= 0.0) throw std::invalid_argument("make_adam_state: lr must be positive");
    AdamState st;
    st.lr = lr;
    st.first_moment = zero_grads_like(p);
    st.second_moment = zero_grads_like(p);
    return st;
}

/// Standard Adam update with bias correction, in place.
inline void adam_step(MlpParams& p, const MlpGrads& grads, AdamState& st) {
    if (grads.weights.size() != p.weights.size())
        throw std::invalid_argument("adam_step: gradient shape mismatch");
    st.step_count += 1;
    const double c1 = 1.0 - std::pow(st.beta1, st.step_count);
    const double c2 = 1.0 - std::pow(st.beta2, st.step_count);
    auto update = [&](double& param, double g, double& m, double& v) {
        m = st.beta1 * m + (1.0 - st.beta1) * g;
        v = st.beta2 * v + (1.0 - st.beta2) * g * g;
        param -= st.lr * (m / c1) / (std::sqrt(v / c2) + st.epsilon);
    };
    for (std::size_t l = 0; l < p.weights.size(); ++l) {
        if (grads.weights[l].data.size() != p.weights[l].data.size() ||
            grads.biases[l].size() != p.biases[l].size())
            throw std::invalid_argument("adam_step: gradient shape mismatch");
        for (std::size_t i = 0; i < p.weights[l].data.size(); ++i)
            update(p.weights[l].data[i], grads.weights[l].data[i],
                   st.first_moment.weights[l].data[i], st.second_moment.weights[l].data[i]);
        for (std::size_t i = 0; i < p.biases[l].size(); ++i)
            update(p.biases[l][i], grads.biases[l][i], st.first_moment.biases[l][i],
                   st.second_moment.biases[l][i]);
    }
}

}  // namespace igd
