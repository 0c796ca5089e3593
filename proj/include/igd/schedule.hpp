#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "igd/rng.hpp"

namespace igd {

/// Diffusion noise schedule: per-timestep betas with the derived alphas and
/// cumulative-product alpha_bars driving both the forward corruption and the
/// ancestral reverse step.
struct NoiseSchedule {
    int T = 0;
    Vec betas;
    Vec alphas;
    Vec alpha_bars;
};

struct Latent {
    Vec values;
    int dim() const { return static_cast<int>(values.size()); }
};

struct NoiseVector {
    Vec values;
    int dim() const { return static_cast<int>(values.size()); }
};

/// Maps S inference steps onto the training timesteps the denoiser knows.
/// training_indices[0] is the noisiest (first executed) index.
struct InferenceStepMap {
    int num_steps = 0;
    std::vector<int> training_indices;
};

inline NoiseSchedule build_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw std::invalid_argument("build_schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw std::invalid_argument("build_schedule: need 0 < beta_start <= beta_end < 1");

    NoiseSchedule s;
    s.T = T;
    s.betas.resize(static_cast<std::size_t>(T));
    s.alphas.resize(static_cast<std::size_t>(T));
    s.alpha_bars.resize(static_cast<std::size_t>(T));
    const double span = beta_end - beta_start;
    const double denom = static_cast<double>(T > 1 ? T - 1 : 1);
    double prod = 1.0;
    for (int i = 0; i < T; ++i) {
        const double b = beta_start + static_cast<double>(i) * span / denom;
        s.betas[i] = b;
        s.alphas[i] = 1.0 - b;
        prod *= s.alphas[i];
        s.alpha_bars[i] = prod;
    }
    return s;
}

inline void check_timestep(int t, const NoiseSchedule& s, const char* where) {
    if (t < 0 || t >= s.T)
        throw std::invalid_argument(std::string(where) + ": timestep out of range");
}

/// x^t = sqrt(abar^t) x0 + sqrt(1 - abar^t) eps, elementwise.
inline Latent forward_diffuse(const Latent& x0, int t, const NoiseVector& eps,
                              const NoiseSchedule& s) {
    check_timestep(t, s, "forward_diffuse");
    if (x0.dim() != eps.dim())
        throw std::invalid_argument("forward_diffuse: dimension mismatch");
    const double ab = s.alpha_bars[static_cast<std::size_t>(t)];
    const double c0 = std::sqrt(ab);
    const double c1 = std::sqrt(1.0 - ab);
    Latent out;
    out.values.resize(x0.values.size());
    for (std::size_t i = 0; i < x0.values.size(); ++i)
        out.values[i] = c0 * x0.values[i] + c1 * eps.values[i];
    return out;
}

/// Ancestral DDPM step with sigma_t = sqrt(beta^t). The caller supplies the
/// standard-normal draw z (zero at t = 0).
inline Latent reverse_step(const Latent& x_next, const NoiseVector& eps_pred, int t,
                           const NoiseSchedule& s, const NoiseVector& z) {
    check_timestep(t, s, "reverse_step");
    if (x_next.dim() != eps_pred.dim() || x_next.dim() != z.dim())
        throw std::invalid_argument("reverse_step: dimension mismatch");
    const std::size_t ti = static_cast<std::size_t>(t);
    const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alphas[ti]);
    const double noise_coef = s.betas[ti] / std::sqrt(1.0 - s.alpha_bars[ti]);
    const double sigma = std::sqrt(s.betas[ti]);
    Latent out;
    out.values.resize(x_next.values.size());
    for (std::size_t i = 0; i < x_next.values.size(); ++i)
        out.values[i] = inv_sqrt_alpha * (x_next.values[i] - noise_coef * eps_pred.values[i]) +
                        sigma * z.values[i];
    return out;
}

/// Evenly strided descending indices: training_indices[i] = T-1 - floor(i*T/S).
inline InferenceStepMap make_inference_map(int T, int S) {
    if (S < 1) throw std::invalid_argument("make_inference_map: S must be >= 1");
    if (S > T) throw std::invalid_argument("make_inference_map: S must be <= T");
    InferenceStepMap m;
    m.num_steps = S;
    m.training_indices.resize(static_cast<std::size_t>(S));
    for (int i = 0; i < S; ++i) {
        const auto stride = static_cast<long long>(i) * T / S;
        m.training_indices[static_cast<std::size_t>(i)] = T - 1 - static_cast<int>(stride);
    }
    return m;
}

/// Rebuilds a schedule over the executed inference indices so that the
/// single-index ancestral step traverses the full noise decay. Index 0 of
/// the result is the least-noisy executed step; alpha_bar'[k] equals the
/// original alpha_bar at the k-th executed training index (ascending order).
/// reverse_step applied to this schedule with the respaced index, while the
/// denoiser sees the original training index, is the standard DDPM respacing.
inline NoiseSchedule respace(const NoiseSchedule& s, const InferenceStepMap& m) {
    const int S = m.num_steps;
    NoiseSchedule r;
    r.T = S;
    r.betas.resize(static_cast<std::size_t>(S));
    r.alphas.resize(static_cast<std::size_t>(S));
    r.alpha_bars.resize(static_cast<std::size_t>(S));
    for (int j = 0; j < S; ++j) {
        // training_indices is descending; respaced j ascends from least noisy.
        const int t = m.training_indices[static_cast<std::size_t>(S - 1 - j)];
        check_timestep(t, s, "respace");
        const double ab = s.alpha_bars[static_cast<std::size_t>(t)];
        r.alpha_bars[static_cast<std::size_t>(j)] = ab;
        const double prev = (j == 0) ? 1.0 : r.alpha_bars[static_cast<std::size_t>(j - 1)];
        r.alphas[static_cast<std::size_t>(j)] = ab / prev;
        r.betas[static_cast<std::size_t>(j)] = 1.0 - r.alphas[static_cast<std::size_t>(j)];
    }
    return r;
}

}  // namespace igd
