#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "igd/checkpoint.hpp"
#include "igd/nn.hpp"
#include "igd/rng.hpp"
#include "igd/schedule.hpp"
#include "igd/synthworld.hpp"

namespace igd {

/// Conditional noise predictor eps_theta(x, t, c): an MLP over the
/// concatenation [x | time embedding | condition embedding].
struct DenoiserParams {
    MlpParams net;
    int D = 0;
    int d_e = 0;
    int d_t = 8;
};

struct TimeEmbedding {
    int d_t = 0;
    Vec values;
};

/// Sinusoidal embedding: values[2k] = sin(t / T^(2k/d_t)),
/// values[2k+1] = cos(t / T^(2k/d_t)).
inline TimeEmbedding embed_time(int t, int T, int d_t) {
    if (t < 0 || t >= T) throw std::invalid_argument("embed_time: t out of range");
    if (d_t < 2 || d_t % 2 != 0) throw std::invalid_argument("embed_time: d_t must be even");
    TimeEmbedding e;
    e.d_t = d_t;
    e.values.resize(static_cast<std::size_t>(d_t));
    for (int k = 0; k < d_t / 2; ++k) {
        const double freq = std::pow(static_cast<double>(T), 2.0 * k / d_t);
        const double angle = static_cast<double>(t) / freq;
        e.values[static_cast<std::size_t>(2 * k)] = std::sin(angle);
        e.values[static_cast<std::size_t>(2 * k + 1)] = std::cos(angle);
    }
    return e;
}

namespace detail {

inline Vec denoiser_input(const DenoiserParams& dp, const Vec& x, int t, int T, const Vec& c) {
    if (static_cast<int>(x.size()) != dp.D)
        throw std::invalid_argument("predict_noise: latent dimension mismatch");
    if (static_cast<int>(c.size()) != dp.d_e)
        throw std::invalid_argument("predict_noise: embedding dimension mismatch");
    Vec in;
    in.reserve(x.size() + static_cast<std::size_t>(dp.d_t) + c.size());
    in.insert(in.end(), x.begin(), x.end());
    const TimeEmbedding te = embed_time(t, T, dp.d_t);
    in.insert(in.end(), te.values.begin(), te.values.end());
    in.insert(in.end(), c.begin(), c.end());
    return in;
}

}  // namespace detail

inline NoiseVector predict_noise(const DenoiserParams& dp, const Latent& x, int t,
                                 const NoiseSchedule& s, const Vec& c) {
    check_timestep(t, s, "predict_noise");
    NoiseVector out;
    out.values = mlp_forward(dp.net, detail::denoiser_input(dp, x.values, t, s.T, c));
    return out;
}

struct DenoiserTrainConfig {
    std::vector<int> hidden_dims = {64, 64};
    int d_t = 8;
    int steps = 20000;
    double lr = 1e-3;
    int batch_size = 32;
};

struct DenoiserTrainResult {
    DenoiserParams params;
    Vec loss_trace;  // batch-mean loss per optimization step
};

/// Trains eps_theta on (x0, c) pairs: t uniform in [0, T), eps standard
/// normal, x_t from forward_diffuse, L2 on the predicted noise. The batch
/// mean is accumulated in sample order (fixed reduction order, so runs are
/// reproducible per seed). Pairs keep whatever variants the caller supplies;
/// the generative model is expected to know every prompt cluster.
inline DenoiserTrainResult train_denoiser(const std::vector<TrainingPair>& dataset,
                                          const NoiseSchedule& sched,
                                          const DenoiserTrainConfig& cfg, std::uint64_t seed) {
    if (dataset.empty()) throw std::invalid_argument("train_denoiser: empty dataset");
    const int D = static_cast<int>(dataset.front().x0.values.size());
    const int d_e = static_cast<int>(dataset.front().prompt.embedding.size());
    for (const auto& tp : dataset)
        if (static_cast<int>(tp.x0.values.size()) != D ||
            static_cast<int>(tp.prompt.embedding.size()) != d_e)
            throw std::invalid_argument("train_denoiser: inconsistent pair dimensions");

    DenoiserTrainResult res;
    res.params.D = D;
    res.params.d_e = d_e;
    res.params.d_t = cfg.d_t;
    std::vector<int> dims;
    dims.push_back(D + cfg.d_t + d_e);
    dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    dims.push_back(D);
    res.params.net = init_params(dims, derive_seed(seed, 0));

    Rng rng(derive_seed(seed, 1));
    AdamState opt = make_adam_state(res.params.net, cfg.lr);
    res.loss_trace.reserve(static_cast<std::size_t>(cfg.steps));

    for (int step = 0; step < cfg.steps; ++step) {
        MlpGrads batch_grads = zero_grads_like(res.params.net);
        double batch_loss = 0.0;
        for (int b = 0; b < cfg.batch_size; ++b) {
            const auto& tp = dataset[rng.uniform_int(dataset.size())];
            const int t = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(sched.T)));
            NoiseVector eps;
            eps.values = rng.gaussian_vec(D);
            const Latent xt = forward_diffuse(tp.x0, t, eps, sched);
            const Vec in = detail::denoiser_input(res.params, xt.values, t, sched.T,
                                                  tp.prompt.embedding);
            LossGrad lg = mse_loss_grad(res.params.net, in, eps.values);
            batch_loss += lg.loss;
            accumulate(batch_grads, lg.grads, 1.0 / cfg.batch_size);
        }
        batch_loss /= cfg.batch_size;
        if (!std::isfinite(batch_loss))
            throw std::runtime_error("train_denoiser: loss diverged (non-finite) at step " +
                                     std::to_string(step));
        res.loss_trace.push_back(batch_loss);
        adam_step(res.params.net, batch_grads, opt);
    }
    return res;
}

// ---- checkpoint ------------------------------------------------------------

inline nlohmann::json denoiser_to_json(const DenoiserParams& dp, const NoiseSchedule& sched,
                                       double beta_start, double beta_end) {
    nlohmann::json j = mlp_to_json(dp.net);
    j["D"] = dp.D;
    j["d_e"] = dp.d_e;
    j["d_t"] = dp.d_t;
    j["schedule"] = {{"T", sched.T}, {"beta_start", beta_start}, {"beta_end", beta_end}};
    return j;
}

struct DenoiserCheckpoint {
    DenoiserParams params;
    NoiseSchedule schedule;
    double beta_start = 0.0;
    double beta_end = 0.0;
};

inline DenoiserCheckpoint denoiser_from_json(const nlohmann::json& j) {
    DenoiserCheckpoint ck;
    ck.params.net = mlp_from_json(j);
    ck.params.D = j.at("D").get<int>();
    ck.params.d_e = j.at("d_e").get<int>();
    ck.params.d_t = j.at("d_t").get<int>();
    const auto& js = j.at("schedule");
    ck.beta_start = js.at("beta_start").get<double>();
    ck.beta_end = js.at("beta_end").get<double>();
    ck.schedule = build_schedule(js.at("T").get<int>(), ck.beta_start, ck.beta_end);
    if (ck.params.net.input_dim() != ck.params.D + ck.params.d_t + ck.params.d_e ||
        ck.params.net.output_dim() != ck.params.D)
        throw std::runtime_error("denoiser checkpoint: net shape inconsistent with dims");
    return ck;
}

}  // namespace igd
