#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <json.hpp>

#include "igd/checkpoint.hpp"
#include "igd/nn.hpp"
#include "igd/sampler.hpp"

namespace igd {

/// Size-unfolded predicted noise at one or more inference steps: the IGD
/// feature vector. Steps are 1-based ascending; vector is the step-order
/// concatenation of the recorded noise predictions.
struct NoiseFeature {
    std::vector<int> steps;
    Vec vector;
};

struct ClassifierParams {
    MlpParams net;
    int n_classes = 2;
    std::vector<int> feature_steps = {5};
    double threshold = 0.5;
};

struct Verdict {
    int label = 0;
    double score = 0.0;
    Vec logits;
};

inline void validate_steps(const std::vector<int>& steps, int S) {
    if (steps.empty()) throw std::invalid_argument("feature steps must be non-empty");
    for (std::size_t i = 0; i < steps.size(); ++i) {
        if (steps[i] < 1 || steps[i] > S)
            throw std::invalid_argument("feature step out of range [1, S]");
        if (i > 0 && steps[i] <= steps[i - 1])
            throw std::invalid_argument("feature steps must be strictly ascending");
    }
}

/// Runs the reverse loop up to max(steps) (exactly that many denoiser calls)
/// and concatenates the recorded predicted noise at the requested steps.
inline NoiseFeature extract_feature(const DenoiserParams& dp, const NoiseSchedule& sched,
                                    const InferenceStepMap& imap, const Vec& c,
                                    const std::vector<int>& steps, std::uint64_t seed) {
    validate_steps(steps, imap.num_steps);
    const int upto = steps.back();
    ReverseRun run = run_reverse(dp, sched, imap, c, seed, upto);
    NoiseFeature f;
    f.steps = steps;
    f.vector.reserve(steps.size() * static_cast<std::size_t>(dp.D));
    for (int s : steps) {
        const Vec& e = run.eps_records[static_cast<std::size_t>(s - 1)].values;
        f.vector.insert(f.vector.end(), e.begin(), e.end());
    }
    return f;
}

struct ClassifierTrainConfig {
    std::vector<int> hidden_dims = {128, 64, 32, 16};  // 5 weight layers
    int epochs = 100;
    double lr = 1e-3;
    int batch_size = 32;
    double threshold = 0.5;
};

/// Tapered hidden widths for an n_layer-deep head (n_layers = weight layers):
/// geometric interpolation 128 -> 16, which reproduces {128,64,32,16} at 5.
inline std::vector<int> make_hidden_taper(int n_layers) {
    if (n_layers < 1) throw std::invalid_argument("make_hidden_taper: need >= 1 layer");
    if (n_layers == 1) return {};
    if (n_layers == 2) return {128};
    std::vector<int> dims;
    for (int i = 0; i < n_layers - 1; ++i) {
        const double w = 128.0 * std::pow(16.0 / 128.0,
                                          static_cast<double>(i) / (n_layers - 2));
        dims.push_back(static_cast<int>(std::lround(w)));
    }
    return dims;
}

struct ClassifierTrainResult {
    ClassifierParams params;
    double train_accuracy = 0.0;
    Vec loss_trace;  // mean loss per epoch
};

/// Cross-entropy training over per-epoch shuffles (Fisher-Yates, seeded).
/// Batch-mean gradients are accumulated in shuffled sample order. Also used
/// directly for the prompt-embedding control classifier.
inline ClassifierTrainResult train_vector_classifier(const std::vector<Vec>& inputs,
                                                     const std::vector<int>& labels,
                                                     int n_classes,
                                                     const ClassifierTrainConfig& cfg,
                                                     std::uint64_t seed) {
    if (inputs.empty() || inputs.size() != labels.size())
        throw std::invalid_argument("train_classifier: inputs/labels size mismatch");
    if (n_classes < 2) throw std::invalid_argument("train_classifier: need >= 2 classes");
    const std::size_t dim = inputs.front().size();
    for (const auto& f : inputs)
        if (f.size() != dim)
            throw std::invalid_argument("train_classifier: inconsistent feature lengths");
    std::vector<bool> seen(static_cast<std::size_t>(n_classes), false);
    for (int y : labels) {
        if (y < 0 || y >= n_classes)
            throw std::invalid_argument("train_classifier: label out of range");
        seen[static_cast<std::size_t>(y)] = true;
    }
    if (std::count(seen.begin(), seen.end(), true) < 2)
        throw std::invalid_argument("train_classifier: dataset contains a single class");

    ClassifierTrainResult res;
    res.params.n_classes = n_classes;
    res.params.threshold = cfg.threshold;
    std::vector<int> dims;
    dims.push_back(static_cast<int>(dim));
    dims.insert(dims.end(), cfg.hidden_dims.begin(), cfg.hidden_dims.end());
    dims.push_back(n_classes);
    res.params.net = init_params(dims, derive_seed(seed, 0));

    Rng shuffle_rng(derive_seed(seed, 1));
    AdamState opt = make_adam_state(res.params.net, cfg.lr);
    const std::size_t n = inputs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);

    for (int ep = 0; ep < cfg.epochs; ++ep) {
        for (std::size_t i = n - 1; i > 0; --i)
            std::swap(order[i], order[shuffle_rng.uniform_int(i + 1)]);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
            MlpGrads batch = zero_grads_like(res.params.net);
            const double inv = 1.0 / static_cast<double>(end - start);
            for (std::size_t i = start; i < end; ++i) {
                LossGrad lg = xent_loss_grad(res.params.net, inputs[order[i]], labels[order[i]]);
                epoch_loss += lg.loss;
                accumulate(batch, lg.grads, inv);
            }
            adam_step(res.params.net, batch, opt);
        }
        res.loss_trace.push_back(epoch_loss / static_cast<double>(n));
    }

    int correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const Vec logits = mlp_forward(res.params.net, inputs[i]);
        const auto arg = std::max_element(logits.begin(), logits.end()) - logits.begin();
        if (static_cast<int>(arg) == labels[i]) ++correct;
    }
    res.train_accuracy = static_cast<double>(correct) / static_cast<double>(n);
    return res;
}

inline ClassifierTrainResult train_classifier(const std::vector<NoiseFeature>& features,
                                              const std::vector<int>& labels, int n_classes,
                                              const ClassifierTrainConfig& cfg,
                                              std::uint64_t seed) {
    if (features.empty())
        throw std::invalid_argument("train_classifier: features/labels size mismatch");
    std::vector<Vec> inputs;
    inputs.reserve(features.size());
    for (const auto& f : features) inputs.push_back(f.vector);
    ClassifierTrainResult res = train_vector_classifier(inputs, labels, n_classes, cfg, seed);
    res.params.feature_steps = features.front().steps;
    return res;
}

/// Binary mode: label 1 iff P(nsfw) >= threshold (class 1 is nsfw), score is
/// the nsfw probability. Otherwise label = argmax, score = max softmax.
inline Verdict classify(const ClassifierParams& cp, const NoiseFeature& f) {
    if (static_cast<int>(f.vector.size()) != cp.net.input_dim())
        throw std::invalid_argument("classify: feature length mismatch");
    Verdict v;
    v.logits = mlp_forward(cp.net, f.vector);
    const Vec probs = softmax(v.logits);
    if (cp.n_classes == 2) {
        v.score = probs[1];
        v.label = v.score >= cp.threshold ? 1 : 0;
    } else {
        const auto arg = std::max_element(probs.begin(), probs.end()) - probs.begin();
        v.label = static_cast<int>(arg);
        v.score = probs[static_cast<std::size_t>(arg)];
    }
    return v;
}

// ---- checkpoint ------------------------------------------------------------

inline nlohmann::json classifier_to_json(const ClassifierParams& cp, int D) {
    nlohmann::json j = mlp_to_json(cp.net);
    j["n_classes"] = cp.n_classes;
    j["feature_steps"] = cp.feature_steps;
    j["threshold"] = cp.threshold;
    j["D"] = D;
    return j;
}

struct ClassifierCheckpoint {
    ClassifierParams params;
    int D = 0;
};

inline ClassifierCheckpoint classifier_from_json(const nlohmann::json& j) {
    ClassifierCheckpoint ck;
    ck.params.net = mlp_from_json(j);
    ck.params.n_classes = j.at("n_classes").get<int>();
    ck.params.feature_steps = j.at("feature_steps").get<std::vector<int>>();
    ck.params.threshold = j.at("threshold").get<double>();
    ck.D = j.at("D").get<int>();
    if (ck.params.net.input_dim() !=
        ck.D * static_cast<int>(ck.params.feature_steps.size()))
        throw std::runtime_error("classifier checkpoint: input dim inconsistent with steps");
    if (ck.params.net.output_dim() != ck.params.n_classes)
        throw std::runtime_error("classifier checkpoint: output dim inconsistent with classes");
    return ck;
}

}  // namespace igd
