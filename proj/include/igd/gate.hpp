#pragma once

#include <stdexcept>
#include <vector>

#include "igd/detector.hpp"
#include "igd/sampler.hpp"

namespace igd {

struct GateConfig {
    std::vector<int> gate_steps = {5};
    double threshold = 0.5;
    int num_inference_steps = 50;
};

enum class GateStatus { Completed, Blocked };

struct GateResult {
    GateStatus status = GateStatus::Completed;
    Latent final_latent;  // meaningful only when status == Completed
    Verdict verdict;
    int decided_at_step = 0;
    int denoiser_calls = 0;
};

/// Gated generation: runs the shared reverse loop, assembles the gate-step
/// feature from the noise already computed (no extra denoiser cost), makes a
/// single decision after the last gate step, and terminates early on an NSFW
/// verdict. Safe runs continue on the same draw stream, so the completed
/// latent is bitwise identical to generate_unguarded with the same seed.
inline GateResult generate_with_gate(const DenoiserParams& dp, const ClassifierParams& cp,
                                     const NoiseSchedule& sched, const GateConfig& cfg,
                                     const Vec& c, std::uint64_t seed,
                                     const StepHook& observer = {}) {
    validate_steps(cfg.gate_steps, cfg.num_inference_steps);
    if (cp.feature_steps != cfg.gate_steps)
        throw std::invalid_argument(
            "generate_with_gate: classifier feature_steps must equal gate_steps");
    if (cp.net.input_dim() != dp.D * static_cast<int>(cfg.gate_steps.size()))
        throw std::invalid_argument("generate_with_gate: classifier/denoiser dim mismatch");

    const InferenceStepMap imap = make_inference_map(sched.T, cfg.num_inference_steps);
    const int decision_step = cfg.gate_steps.back();

    GateResult result;
    result.status = GateStatus::Completed;
    auto hook = [&](int k, const ReverseRun& run) {
        if (observer && !observer(k, run))
            throw std::logic_error("generate_with_gate: observer must not abort the run");
        if (k != decision_step) return true;
        NoiseFeature f;
        f.steps = cfg.gate_steps;
        f.vector.reserve(cfg.gate_steps.size() * static_cast<std::size_t>(dp.D));
        for (int s : cfg.gate_steps) {
            const Vec& e = run.eps_records[static_cast<std::size_t>(s - 1)].values;
            f.vector.insert(f.vector.end(), e.begin(), e.end());
        }
        result.verdict = classify(cp, f);
        result.decided_at_step = k;
        if (cp.n_classes == 2 && result.verdict.score >= cfg.threshold) {
            result.status = GateStatus::Blocked;
            return false;
        }
        if (cp.n_classes != 2 && result.verdict.label != 0) {
            result.status = GateStatus::Blocked;
            return false;
        }
        return true;
    };

    ReverseRun run = run_reverse(dp, sched, imap, c, seed, cfg.num_inference_steps, hook);
    result.denoiser_calls = run.denoiser_calls;
    if (result.status == GateStatus::Completed) result.final_latent = run.latent;
    return result;
}

/// Baseline generator: S full reverse steps, deterministic per seed.
inline Latent generate_unguarded(const DenoiserParams& dp, const NoiseSchedule& sched, int S,
                                 const Vec& c, std::uint64_t seed) {
    const InferenceStepMap imap = make_inference_map(sched.T, S);
    return run_reverse(dp, sched, imap, c, seed, S).latent;
}

}  // namespace igd
