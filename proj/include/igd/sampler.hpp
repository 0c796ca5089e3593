#pragma once

#include <functional>
#include <stdexcept>
#include <vector>

#include "igd/denoiser.hpp"
#include "igd/rng.hpp"
#include "igd/schedule.hpp"

namespace igd {

/// One (possibly truncated) reverse trajectory. eps_records[k-1] is the
/// predicted noise at inference step k (k = 1 is the noisiest step).
struct ReverseRun {
    Latent latent;
    std::vector<NoiseVector> eps_records;
    int denoiser_calls = 0;
};

/// Called after each denoiser evaluation with the 1-based step index and the
/// run so far; returning false aborts the loop (early termination).
using StepHook = std::function<bool(int, const ReverseRun&)>;

/// The single reverse-loop code path shared by feature extraction, gated
/// generation and unguarded generation: identical seeds give bit-identical
/// trajectory prefixes. Draw order: one D-vector for x_S, then one z-vector
/// per executed step except the final (respaced index 0) step.
/// The denoiser sees the original training index from `imap`; the ancestral
/// update runs on the respaced schedule.
inline ReverseRun run_reverse(const DenoiserParams& dp, const NoiseSchedule& sched,
                              const InferenceStepMap& imap, const Vec& c, std::uint64_t seed,
                              int stop_after_step, const StepHook& after_step = {}) {
    const int S = imap.num_steps;
    if (stop_after_step < 1 || stop_after_step > S)
        throw std::invalid_argument("run_reverse: stop step out of range");
    const NoiseSchedule respaced = respace(sched, imap);

    Rng rng(seed);
    ReverseRun run;
    run.latent.values = rng.gaussian_vec(dp.D);
    run.eps_records.reserve(static_cast<std::size_t>(stop_after_step));

    NoiseVector zero;
    zero.values.assign(static_cast<std::size_t>(dp.D), 0.0);
    for (int k = 1; k <= stop_after_step; ++k) {
        const int j = S - k;  // respaced index, 0 at the last executed step
        const int t = imap.training_indices[static_cast<std::size_t>(k - 1)];
        NoiseVector eps = predict_noise(dp, run.latent, t, sched, c);
        ++run.denoiser_calls;
        run.eps_records.push_back(std::move(eps));
        if (after_step && !after_step(k, run)) break;
        const NoiseVector& e = run.eps_records.back();
        if (j == 0) {
            run.latent = reverse_step(run.latent, e, j, respaced, zero);
        } else {
            NoiseVector z;
            z.values = rng.gaussian_vec(dp.D);
            run.latent = reverse_step(run.latent, e, j, respaced, z);
        }
    }
    return run;
}

}  // namespace igd
