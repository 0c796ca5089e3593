#pragma once

#include <cstdint>
#include <vector>

#include "igd/denoiser.hpp"
#include "igd/detector.hpp"
#include "igd/eval.hpp"
#include "igd/gate.hpp"
#include "igd/schedule.hpp"
#include "igd/synthworld.hpp"

namespace igd {

/// Canonical end-to-end configuration. Every numeric default below is the
/// documented reference setting; the seeds are the ones the reference
/// manifest was produced with.
struct PipelineConfig {
    // world
    int n_clean = 3;
    int n_nsfw = 3;
    int D = 16;
    int d_e = 8;
    double separation = 2.0;
    double image_sigma = 0.1;
    double embed_sigma = 0.1;
    // schedule / inference
    int T = 1000;
    double beta_start = 1e-4;
    double beta_end = 0.02;
    int num_inference_steps = 50;
    // dataset
    int n_per_group = 134;
    // training
    DenoiserTrainConfig denoiser;
    ClassifierTrainConfig classifier;
    std::vector<int> feature_steps = {5};
    // evaluation
    int n_eval_per_group = 67;
    // seeds
    std::uint64_t world_seed = 1;
    std::uint64_t data_seed = 2;
    std::uint64_t denoiser_seed = 3;
    std::uint64_t classifier_seed = 4;
    std::uint64_t traj_seed = 5;
    std::uint64_t eval_seed = 6;
};

/// Evaluation of a trained detector on fresh held-out prompts, including the
/// prompt-embedding control (the pre-detection analog) and the gate-step
/// feature geometry.
struct DetectorEvaluation {
    FeatureSet eval_set;
    std::vector<ScoredSample> scored;
    EvalReport naive_report;
    EvalReport adv_report;
    double emb_naive_auroc = 0.0;
    double emb_adv_auroc = 0.0;
    double dist_naive_adv = 0.0;    // same-concept naive vs adversarial, gate-step features
    double dist_naive_clean = 0.0;  // naive vs clean, gate-step features
};

inline DetectorEvaluation evaluate_detector(
    const World& world, const DenoiserParams& dp, const ClassifierParams& cp,
    const NoiseSchedule& sched, const InferenceStepMap& imap,
    const std::vector<Vec>& control_embeddings, const std::vector<int>& control_labels,
    const ClassifierTrainConfig& control_cfg, int n_eval_per_group, std::uint64_t eval_seed,
    std::uint64_t traj_seed, std::uint64_t control_train_seed) {
    DetectorEvaluation ev;
    const auto prompts = make_prompts(world, n_eval_per_group, true, eval_seed);
    ev.eval_set = extract_set(dp, sched, imap, prompts, cp.feature_steps, traj_seed);

    ev.scored.reserve(ev.eval_set.features.size());
    for (std::size_t i = 0; i < ev.eval_set.features.size(); ++i) {
        const Verdict v = classify(cp, ev.eval_set.features[i]);
        ev.scored.push_back({v.score, ev.eval_set.labels[i], ev.eval_set.variants[i],
                             ev.eval_set.concept_ids[i]});
    }
    ev.naive_report = evaluate_binary(filter_variants(ev.scored, Variant::Naive), cp.threshold);
    ev.adv_report =
        evaluate_binary(filter_variants(ev.scored, Variant::Adversarial), cp.threshold);

    // Prompt-embedding control: same head, trained on the raw condition
    // embeddings instead of predicted noise.
    const auto control =
        train_vector_classifier(control_embeddings, control_labels, 2, control_cfg,
                                control_train_seed);
    std::vector<ScoredSample> emb_scored;
    emb_scored.reserve(ev.eval_set.embeddings.size());
    for (std::size_t i = 0; i < ev.eval_set.embeddings.size(); ++i) {
        const Vec logits = mlp_forward(control.params.net, ev.eval_set.embeddings[i]);
        emb_scored.push_back({softmax(logits)[1], ev.eval_set.labels[i],
                              ev.eval_set.variants[i], ev.eval_set.concept_ids[i]});
    }
    ev.emb_naive_auroc = auroc(filter_variants(emb_scored, Variant::Naive));
    ev.emb_adv_auroc = auroc(filter_variants(emb_scored, Variant::Adversarial));

    // Gate-step feature geometry (Figure-3-right analog).
    std::vector<Vec> clean_feats, naive_all;
    std::vector<std::vector<Vec>> naive_by_concept, adv_by_concept;
    for (const auto& c : world.concepts)
        if (c.label == ConceptLabel::Nsfw) {
            naive_by_concept.emplace_back();
            adv_by_concept.emplace_back();
        }
    int nsfw_index_base = 0;
    for (const auto& c : world.concepts)
        if (c.label == ConceptLabel::Clean) ++nsfw_index_base;
    for (std::size_t i = 0; i < ev.eval_set.features.size(); ++i) {
        const Vec& f = ev.eval_set.features[i].vector;
        switch (ev.eval_set.variants[i]) {
            case Variant::Clean:
                clean_feats.push_back(f);
                break;
            case Variant::Naive:
                naive_all.push_back(f);
                naive_by_concept[static_cast<std::size_t>(ev.eval_set.concept_ids[i] -
                                                          nsfw_index_base)]
                    .push_back(f);
                break;
            case Variant::Adversarial:
                adv_by_concept[static_cast<std::size_t>(ev.eval_set.concept_ids[i] -
                                                        nsfw_index_base)]
                    .push_back(f);
                break;
        }
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < naive_by_concept.size(); ++j)
        acc += mean_pairwise_distance(naive_by_concept[j], adv_by_concept[j]);
    ev.dist_naive_adv = acc / static_cast<double>(naive_by_concept.size());
    ev.dist_naive_clean = mean_pairwise_distance(naive_all, clean_feats);
    return ev;
}

struct ReferenceRun {
    World world;
    NoiseSchedule sched;
    InferenceStepMap imap;
    std::vector<TrainingPair> dataset;
    DenoiserTrainResult denoiser;
    ClassifierTrainResult classifier;
    DetectorEvaluation eval;
};

/// The documented default pipeline: world -> dataset -> denoiser ->
/// clean+naive features -> classifier -> held-out evaluation. The denoiser
/// trains on every variant (it is the generative model); the classifier
/// never sees an adversarial feature.
inline ReferenceRun run_reference_pipeline(const PipelineConfig& cfg) {
    ReferenceRun run;
    run.world = build_world(cfg.n_clean, cfg.n_nsfw, cfg.D, cfg.d_e, cfg.world_seed,
                            cfg.separation, cfg.image_sigma, cfg.embed_sigma);
    run.sched = build_schedule(cfg.T, cfg.beta_start, cfg.beta_end);
    run.imap = make_inference_map(cfg.T, cfg.num_inference_steps);
    run.dataset = build_dataset(run.world, cfg.n_per_group, cfg.data_seed);
    run.denoiser = train_denoiser(run.dataset, run.sched, cfg.denoiser, cfg.denoiser_seed);

    // classifier features: the dataset's clean and naive prompts only
    std::vector<PromptRecord> train_prompts;
    for (const auto& tp : run.dataset)
        if (tp.prompt.variant != Variant::Adversarial) train_prompts.push_back(tp.prompt);
    const FeatureSet train_set = extract_set(run.denoiser.params, run.sched, run.imap,
                                             train_prompts, cfg.feature_steps, cfg.traj_seed);
    run.classifier = train_classifier(train_set.features, train_set.labels, 2, cfg.classifier,
                                      cfg.classifier_seed);

    run.eval = evaluate_detector(run.world, run.denoiser.params, run.classifier.params,
                                 run.sched, run.imap, train_set.embeddings, train_set.labels,
                                 cfg.classifier, cfg.n_eval_per_group, cfg.eval_seed,
                                 cfg.traj_seed, derive_seed(cfg.classifier_seed, 1001));
    return run;
}

}  // namespace igd
