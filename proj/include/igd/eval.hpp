#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "igd/detector.hpp"
#include "igd/gate.hpp"
#include "igd/synthworld.hpp"

namespace igd {

struct ScoredSample {
    double score = 0.0;
    int label = 0;  // 0 clean, 1 nsfw
    Variant variant = Variant::Clean;
    int concept_id = 0;
};

struct EvalReport {
    double accuracy = 0.0;
    double auroc = 0.0;
    double fpr_at_tpr95 = 0.0;
    long n_pos = 0;
    long n_neg = 0;
    std::array<std::array<long, 2>, 2> confusion = {{{0, 0}, {0, 0}}};  // [true][pred]
};

/// Tie rule everywhere: score >= threshold predicts positive.
inline double accuracy(const std::vector<ScoredSample>& samples, double threshold) {
    if (samples.empty()) throw std::invalid_argument("accuracy: empty input");
    long correct = 0;
    for (const auto& s : samples) {
        const int pred = s.score >= threshold ? 1 : 0;
        if (pred == s.label) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

struct RocPoint {
    double threshold = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

/// One point per unique score, descending; (fpr, tpr) under the >= rule.
inline std::vector<RocPoint> roc_points(const std::vector<ScoredSample>& samples) {
    long n_pos = 0, n_neg = 0;
    for (const auto& s : samples) (s.label == 1 ? n_pos : n_neg)++;
    if (n_pos == 0 || n_neg == 0)
        throw std::invalid_argument("roc: need at least one positive and one negative");

    std::vector<std::pair<double, int>> sorted;
    sorted.reserve(samples.size());
    for (const auto& s : samples) sorted.emplace_back(s.score, s.label);
    std::sort(sorted.begin(), sorted.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });

    std::vector<RocPoint> pts;
    long tp = 0, fp = 0;
    std::size_t i = 0;
    while (i < sorted.size()) {
        const double score = sorted[i].first;
        while (i < sorted.size() && sorted[i].first == score) {
            (sorted[i].second == 1 ? tp : fp)++;
            ++i;
        }
        pts.push_back({score, static_cast<double>(fp) / static_cast<double>(n_neg),
                       static_cast<double>(tp) / static_cast<double>(n_pos)});
    }
    return pts;
}

/// Trapezoidal area over the tie-grouped ROC sweep, which equals the
/// Mann-Whitney pairwise statistic (ties at half credit) exactly.
inline double auroc(const std::vector<ScoredSample>& samples) {
    const auto pts = roc_points(samples);
    double area = 0.0, prev_fpr = 0.0, prev_tpr = 0.0;
    for (const auto& p : pts) {
        area += (p.fpr - prev_fpr) * (p.tpr + prev_tpr) / 2.0;
        prev_fpr = p.fpr;
        prev_tpr = p.tpr;
    }
    return area;
}

/// Minimum FPR over thresholds in {all scores} U {-inf} subject to TPR >= 0.95.
inline double fpr_at_tpr95(const std::vector<ScoredSample>& samples) {
    const auto pts = roc_points(samples);
    double best = 1.0;  // the -inf threshold admits everything: TPR 1, FPR 1
    for (const auto& p : pts)
        if (p.tpr >= 0.95) best = std::min(best, p.fpr);
    return best;
}

inline std::vector<std::vector<long>> confusion_matrix(const std::vector<int>& predictions,
                                                       const std::vector<int>& labels,
                                                       int n_classes) {
    if (predictions.size() != labels.size())
        throw std::invalid_argument("confusion_matrix: length mismatch");
    std::vector<std::vector<long>> m(static_cast<std::size_t>(n_classes),
                                     std::vector<long>(static_cast<std::size_t>(n_classes), 0));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= n_classes || predictions[i] < 0 ||
            predictions[i] >= n_classes)
            throw std::invalid_argument("confusion_matrix: class index out of range");
        m[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(predictions[i])]++;
    }
    return m;
}

inline EvalReport evaluate_binary(const std::vector<ScoredSample>& samples, double threshold) {
    EvalReport r;
    r.accuracy = accuracy(samples, threshold);
    r.auroc = auroc(samples);
    r.fpr_at_tpr95 = fpr_at_tpr95(samples);
    for (const auto& s : samples) {
        (s.label == 1 ? r.n_pos : r.n_neg)++;
        const int pred = s.score >= threshold ? 1 : 0;
        r.confusion[static_cast<std::size_t>(s.label)][static_cast<std::size_t>(pred)]++;
    }
    return r;
}

inline nlohmann::json report_to_json(const EvalReport& r) {
    return {{"accuracy", r.accuracy},
            {"auroc", r.auroc},
            {"fpr_at_tpr95", r.fpr_at_tpr95},
            {"n_pos", r.n_pos},
            {"n_neg", r.n_neg},
            {"confusion", {{r.confusion[0][0], r.confusion[0][1]},
                           {r.confusion[1][0], r.confusion[1][1]}}}};
}

/// CSV "threshold,fpr,tpr" over unique-score thresholds, descending.
inline void roc_export(const std::vector<ScoredSample>& samples, const std::string& path) {
    const auto pts = roc_points(samples);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "threshold,fpr,tpr\n";
    out.precision(17);
    for (const auto& p : pts) out << p.threshold << "," << p.fpr << "," << p.tpr << "\n";
    if (!out) throw std::runtime_error("write failed: " + path);
}

// ---- PCA -------------------------------------------------------------------

struct PcaResult {
    std::vector<Vec> points;        // n x k projections
    Vec explained_variance_ratio;   // k ratios of total variance
};

/// Centers the data and projects onto the top-k eigenvectors of the
/// covariance. Sign convention: the first nonzero loading of each component
/// is positive.
inline PcaResult pca_project(const std::vector<Vec>& vectors, int k = 2) {
    if (vectors.size() < 2) throw std::invalid_argument("pca_project: need >= 2 points");
    const int d = static_cast<int>(vectors.front().size());
    if (k < 1 || k > d) throw std::invalid_argument("pca_project: k out of range");
    const int n = static_cast<int>(vectors.size());

    Eigen::MatrixXd X(n, d);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(vectors[static_cast<std::size_t>(i)].size()) != d)
            throw std::invalid_argument("pca_project: inconsistent dimensions");
        for (int j = 0; j < d; ++j) X(i, j) = vectors[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    const Eigen::RowVectorXd mean = X.colwise().mean();
    X.rowwise() -= mean;
    const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(n);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
    if (solver.info() != Eigen::Success)
        throw std::runtime_error("pca_project: eigendecomposition failed");
    const Eigen::VectorXd evals = solver.eigenvalues();   // ascending
    const Eigen::MatrixXd evecs = solver.eigenvectors();

    double total = 0.0;
    for (int j = 0; j < d; ++j) total += std::max(evals(j), 0.0);

    PcaResult res;
    res.points.assign(static_cast<std::size_t>(n), Vec(static_cast<std::size_t>(k), 0.0));
    res.explained_variance_ratio.resize(static_cast<std::size_t>(k));
    for (int comp = 0; comp < k; ++comp) {
        Eigen::VectorXd v = evecs.col(d - 1 - comp);
        for (int j = 0; j < d; ++j) {
            if (std::abs(v(j)) > 1e-12) {
                if (v(j) < 0.0) v = -v;
                break;
            }
        }
        const double lambda = std::max(evals(d - 1 - comp), 0.0);
        res.explained_variance_ratio[static_cast<std::size_t>(comp)] =
            total > 0.0 ? lambda / total : 0.0;
        const Eigen::VectorXd proj = X * v;
        for (int i = 0; i < n; ++i)
            res.points[static_cast<std::size_t>(i)][static_cast<std::size_t>(comp)] = proj(i);
    }
    return res;
}

// ---- feature-set glue for the runners ---------------------------------------

struct FeatureSet {
    std::vector<NoiseFeature> features;
    std::vector<int> labels;  // 0 clean, 1 nsfw
    std::vector<Variant> variants;
    std::vector<int> concept_ids;
    std::vector<Vec> embeddings;
};

/// Balanced prompt sample: n per valid (concept, variant), concept order.
inline std::vector<PromptRecord> make_prompts(const World& world, int n_per_group,
                                              bool include_adversarial, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<PromptRecord> prompts;
    int next_id = 0;
    for (const auto& c : world.concepts) {
        for (Variant v : valid_variants(c)) {
            if (v == Variant::Adversarial && !include_adversarial) continue;
            for (int i = 0; i < n_per_group; ++i) {
                PromptRecord p = sample_prompt(world, c.concept_id, v, rng);
                p.prompt_id = next_id++;
                prompts.push_back(std::move(p));
            }
        }
    }
    return prompts;
}

/// Extracts features for every prompt on one shared trajectory seed: the
/// initial latent and ancestral draws are identical across prompts, so the
/// feature differences carry only the conditioning signal.
inline FeatureSet extract_set(const DenoiserParams& dp, const NoiseSchedule& sched,
                              const InferenceStepMap& imap,
                              const std::vector<PromptRecord>& prompts,
                              const std::vector<int>& steps, std::uint64_t traj_seed) {
    FeatureSet set;
    set.features.reserve(prompts.size());
    for (const auto& p : prompts) {
        set.features.push_back(extract_feature(dp, sched, imap, p.embedding, steps, traj_seed));
        set.labels.push_back(p.label == ConceptLabel::Nsfw ? 1 : 0);
        set.variants.push_back(p.variant);
        set.concept_ids.push_back(p.concept_id);
        set.embeddings.push_back(p.embedding);
    }
    return set;
}

/// Reinterprets a feature extracted at steps [1..S] as one over `wanted`.
/// Equal to a direct extract_feature call by the shared-code-path contract.
inline NoiseFeature slice_steps(const NoiseFeature& full, const std::vector<int>& wanted, int D) {
    NoiseFeature f;
    f.steps = wanted;
    f.vector.reserve(wanted.size() * static_cast<std::size_t>(D));
    for (int s : wanted) {
        const auto pos = static_cast<std::size_t>(s - 1) * static_cast<std::size_t>(D);
        if (pos + static_cast<std::size_t>(D) > full.vector.size())
            throw std::invalid_argument("slice_steps: step beyond extracted range");
        f.vector.insert(f.vector.end(), full.vector.begin() + static_cast<long>(pos),
                        full.vector.begin() + static_cast<long>(pos + static_cast<std::size_t>(D)));
    }
    return f;
}

inline std::vector<ScoredSample> score_set(const ClassifierParams& cp, const FeatureSet& set,
                                           const std::vector<int>& steps, int D) {
    std::vector<ScoredSample> out;
    out.reserve(set.features.size());
    for (std::size_t i = 0; i < set.features.size(); ++i) {
        const Verdict v = classify(cp, slice_steps(set.features[i], steps, D));
        out.push_back({v.score, set.labels[i], set.variants[i], set.concept_ids[i]});
    }
    return out;
}

inline std::vector<ScoredSample> filter_variants(const std::vector<ScoredSample>& in,
                                                 Variant keep_pos) {
    std::vector<ScoredSample> out;
    for (const auto& s : in)
        if (s.variant == Variant::Clean || s.variant == keep_pos) out.push_back(s);
    return out;
}

inline double mean_pairwise_distance(const std::vector<Vec>& a, const std::vector<Vec>& b) {
    if (a.empty() || b.empty())
        throw std::invalid_argument("mean_pairwise_distance: empty set");
    double sum = 0.0;
    for (const auto& x : a)
        for (const auto& y : b) {
            double d2 = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) {
                const double d = x[i] - y[i];
                d2 += d * d;
            }
            sum += std::sqrt(d2);
        }
    return sum / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

// ---- ablation runners --------------------------------------------------------

struct EvalPlan {
    int n_train_per_group = 67;
    int n_eval_per_group = 67;
    std::uint64_t train_prompt_seed = 0;
    std::uint64_t eval_prompt_seed = 0;
    std::uint64_t traj_seed = 0;
};

struct AblationRow {
    std::string config;
    int feature_dim = 0;
    double accuracy = 0.0;
    double auroc = 0.0;
    double fpr_at_tpr95 = 0.0;
};

namespace detail {

struct AblationData {
    FeatureSet train;  // clean + naive, all-steps features
    FeatureSet eval;   // clean + naive
    int D = 0;
    int S = 0;
};

inline AblationData prepare_ablation_data(const World& world, const DenoiserParams& dp,
                                          const NoiseSchedule& sched,
                                          const InferenceStepMap& imap, const EvalPlan& plan) {
    std::vector<int> all_steps(static_cast<std::size_t>(imap.num_steps));
    for (int i = 0; i < imap.num_steps; ++i) all_steps[static_cast<std::size_t>(i)] = i + 1;
    AblationData d;
    d.D = dp.D;
    d.S = imap.num_steps;
    d.train = extract_set(dp, sched, imap,
                          make_prompts(world, plan.n_train_per_group, false,
                                       plan.train_prompt_seed),
                          all_steps, plan.traj_seed);
    d.eval = extract_set(dp, sched, imap,
                         make_prompts(world, plan.n_eval_per_group, false,
                                      plan.eval_prompt_seed),
                         all_steps, plan.traj_seed);
    return d;
}

inline AblationRow run_one_config(const AblationData& d, const std::vector<int>& steps,
                                  const ClassifierTrainConfig& cfg, std::uint64_t seed,
                                  const std::string& name) {
    std::vector<NoiseFeature> train_feats;
    train_feats.reserve(d.train.features.size());
    for (const auto& f : d.train.features) train_feats.push_back(slice_steps(f, steps, d.D));
    const auto trained = train_classifier(train_feats, d.train.labels, 2, cfg, seed);
    const auto scored = score_set(trained.params, d.eval, steps, d.D);
    AblationRow row;
    row.config = name;
    row.feature_dim = static_cast<int>(steps.size()) * d.D;
    row.accuracy = accuracy(scored, trained.params.threshold);
    row.auroc = auroc(scored);
    row.fpr_at_tpr95 = fpr_at_tpr95(scored);
    return row;
}

}  // namespace detail

/// Table-7 analog: one fresh classifier per single extraction step.
inline std::vector<AblationRow> run_ablation_timesteps(
    const World& world, const DenoiserParams& dp, const NoiseSchedule& sched,
    const InferenceStepMap& imap, const ClassifierTrainConfig& cfg,
    const std::vector<int>& steps_list, const EvalPlan& plan, std::uint64_t seed) {
    const auto data = detail::prepare_ablation_data(world, dp, sched, imap, plan);
    std::vector<AblationRow> rows;
    for (std::size_t i = 0; i < steps_list.size(); ++i) {
        const int k = steps_list[i];
        rows.push_back(detail::run_one_config(data, {k}, cfg, derive_seed(seed, i),
                                              std::to_string(k)));
    }
    return rows;
}

/// Appendix Table-9 analog: concatenated multi-step features.
inline std::vector<AblationRow> run_ablation_concat(
    const World& world, const DenoiserParams& dp, const NoiseSchedule& sched,
    const InferenceStepMap& imap, const ClassifierTrainConfig& cfg,
    const std::vector<std::vector<int>>& step_sets, const EvalPlan& plan, std::uint64_t seed) {
    const auto data = detail::prepare_ablation_data(world, dp, sched, imap, plan);
    std::vector<AblationRow> rows;
    for (std::size_t i = 0; i < step_sets.size(); ++i) {
        validate_steps(step_sets[i], imap.num_steps);
        std::string name;
        for (std::size_t j = 0; j < step_sets[i].size(); ++j)
            name += (j ? "+" : "") + std::to_string(step_sets[i][j]);
        rows.push_back(detail::run_one_config(data, step_sets[i], cfg, derive_seed(seed, i),
                                              name));
    }
    return rows;
}

/// Appendix Table-10 analog: classifier depth sweep at the default gate step.
inline std::vector<AblationRow> run_ablation_depth(
    const World& world, const DenoiserParams& dp, const NoiseSchedule& sched,
    const InferenceStepMap& imap, const std::vector<int>& layer_counts,
    const std::vector<int>& feature_steps, const EvalPlan& plan, std::uint64_t seed) {
    const auto data = detail::prepare_ablation_data(world, dp, sched, imap, plan);
    std::vector<AblationRow> rows;
    for (std::size_t i = 0; i < layer_counts.size(); ++i) {
        ClassifierTrainConfig cfg;
        cfg.hidden_dims = make_hidden_taper(layer_counts[i]);
        rows.push_back(detail::run_one_config(data, feature_steps, cfg, derive_seed(seed, i),
                                              std::to_string(layer_counts[i]) + "-layer"));
    }
    return rows;
}

struct MulticlassResult {
    int n_classes = 0;
    std::vector<std::vector<long>> confusion;
    Vec per_class_accuracy;
    double overall_accuracy = 0.0;
    double clean_class_accuracy = 0.0;
};

/// (n_nsfw_concepts + 1)-way classification, clean collapsed to one class.
inline MulticlassResult run_multiclass(const World& world, const DenoiserParams& dp,
                                       const NoiseSchedule& sched, const InferenceStepMap& imap,
                                       const ClassifierTrainConfig& cfg,
                                       const std::vector<int>& feature_steps,
                                       const EvalPlan& plan, std::uint64_t seed) {
    if (world.concepts.size() < 2)
        throw std::invalid_argument("run_multiclass: world must have >= 2 concepts");
    const auto data = detail::prepare_ablation_data(world, dp, sched, imap, plan);

    // class 0 = clean; nsfw concepts get classes 1..n in concept order
    std::vector<int> class_of_concept;
    int next = 1;
    for (const auto& c : world.concepts)
        class_of_concept.push_back(c.label == ConceptLabel::Nsfw ? next++ : 0);
    const int n_classes = next;

    auto class_labels = [&](const FeatureSet& set) {
        std::vector<int> out;
        out.reserve(set.concept_ids.size());
        for (int cid : set.concept_ids)
            out.push_back(class_of_concept[static_cast<std::size_t>(cid)]);
        return out;
    };

    std::vector<NoiseFeature> train_feats;
    for (const auto& f : data.train.features)
        train_feats.push_back(slice_steps(f, feature_steps, data.D));
    const auto trained = train_classifier(train_feats, class_labels(data.train), n_classes, cfg,
                                          derive_seed(seed, 0));

    const std::vector<int> truth = class_labels(data.eval);
    std::vector<int> preds;
    preds.reserve(truth.size());
    for (const auto& f : data.eval.features)
        preds.push_back(classify(trained.params, slice_steps(f, feature_steps, data.D)).label);

    MulticlassResult res;
    res.n_classes = n_classes;
    res.confusion = confusion_matrix(preds, truth, n_classes);
    res.per_class_accuracy.resize(static_cast<std::size_t>(n_classes), 0.0);
    long correct = 0, total = 0;
    for (int c = 0; c < n_classes; ++c) {
        long row_total = 0;
        for (int p = 0; p < n_classes; ++p)
            row_total += res.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(p)];
        const long diag = res.confusion[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
        res.per_class_accuracy[static_cast<std::size_t>(c)] =
            row_total > 0 ? static_cast<double>(diag) / static_cast<double>(row_total) : 0.0;
        correct += diag;
        total += row_total;
    }
    res.overall_accuracy = static_cast<double>(correct) / static_cast<double>(total);
    res.clean_class_accuracy = res.per_class_accuracy[0];
    return res;
}

}  // namespace igd
