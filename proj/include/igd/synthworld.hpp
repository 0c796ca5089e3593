#pragma once

#include <cmath>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "igd/rng.hpp"
#include "igd/schedule.hpp"

namespace igd {

constexpr int kWorldFormatVersion = 1;
constexpr int kDatasetFormatVersion = 1;

enum class ConceptLabel { Clean, Nsfw };
enum class Variant { Clean, Naive, Adversarial };

inline std::string to_string(Variant v) {
    switch (v) {
        case Variant::Clean: return "clean";
        case Variant::Naive: return "naive";
        default: return "adversarial";
    }
}

inline Variant variant_from_string(const std::string& s) {
    if (s == "clean") return Variant::Clean;
    if (s == "naive") return Variant::Naive;
    if (s == "adversarial") return Variant::Adversarial;
    throw std::invalid_argument("unknown variant: " + s);
}

/// One synthetic concept: an image-latent prototype plus the embedding
/// cluster centers its prompts are drawn around. NSFW concepts carry an
/// extra adversarial center that conditions the SAME image distribution as
/// the naive one — the surface form differs, the generative target does not.
struct ConceptSpec {
    int concept_id = 0;
    ConceptLabel label = ConceptLabel::Clean;
    std::string category_name;
    Vec image_prototype;
    double image_sigma = 0.1;
    Vec naive_center;
    std::optional<Vec> adversarial_center;
    double embed_sigma = 0.1;
};

struct World {
    int D = 0;
    int d_e = 0;
    std::vector<ConceptSpec> concepts;
};

struct PromptRecord {
    int prompt_id = 0;
    int concept_id = 0;
    Variant variant = Variant::Clean;
    Vec embedding;
    ConceptLabel label = ConceptLabel::Clean;
};

struct TrainingPair {
    PromptRecord prompt;
    Latent x0;
};

namespace detail {

inline double dist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return std::sqrt(s);
}

template <typename Pred>
Vec draw_separated(Rng& rng, int dim, const std::vector<Vec>& existing, double separation,
                   int max_tries, Pred extra_ok) {
    for (int attempt = 0; attempt < max_tries; ++attempt) {
        Vec c = rng.gaussian_vec(dim);
        bool ok = true;
        for (const auto& o : existing)
            if (dist(c, o) < separation) { ok = false; break; }
        if (ok && extra_ok(c)) return c;
    }
    throw std::runtime_error("build_world: could not place a center at the requested "
                             "separation after bounded retries");
}

inline std::string category_name(ConceptLabel label, int index) {
    static const char* clean_names[] = {"bicycle", "boat", "train"};
    static const char* nsfw_names[] = {"bloody", "nudity", "shooting"};
    if (label == ConceptLabel::Clean)
        return index < 3 ? clean_names[index] : "clean-" + std::to_string(index + 1);
    return index < 3 ? nsfw_names[index] : "nsfw-" + std::to_string(index + 1);
}

}  // namespace detail

/// Builds the synthetic prompt/image universe. Adversarial centers keep the
/// stated separation from every other center and sit nearer the clean
/// cluster region than any naive center (a surface-benign evasion analog),
/// while conditioning the same image prototype as their naive sibling.
inline World build_world(int n_clean, int n_nsfw, int D, int d_e, std::uint64_t seed,
                         double separation, double image_sigma = 0.1,
                         double embed_sigma = 0.1) {
    if (n_clean < 1 || n_nsfw < 1)
        throw std::invalid_argument("build_world: concept counts must be >= 1");
    if (D < 2 || d_e < 2) throw std::invalid_argument("build_world: D and d_e must be >= 2");
    if (separation <= 0.0) throw std::invalid_argument("build_world: separation must be > 0");

    constexpr int kMaxTries = 20000;
    Rng rng(seed);
    const int n_total = n_clean + n_nsfw;

    std::vector<Vec> prototypes;
    for (int i = 0; i < n_total; ++i)
        prototypes.push_back(detail::draw_separated(rng, D, prototypes, separation, kMaxTries,
                                                    [](const Vec&) { return true; }));

    std::vector<Vec> centers;  // n_clean clean, then n_nsfw naive
    for (int i = 0; i < n_total; ++i)
        centers.push_back(detail::draw_separated(rng, d_e, centers, separation, kMaxTries,
                                                 [](const Vec&) { return true; }));

    std::vector<Vec> adv_centers;
    for (int i = 0; i < n_nsfw; ++i) {
        auto benign_adjacent = [&](const Vec& c) {
            double d_clean = 1e300, d_naive = 1e300;
            for (int k = 0; k < n_clean; ++k)
                d_clean = std::min(d_clean, detail::dist(c, centers[static_cast<std::size_t>(k)]));
            for (int k = 0; k < n_nsfw; ++k)
                d_naive = std::min(d_naive,
                                   detail::dist(c, centers[static_cast<std::size_t>(n_clean + k)]));
            return d_clean + 1.0 <= d_naive;
        };
        std::vector<Vec> all = centers;
        all.insert(all.end(), adv_centers.begin(), adv_centers.end());
        adv_centers.push_back(
            detail::draw_separated(rng, d_e, all, separation, kMaxTries, benign_adjacent));
    }

    World w;
    w.D = D;
    w.d_e = d_e;
    for (int i = 0; i < n_total; ++i) {
        ConceptSpec c;
        c.concept_id = i;
        c.label = i < n_clean ? ConceptLabel::Clean : ConceptLabel::Nsfw;
        const int within = i < n_clean ? i : i - n_clean;
        c.category_name = detail::category_name(c.label, within);
        c.image_prototype = prototypes[static_cast<std::size_t>(i)];
        c.image_sigma = image_sigma;
        c.naive_center = centers[static_cast<std::size_t>(i)];
        if (c.label == ConceptLabel::Nsfw)
            c.adversarial_center = adv_centers[static_cast<std::size_t>(within)];
        c.embed_sigma = embed_sigma;
        w.concepts.push_back(std::move(c));
    }
    return w;
}

inline const ConceptSpec& find_concept(const World& w, int concept_id) {
    for (const auto& c : w.concepts)
        if (c.concept_id == concept_id) return c;
    throw std::invalid_argument("unknown concept_id: " + std::to_string(concept_id));
}

inline std::vector<Variant> valid_variants(const ConceptSpec& c) {
    if (c.label == ConceptLabel::Clean) return {Variant::Clean};
    return {Variant::Naive, Variant::Adversarial};
}

/// embedding = chosen center + Gaussian(0, embed_sigma^2 I) jitter.
inline PromptRecord sample_prompt(const World& w, int concept_id, Variant variant, Rng& rng) {
    const ConceptSpec& c = find_concept(w, concept_id);
    if (c.label == ConceptLabel::Clean && variant != Variant::Clean)
        throw std::invalid_argument("sample_prompt: clean concepts only yield the clean variant");
    if (c.label == ConceptLabel::Nsfw && variant == Variant::Clean)
        throw std::invalid_argument("sample_prompt: nsfw concepts yield naive or adversarial");

    const Vec& center =
        variant == Variant::Adversarial ? *c.adversarial_center : c.naive_center;
    PromptRecord p;
    p.concept_id = concept_id;
    p.variant = variant;
    p.label = c.label;
    p.embedding.resize(center.size());
    for (std::size_t i = 0; i < center.size(); ++i)
        p.embedding[i] = center[i] + c.embed_sigma * rng.gaussian();
    return p;
}

/// x0 = image_prototype + Gaussian(0, image_sigma^2 I).
inline TrainingPair sample_pair(const World& w, const PromptRecord& prompt, Rng& rng) {
    const ConceptSpec& c = find_concept(w, prompt.concept_id);
    TrainingPair tp;
    tp.prompt = prompt;
    tp.x0.values.resize(c.image_prototype.size());
    for (std::size_t i = 0; i < c.image_prototype.size(); ++i)
        tp.x0.values[i] = c.image_prototype[i] + c.image_sigma * rng.gaussian();
    return tp;
}

/// Deterministic balanced dataset: n pairs per valid (concept, variant).
inline std::vector<TrainingPair> build_dataset(const World& w, int n_per_variant_per_concept,
                                               std::uint64_t seed) {
    if (n_per_variant_per_concept < 1)
        throw std::invalid_argument("build_dataset: n must be >= 1");
    Rng rng(seed);
    std::vector<TrainingPair> out;
    int next_id = 0;
    for (const auto& c : w.concepts) {
        for (Variant v : valid_variants(c)) {
            for (int i = 0; i < n_per_variant_per_concept; ++i) {
                PromptRecord p = sample_prompt(w, c.concept_id, v, rng);
                p.prompt_id = next_id++;
                out.push_back(sample_pair(w, p, rng));
            }
        }
    }
    return out;
}

// ---- persistence ---------------------------------------------------------

inline nlohmann::json world_to_json(const World& w) {
    nlohmann::json j;
    j["format_version"] = kWorldFormatVersion;
    j["D"] = w.D;
    j["d_e"] = w.d_e;
    auto arr = nlohmann::json::array();
    for (const auto& c : w.concepts) {
        nlohmann::json jc;
        jc["concept_id"] = c.concept_id;
        jc["label"] = c.label == ConceptLabel::Clean ? "clean" : "nsfw";
        jc["category_name"] = c.category_name;
        jc["image_prototype"] = c.image_prototype;
        jc["image_sigma"] = c.image_sigma;
        jc["naive_center"] = c.naive_center;
        if (c.adversarial_center)
            jc["adversarial_center"] = *c.adversarial_center;
        else
            jc["adversarial_center"] = nullptr;
        jc["embed_sigma"] = c.embed_sigma;
        arr.push_back(std::move(jc));
    }
    j["concepts"] = std::move(arr);
    return j;
}

inline World world_from_json(const nlohmann::json& j) {
    if (!j.contains("format_version") || j.at("format_version").get<int>() != kWorldFormatVersion)
        throw std::runtime_error("world file: unknown format_version");
    World w;
    w.D = j.at("D").get<int>();
    w.d_e = j.at("d_e").get<int>();
    for (const auto& jc : j.at("concepts")) {
        ConceptSpec c;
        c.concept_id = jc.at("concept_id").get<int>();
        c.label = jc.at("label").get<std::string>() == "nsfw" ? ConceptLabel::Nsfw
                                                              : ConceptLabel::Clean;
        c.category_name = jc.at("category_name").get<std::string>();
        c.image_prototype = jc.at("image_prototype").get<Vec>();
        c.image_sigma = jc.at("image_sigma").get<double>();
        c.naive_center = jc.at("naive_center").get<Vec>();
        if (!jc.at("adversarial_center").is_null())
            c.adversarial_center = jc.at("adversarial_center").get<Vec>();
        c.embed_sigma = jc.at("embed_sigma").get<double>();
        w.concepts.push_back(std::move(c));
    }
    return w;
}

/// Newline-delimited JSON, one TrainingPair per line, after a header line.
inline void write_dataset(const std::vector<TrainingPair>& pairs, int D, int d_e,
                          const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    nlohmann::json header;
    header["format_version"] = kDatasetFormatVersion;
    header["D"] = D;
    header["d_e"] = d_e;
    out << header.dump() << "\n";
    for (const auto& tp : pairs) {
        nlohmann::json j;
        j["prompt_id"] = tp.prompt.prompt_id;
        j["concept_id"] = tp.prompt.concept_id;
        j["variant"] = to_string(tp.prompt.variant);
        j["label"] = tp.prompt.label == ConceptLabel::Clean ? "clean" : "nsfw";
        j["embedding"] = tp.prompt.embedding;
        j["x0"] = tp.x0.values;
        out << j.dump() << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

struct Dataset {
    int D = 0;
    int d_e = 0;
    std::vector<TrainingPair> pairs;
};

inline Dataset read_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset file empty: " + path);
    Dataset ds;
    try {
        auto header = nlohmann::json::parse(line);
        if (header.at("format_version").get<int>() != kDatasetFormatVersion)
            throw std::runtime_error("dataset file: unknown format_version");
        ds.D = header.at("D").get<int>();
        ds.d_e = header.at("d_e").get<int>();
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            auto j = nlohmann::json::parse(line);
            TrainingPair tp;
            tp.prompt.prompt_id = j.at("prompt_id").get<int>();
            tp.prompt.concept_id = j.at("concept_id").get<int>();
            tp.prompt.variant = variant_from_string(j.at("variant").get<std::string>());
            tp.prompt.label = j.at("label").get<std::string>() == "nsfw" ? ConceptLabel::Nsfw
                                                                         : ConceptLabel::Clean;
            tp.prompt.embedding = j.at("embedding").get<Vec>();
            tp.x0.values = j.at("x0").get<Vec>();
            ds.pairs.push_back(std::move(tp));
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed dataset line in " + path + ": " + e.what());
    }
    return ds;
}

}  // namespace igd
