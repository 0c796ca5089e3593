#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>

#include "igd/synthworld.hpp"

using namespace igd;

namespace {

double dist(const Vec& a, const Vec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("build_world structure") {
    const World w = build_world(1, 1, 4, 4, 11, 2.0);
    REQUIRE(w.concepts.size() == 2);
    REQUIRE(w.concepts[0].label == ConceptLabel::Clean);
    REQUIRE_FALSE(w.concepts[0].adversarial_center.has_value());
    REQUIRE(w.concepts[1].label == ConceptLabel::Nsfw);
    REQUIRE(w.concepts[1].adversarial_center.has_value());
    REQUIRE(w.concepts[0].image_prototype.size() == 4);
    REQUIRE(w.concepts[0].naive_center.size() == 4);
}

TEST_CASE("build_world determinism and separation") {
    const World a = build_world(3, 3, 16, 8, 101, 2.0);
    const World b = build_world(3, 3, 16, 8, 101, 2.0);
    REQUIRE(a.concepts.size() == b.concepts.size());
    for (std::size_t i = 0; i < a.concepts.size(); ++i) {
        REQUIRE(a.concepts[i].image_prototype == b.concepts[i].image_prototype);
        REQUIRE(a.concepts[i].naive_center == b.concepts[i].naive_center);
    }

    // exhaustive pairwise scan over every embedding center and prototype
    std::vector<Vec> centers, protos, naive, adv;
    for (const auto& c : a.concepts) {
        centers.push_back(c.naive_center);
        protos.push_back(c.image_prototype);
        if (c.label == ConceptLabel::Nsfw) {
            naive.push_back(c.naive_center);
            adv.push_back(*c.adversarial_center);
            centers.push_back(*c.adversarial_center);
        }
    }
    auto check_all = [](const std::vector<Vec>& v) {
        for (std::size_t i = 0; i < v.size(); ++i)
            for (std::size_t j = i + 1; j < v.size(); ++j) REQUIRE(dist(v[i], v[j]) >= 2.0);
    };
    check_all(centers);
    check_all(protos);
    std::vector<Vec> na = naive;
    na.insert(na.end(), adv.begin(), adv.end());
    check_all(na);

    // adversarial centers sit nearer the clean cluster region than any naive
    for (const auto& av : adv) {
        double d_clean = 1e300, d_naive = 1e300;
        for (const auto& c : a.concepts) {
            if (c.label == ConceptLabel::Clean)
                d_clean = std::min(d_clean, dist(av, c.naive_center));
            else
                d_naive = std::min(d_naive, dist(av, c.naive_center));
        }
        REQUIRE(d_clean + 1.0 <= d_naive + 1e-12);
    }
}

TEST_CASE("build_world rejects infeasible separation") {
    REQUIRE_THROWS_AS(build_world(3, 3, 2, 2, 1, 1000.0), std::runtime_error);
    REQUIRE_THROWS_AS(build_world(0, 1, 4, 4, 1, 2.0), std::invalid_argument);
    REQUIRE_THROWS_AS(build_world(1, 1, 1, 4, 1, 2.0), std::invalid_argument);
}

TEST_CASE("sample_prompt") {
    SECTION("zero embed_sigma lands on the center") {
        const World w = build_world(1, 1, 4, 4, 3, 2.0, 0.1, 0.0);
        Rng rng(5);
        const auto p = sample_prompt(w, 1, Variant::Adversarial, rng);
        REQUIRE(p.embedding == *w.concepts[1].adversarial_center);
        REQUIRE(p.label == ConceptLabel::Nsfw);
    }
    SECTION("same stream position gives identical draws") {
        const World w = build_world(1, 1, 4, 4, 3, 2.0);
        Rng r1(9), r2(9);
        const auto a = sample_prompt(w, 1, Variant::Naive, r1);
        const auto b = sample_prompt(w, 1, Variant::Naive, r2);
        REQUIRE(a.embedding == b.embedding);
    }
    SECTION("variant validity") {
        const World w = build_world(1, 1, 4, 4, 3, 2.0);
        Rng rng(1);
        REQUIRE_THROWS_AS(sample_prompt(w, 0, Variant::Adversarial, rng), std::invalid_argument);
        REQUIRE_THROWS_AS(sample_prompt(w, 0, Variant::Naive, rng), std::invalid_argument);
        REQUIRE_THROWS_AS(sample_prompt(w, 1, Variant::Clean, rng), std::invalid_argument);
        REQUIRE_THROWS_AS(sample_prompt(w, 7, Variant::Clean, rng), std::invalid_argument);
    }
    SECTION("draws concentrate on the center (CLT bound)") {
        const World w = build_world(1, 1, 4, 4, 3, 2.0, 0.1, 0.1);
        Rng rng(17);
        const int N = 10000;
        Vec mean(4, 0.0);
        for (int i = 0; i < N; ++i) {
            const auto p = sample_prompt(w, 1, Variant::Naive, rng);
            for (int d = 0; d < 4; ++d) mean[d] += p.embedding[d];
        }
        for (int d = 0; d < 4; ++d)
            REQUIRE(std::abs(mean[d] / N - w.concepts[1].naive_center[d]) < 4.0 * 0.1 / 100.0);
    }
}

TEST_CASE("sample_pair") {
    const World w = build_world(1, 1, 6, 4, 3, 2.0, 0.0, 0.1);  // image_sigma = 0
    Rng rng(2);
    const auto naive = sample_prompt(w, 1, Variant::Naive, rng);
    const auto adv = sample_prompt(w, 1, Variant::Adversarial, rng);
    SECTION("zero image_sigma lands on the prototype; variants share it") {
        Rng r(3);
        const auto a = sample_pair(w, naive, r);
        const auto b = sample_pair(w, adv, r);
        REQUIRE(a.x0.values == w.concepts[1].image_prototype);
        REQUIRE(b.x0.values == w.concepts[1].image_prototype);
    }
    SECTION("unknown concept") {
        PromptRecord bogus = naive;
        bogus.concept_id = 12;
        Rng r(3);
        REQUIRE_THROWS_AS(sample_pair(w, bogus, r), std::invalid_argument);
    }
    SECTION("draws concentrate on the prototype (CLT bound)") {
        const World w2 = build_world(1, 1, 4, 4, 3, 2.0, 0.1, 0.1);
        Rng r(19);
        const auto p = sample_prompt(w2, 1, Variant::Naive, r);
        const int N = 10000;
        Vec mean(4, 0.0);
        for (int i = 0; i < N; ++i) {
            const auto tp = sample_pair(w2, p, r);
            for (int d = 0; d < 4; ++d) mean[d] += tp.x0.values[d];
        }
        for (int d = 0; d < 4; ++d)
            REQUIRE(std::abs(mean[d] / N - w2.concepts[1].image_prototype[d]) <
                    4.0 * 0.1 / 100.0);
    }
}

TEST_CASE("build_dataset") {
    const World w = build_world(1, 1, 4, 4, 3, 2.0);
    SECTION("structural counts and balance") {
        const auto ds = build_dataset(w, 5, 7);
        // 1 clean group + naive + adversarial for the nsfw concept
        REQUIRE(ds.size() == 15);
        int clean = 0, naive = 0, adv = 0;
        for (const auto& tp : ds) {
            if (tp.prompt.variant == Variant::Clean) ++clean;
            if (tp.prompt.variant == Variant::Naive) ++naive;
            if (tp.prompt.variant == Variant::Adversarial) ++adv;
        }
        REQUIRE(clean == 5);
        REQUIRE(naive == 5);
        REQUIRE(adv == 5);
        for (std::size_t i = 0; i < ds.size(); ++i)
            REQUIRE(ds[i].prompt.prompt_id == static_cast<int>(i));
    }
    SECTION("same seed gives a byte-identical file") {
        const auto ds = build_dataset(w, 4, 9);
        const std::string p1 = "ds_a.ndjson", p2 = "ds_b.ndjson";
        write_dataset(ds, w.D, w.d_e, p1);
        write_dataset(build_dataset(w, 4, 9), w.D, w.d_e, p2);
        REQUIRE(slurp(p1) == slurp(p2));

        const Dataset back = read_dataset(p1);
        REQUIRE(back.D == w.D);
        REQUIRE(back.pairs.size() == ds.size());
        for (std::size_t i = 0; i < ds.size(); ++i) {
            REQUIRE(back.pairs[i].prompt.embedding == ds[i].prompt.embedding);
            REQUIRE(back.pairs[i].x0.values == ds[i].x0.values);
            REQUIRE(back.pairs[i].prompt.variant == ds[i].prompt.variant);
        }
        std::remove(p1.c_str());
        std::remove(p2.c_str());
    }
    SECTION("rejects n < 1") {
        REQUIRE_THROWS_AS(build_dataset(w, 0, 1), std::invalid_argument);
    }
}

TEST_CASE("world json round trip") {
    const World w = build_world(2, 2, 6, 4, 21, 2.0);
    const World back = world_from_json(world_to_json(w));
    REQUIRE(back.D == w.D);
    REQUIRE(back.concepts.size() == w.concepts.size());
    for (std::size_t i = 0; i < w.concepts.size(); ++i) {
        REQUIRE(back.concepts[i].image_prototype == w.concepts[i].image_prototype);
        REQUIRE(back.concepts[i].naive_center == w.concepts[i].naive_center);
        REQUIRE(back.concepts[i].adversarial_center == w.concepts[i].adversarial_center);
        REQUIRE(back.concepts[i].category_name == w.concepts[i].category_name);
    }
    nlohmann::json bad = world_to_json(w);
    bad["format_version"] = 99;
    REQUIRE_THROWS_AS(world_from_json(bad), std::runtime_error);
}
