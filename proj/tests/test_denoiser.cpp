#include <catch2/catch_amalgamated.hpp>

#include "igd/denoiser.hpp"

using namespace igd;

TEST_CASE("embed_time") {
    SECTION("t = 0 gives zero sines, unit cosines") {
        const auto e = embed_time(0, 1000, 8);
        for (int k = 0; k < 4; ++k) {
            REQUIRE(e.values[2 * k] == 0.0);
            REQUIRE(e.values[2 * k + 1] == 1.0);
        }
    }
    SECTION("bounded in [-1, 1]") {
        for (int t : {1, 17, 499, 999}) {
            const auto e = embed_time(t, 1000, 8);
            for (double v : e.values) {
                REQUIRE(v >= -1.0);
                REQUIRE(v <= 1.0);
            }
        }
    }
    SECTION("direct evaluation at t = 1, d_t = 2") {
        const auto e = embed_time(1, 1000, 2);
        REQUIRE(e.values[0] == Catch::Approx(0.8414709848078965).epsilon(1e-12));
        REQUIRE(e.values[1] == Catch::Approx(0.5403023058681398).epsilon(1e-12));
    }
    SECTION("errors") {
        REQUIRE_THROWS_AS(embed_time(1000, 1000, 8), std::invalid_argument);
        REQUIRE_THROWS_AS(embed_time(-1, 1000, 8), std::invalid_argument);
        REQUIRE_THROWS_AS(embed_time(1, 1000, 7), std::invalid_argument);
    }
}

namespace {

DenoiserParams zero_denoiser(int D, int d_e, int d_t) {
    DenoiserParams dp;
    dp.D = D;
    dp.d_e = d_e;
    dp.d_t = d_t;
    dp.net.layer_dims = {D + d_t + d_e, 8, D};
    dp.net.weights = {Matrix(8, D + d_t + d_e), Matrix(D, 8)};
    dp.net.biases = {Vec(8, 0.0), Vec(static_cast<std::size_t>(D), 0.0)};
    return dp;
}

std::vector<TrainingPair> tiny_dataset(int D, int d_e, int n, std::uint64_t seed) {
    const World w = build_world(1, 1, D, d_e, seed, 1.0);
    return build_dataset(w, n, seed + 1);
}

}  // namespace

TEST_CASE("predict_noise") {
    const auto sched = build_schedule(100, 1e-3, 0.05);
    SECTION("zero net predicts zero noise") {
        const auto dp = zero_denoiser(4, 3, 4);
        const Latent x{{1.0, -2.0, 0.5, 0.1}};
        const auto out = predict_noise(dp, x, 42, sched, {0.3, 0.2, -0.1});
        REQUIRE(out.values == Vec(4, 0.0));
    }
    SECTION("pure function of its inputs") {
        DenoiserParams dp = zero_denoiser(4, 3, 4);
        dp.net = init_params(dp.net.layer_dims, 5);
        const Latent x{{1.0, -2.0, 0.5, 0.1}};
        const Vec c{0.3, 0.2, -0.1};
        REQUIRE(predict_noise(dp, x, 7, sched, c).values ==
                predict_noise(dp, x, 7, sched, c).values);
    }
    SECTION("dimension and range errors") {
        const auto dp = zero_denoiser(4, 3, 4);
        const Latent x{{1.0, -2.0, 0.5, 0.1}};
        REQUIRE_THROWS_AS(predict_noise(dp, x, 7, sched, {0.3}), std::invalid_argument);
        const Latent bad{{1.0}};
        REQUIRE_THROWS_AS(predict_noise(dp, bad, 7, sched, {0.3, 0.2, -0.1}),
                          std::invalid_argument);
        REQUIRE_THROWS_AS(predict_noise(dp, x, 100, sched, {0.3, 0.2, -0.1}),
                          std::invalid_argument);
    }
}

TEST_CASE("train_denoiser") {
    const auto sched = build_schedule(50, 1e-3, 0.05);
    const auto data = tiny_dataset(4, 3, 20, 31);

    SECTION("zero steps returns the initialization") {
        DenoiserTrainConfig cfg;
        cfg.steps = 0;
        cfg.hidden_dims = {8};
        const auto res = train_denoiser(data, sched, cfg, 77);
        const auto init = init_params({4 + cfg.d_t + 3, 8, 4}, derive_seed(77, 0));
        REQUIRE(res.params.net.weights[0].data == init.weights[0].data);
        REQUIRE(res.loss_trace.empty());
    }
    SECTION("loss decreases over a short run") {
        DenoiserTrainConfig cfg;
        cfg.steps = 600;
        cfg.hidden_dims = {16};
        const auto res = train_denoiser(data, sched, cfg, 77);
        REQUIRE(res.loss_trace.size() == 600);
        double head = 0.0, tail = 0.0;
        for (int i = 0; i < 100; ++i) {
            head += res.loss_trace[i];
            tail += res.loss_trace[res.loss_trace.size() - 100 + i];
        }
        REQUIRE(tail / 100.0 < head / 100.0);
    }
    SECTION("unconditional mode (all-zero embeddings) trains") {
        auto uncond = data;
        for (auto& tp : uncond) tp.prompt.embedding.assign(3, 0.0);
        DenoiserTrainConfig cfg;
        cfg.steps = 50;
        cfg.hidden_dims = {8};
        REQUIRE_NOTHROW(train_denoiser(uncond, sched, cfg, 5));
    }
    SECTION("determinism: same seed, same parameters") {
        DenoiserTrainConfig cfg;
        cfg.steps = 120;
        cfg.hidden_dims = {8};
        const auto a = train_denoiser(data, sched, cfg, 9);
        const auto b = train_denoiser(data, sched, cfg, 9);
        for (std::size_t l = 0; l < a.params.net.weights.size(); ++l)
            REQUIRE(a.params.net.weights[l].data == b.params.net.weights[l].data);
    }
    SECTION("divergence aborts with a diagnostic") {
        DenoiserTrainConfig cfg;
        cfg.steps = 4000;
        cfg.hidden_dims = {8};
        cfg.lr = 1e18;
        REQUIRE_THROWS_AS(train_denoiser(data, sched, cfg, 5), std::runtime_error);
    }
    SECTION("empty dataset rejected") {
        REQUIRE_THROWS_AS(train_denoiser({}, sched, DenoiserTrainConfig{}, 1),
                          std::invalid_argument);
    }
}

TEST_CASE("denoiser checkpoint round trip") {
    const auto sched = build_schedule(50, 1e-3, 0.05);
    const auto data = tiny_dataset(4, 3, 8, 13);
    DenoiserTrainConfig cfg;
    cfg.steps = 30;
    cfg.hidden_dims = {8};
    const auto res = train_denoiser(data, sched, cfg, 3);

    const auto j = denoiser_to_json(res.params, sched, 1e-3, 0.05);
    const auto back = denoiser_from_json(j);
    REQUIRE(back.params.D == 4);
    REQUIRE(back.params.d_e == 3);
    REQUIRE(back.schedule.T == 50);
    for (std::size_t l = 0; l < res.params.net.weights.size(); ++l)
        REQUIRE(back.params.net.weights[l].data == res.params.net.weights[l].data);

    nlohmann::json bad = j;
    bad["format_version"] = 2;
    REQUIRE_THROWS_AS(denoiser_from_json(bad), std::runtime_error);
}
