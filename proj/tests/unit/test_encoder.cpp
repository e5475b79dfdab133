#include <cmath>

#include <doctest.h>

#include "etr/encoder.hpp"
#include "etr/error.hpp"
#include "test_support.hpp"

using namespace etr;
using namespace etr::testing;

namespace {

EncoderConfig small_config(std::uint32_t epochs) {
    EncoderConfig cfg;
    cfg.d_s = 16;
    cfg.hidden = 16;
    cfg.epochs = epochs;
    cfg.learning_rate = 0.05;
    cfg.seed = 11;
    cfg.history_horizon = 10;
    return cfg;
}

constexpr std::array<ProxyModel::Layer, 6> kLayers{ProxyModel::Layer::Entity,     ProxyModel::Layer::Relation,
                                                   ProxyModel::Layer::Hidden,     ProxyModel::Layer::HiddenBias,
                                                   ProxyModel::Layer::Output,     ProxyModel::Layer::OutputBias};

}  // namespace

TEST_CASE("seeded table draws from the documented generator") {
    // First output of mt19937_64 under its default seed 5489.
    const std::uint64_t first = 14514284786278117030ULL;
    const double a = 1.0 / std::sqrt(4.0);
    const double expected = -a + 2 * a * (static_cast<double>(first >> 11) * 0x1.0p-53);
    const auto tab = EmbeddingTable::seeded(4, 3, 2, 5489);
    CHECK(lookup(tab, TableKind::Entity, 0)[0] == static_cast<float>(expected));
    for (std::uint32_t e = 0; e < 3; ++e) {
        for (float v : lookup(tab, TableKind::Entity, e)) CHECK(std::abs(v) <= a);
    }
    CHECK(tab == EmbeddingTable::seeded(4, 3, 2, 5489));
    CHECK_FALSE(tab == EmbeddingTable::seeded(4, 3, 2, 5490));
    CHECK_THROWS_AS(lookup(tab, TableKind::Entity, 3), ReferenceError);
    CHECK_THROWS_AS(lookup(tab, TableKind::Relation, 2), ReferenceError);
    CHECK(lookup(tab, TableKind::Relation, 1).size() == 4);
}

TEST_CASE("embedding file round trip") {
    const auto tab = EmbeddingTable::seeded(5, 7, 3, 2);
    TempDir dir;
    save_embeddings(tab, dir / "e.etre");
    CHECK(load_embeddings(dir / "e.etre") == tab);
    CHECK(read_file(dir / "e.etre").substr(0, 4) == "ETRE");
    write_file(dir / "bad.etre", "ETRE\x01");
    CHECK_THROWS(load_embeddings(dir / "bad.etre"));
}

TEST_CASE("frequency features count the history window") {
    const auto g = make_graph(3, 2, {{0, 0, 1, 1}, {0, 0, 1, 2}, {0, 1, 1, 3}, {0, 1, 2, 4}, {0, 0, 1, 9}});
    const auto f = frequency_features(g, {0, 0, 1, 5}, 4);
    // Window [1, 5).
    CHECK(f[0] == doctest::Approx(std::log1p(2.0)));  // (s,r,o) at 1, 2
    CHECK(f[1] == doctest::Approx(std::log1p(3.0)));  // (s,*,o) at 1, 2, 3
    CHECK(f[2] == doctest::Approx(std::log1p(2.0)));  // (s,r,*) at 1, 2
    CHECK(f[3] == doctest::Approx(std::log1p(4.0)));  // (s,*,*) at 1, 2, 3, 4
    CHECK(frequency_features(g, {0, 0, 1, 0}, 4) == std::array<double, 4>{});
}

TEST_CASE("proxy examples are balanced and corruptions are never facts") {
    const auto g = planted_pattern_tkg(30);
    auto cfg = small_config(1);
    cfg.train_max_time = 19;
    const auto ex = build_proxy_examples(g, cfg);
    std::array<std::size_t, 3> per{};
    for (const auto& e : ex) {
        ++per[e.label];
        CHECK(e.fact.time <= 19);
        CHECK(contains_fact(g, e.fact) == (e.label == 0));
    }
    CHECK(per[0] == 400);
    CHECK(per[1] == per[0]);
    CHECK(per[2] == per[0]);
}

TEST_CASE("analytic gradients match finite differences") {
    const auto g = planted_pattern_tkg(20);
    auto cfg = small_config(1);
    cfg.d_s = 4;
    cfg.hidden = 5;
    const auto ex = build_proxy_examples(g, cfg);
    ProxyModel model(EmbeddingTable::seeded(4, 20, 4, 3), 5, 9);
    for (std::size_t k : {0u, 401u, 777u}) {
        const auto& e = ex[k % ex.size()];
        std::array<std::vector<double>, 6> grad;
        model.loss_and_gradient(e, grad);
        for (std::size_t li = 0; li < kLayers.size(); ++li) {
            auto params = model.parameters(kLayers[li]);
            REQUIRE(grad[li].size() == params.size());
            // Ten parameters per layer, including those the example touches.
            std::vector<std::size_t> picks;
            for (std::size_t i = 0; i < params.size() && picks.size() < 10; ++i) {
                if (grad[li][i] != 0.0 || i % 7 == 0) picks.push_back(i);
            }
            for (std::size_t i : picks) {
                const double saved = params[i];
                const double h = 1e-5;
                params[i] = saved + h;
                const double up = model.loss(e);
                params[i] = saved - h;
                const double down = model.loss(e);
                params[i] = saved;
                const double numeric = (up - down) / (2 * h);
                CAPTURE(li);
                CAPTURE(i);
                CHECK(std::abs(numeric - grad[li][i]) <= 1e-4 * std::max(1.0, std::abs(numeric)));
            }
        }
    }
}

TEST_CASE("sgd step lowers the loss of its example") {
    const auto g = planted_pattern_tkg(20);
    const auto ex = build_proxy_examples(g, small_config(1));
    ProxyModel model(EmbeddingTable::seeded(16, 20, 4, 3), 8, 9);
    const auto before = model.loss(ex[5]);
    CHECK(model.sgd_step(ex[5], 0.01) == doctest::Approx(before));
    CHECK(model.loss(ex[5]) < before);
}

TEST_CASE("planted pattern is learned") {
    const auto g = planted_pattern_tkg();
    const auto res = train_encoder(g, small_config(50));
    CHECK(res.holdout_accuracy >= 0.9);
    CHECK(res.table.all_finite());
    REQUIRE(res.epoch_loss.size() == 50);
    CHECK(res.holdout_loss.size() == 50);
    std::size_t rises = 0;
    for (std::size_t i = 1; i < res.epoch_loss.size(); ++i) rises += res.epoch_loss[i] > res.epoch_loss[i - 1];
    CHECK(rises <= 2);
    CHECK(res.epoch_loss.back() < res.epoch_loss.front());
    CHECK(res.train_examples + res.holdout_examples == build_proxy_examples(g, small_config(50)).size());
}

TEST_CASE("zero epochs returns the seeded initialization") {
    const auto g = planted_pattern_tkg(20);
    auto cfg = small_config(0);
    const auto res = train_encoder(g, cfg);
    CHECK(res.table == EmbeddingTable::seeded(cfg.d_s, 20, 4, cfg.seed));
    CHECK(res.epoch_loss.empty());
}

TEST_CASE("training is deterministic and resumable") {
    const auto g = planted_pattern_tkg(20);
    const auto a = train_encoder(g, small_config(3));
    const auto b = train_encoder(g, small_config(3));
    CHECK(a.table == b.table);
    CHECK(a.epoch_loss == b.epoch_loss);

    const auto resumed = train_encoder(g, small_config(2), &a.table);
    CHECK(resumed.table.all_finite());
    CHECK_FALSE(resumed.table == a.table);
    const auto wrong = EmbeddingTable::seeded(8, 20, 4, 1);
    CHECK_THROWS_AS(train_encoder(g, small_config(1), &wrong), ConfigError);
    const auto wrong_vocab = EmbeddingTable::seeded(16, 19, 4, 1);
    CHECK_THROWS_AS(train_encoder(g, small_config(1), &wrong_vocab), ConfigError);
}

TEST_CASE("invalid configurations") {
    auto cfg = small_config(1);
    cfg.d_s = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config(1);
    cfg.learning_rate = -1;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config(1);
    cfg.holdout_fraction = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = small_config(1);
    cfg.lr_decay = -0.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);

    auto poisoned = EmbeddingTable::seeded(16, 20, 4, 1);
    for (std::uint32_t e = 0; e < 20; ++e) poisoned.mutable_row(TableKind::Entity, e)[0] = INFINITY;
    try {
        train_encoder(planted_pattern_tkg(20), small_config(3), &poisoned);
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch() == 1);
    }
}
