#include <cmath>

#include <doctest.h>

#include "etr/classifier.hpp"
#include "etr/error.hpp"
#include "etr/rng.hpp"
#include "test_support.hpp"

using namespace etr;
using namespace etr::testing;

namespace {

// Three clusters in R^6 with margin: class k is centered on 2 * unit vector k.
std::vector<LabeledVector> separable_vectors(std::size_t per_class, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<LabeledVector> out;
    for (std::size_t k = 0; k < 3; ++k) {
        for (std::size_t i = 0; i < per_class; ++i) {
            LabeledVector v;
            v.label = static_cast<Label>(k);
            for (std::size_t d = 0; d < 6; ++d) v.x.push_back(rng.uniform(-0.4, 0.4) + (d == k ? 2.0 : 0.0));
            out.push_back(std::move(v));
        }
    }
    return out;
}

double accuracy(const QueryClassifier& c, const std::vector<LabeledVector>& xs) {
    std::size_t ok = 0;
    for (const auto& v : xs) ok += decide(softmax(classifier_logits(c, v.x))) == v.label;
    return static_cast<double>(ok) / static_cast<double>(xs.size());
}

// d_s = 3 table whose object rows are one-hot class indicators, with a
// classifier that reads the object part.
std::pair<EmbeddingTable, QueryClassifier> indicator_model() {
    EmbeddingTable tab(3, 4, 1);
    for (std::uint32_t k = 0; k < 3; ++k) tab.mutable_row(TableKind::Entity, k + 1)[k] = 1.0f;
    auto c = QueryClassifier::zeros(3);
    for (std::size_t k = 0; k < 3; ++k) c.weights[k * 9 + 6 + k] = 5.0;
    return {tab, c};
}

LabeledQuery query_for(EntityId object, Label label) {
    LabeledQuery q;
    q.query = {0, 0, object, 1};
    q.label = label;
    return q;
}

}  // namespace

TEST_CASE("zero weights predict uniformly") {
    const auto tab = EmbeddingTable::seeded(4, 3, 2, 1);
    const auto p = predict(QueryClassifier::zeros(4), tab, {0, 1, 2, 0});
    for (double v : p) CHECK(v == doctest::Approx(1.0 / 3).epsilon(1e-15));
}

TEST_CASE("hand-set weights on d_s = 2") {
    EmbeddingTable tab(2, 2, 1);
    tab.mutable_row(TableKind::Entity, 0)[0] = 1.0f;
    tab.mutable_row(TableKind::Entity, 0)[1] = -1.0f;
    tab.mutable_row(TableKind::Relation, 0)[0] = 0.5f;
    tab.mutable_row(TableKind::Relation, 0)[1] = 2.0f;
    tab.mutable_row(TableKind::Entity, 1)[0] = 0.0f;
    tab.mutable_row(TableKind::Entity, 1)[1] = 3.0f;
    QueryClassifier c = QueryClassifier::zeros(2);
    c.weights = {1, 0, 0, 0, 0, 0,      // logit 1
                 0, 0, 2, 0, 0, 0,      // logit 1
                 0, 0, 0, 0, 0, 1.0};   // logit 3
    const auto p = predict(c, tab, {0, 0, 1, 0});
    const double z = 2 * std::exp(1.0) + std::exp(3.0);
    CHECK(p[0] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-14));
    CHECK(p[1] == doctest::Approx(std::exp(1.0) / z).epsilon(1e-14));
    CHECK(p[2] == doctest::Approx(std::exp(3.0) / z).epsilon(1e-14));
    CHECK_THROWS_AS(predict(c, tab, {0, 0, 2, 0}), ReferenceError);
}

TEST_CASE("softmax is shift invariant, positive, and normalized") {
    Rng rng(3);
    for (int k = 0; k < 500; ++k) {
        std::array<double, 3> z{rng.uniform(-800, 800), rng.uniform(-800, 800), rng.uniform(-800, 800)};
        const auto p = softmax(z);
        CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-9));
        const double shift = rng.uniform(-50, 50);
        const auto q = softmax({z[0] + shift, z[1] + shift, z[2] + shift});
        CHECK(decide(p) == decide(q));
        for (int i = 0; i < 3; ++i) {
            CHECK(p[i] >= 0.0);
            CHECK(q[i] == doctest::Approx(p[i]).epsilon(1e-9));
        }
    }
    const auto mild = softmax({0.3, -1.2, 2.0});
    for (double v : mild) CHECK(v > 0.0);
}

TEST_CASE("ties go to the lowest class index") {
    CHECK(decide({0.4, 0.4, 0.2}) == Label::Yes);
    CHECK(decide({0.2, 0.4, 0.4}) == Label::No);
    CHECK(decide({0.3, 0.3, 0.4}) == Label::Unsure);
    CHECK(decide({1.0 / 3, 1.0 / 3, 1.0 / 3}) == Label::Yes);
}

TEST_CASE("gradient matches finite differences") {
    auto xs = separable_vectors(10, 5);
    Rng rng(9);
    auto c = QueryClassifier::zeros(2);
    for (auto& w : c.weights) w = rng.uniform(-1, 1);
    std::vector<double> grad;
    classifier_loss(c, xs, &grad);
    REQUIRE(grad.size() == c.weights.size());
    for (int k = 0; k < 10; ++k) {
        const auto i = static_cast<std::size_t>(rng.below(c.weights.size()));
        const double saved = c.weights[i];
        const double h = 1e-6;
        c.weights[i] = saved + h;
        const double up = classifier_loss(c, xs);
        c.weights[i] = saved - h;
        const double down = classifier_loss(c, xs);
        c.weights[i] = saved;
        const double numeric = (up - down) / (2 * h);
        CHECK(std::abs(numeric - grad[i]) <= 1e-4 * std::max(std::abs(numeric), 1e-3));
    }
}

TEST_CASE("separable data is learned with decreasing loss") {
    const auto xs = separable_vectors(100, 1);
    ClassifierConfig cfg;
    cfg.epochs = 200;
    cfg.learning_rate = 0.1;
    cfg.batch_size = 16;
    cfg.seed = 2;
    const auto res = train_classifier(xs, 6, cfg);
    CHECK(accuracy(res.model, xs) >= 0.99);
    REQUIRE(res.epoch_loss.size() == 200);
    std::size_t rises = 0;
    for (std::size_t i = 1; i < res.epoch_loss.size(); ++i) rises += res.epoch_loss[i] > res.epoch_loss[i - 1];
    CHECK(rises <= 2);

    const auto again = train_classifier(xs, 6, cfg);
    CHECK(again.model.weights == res.model.weights);
    CHECK(again.epoch_loss == res.epoch_loss);
}

TEST_CASE("zero learning rate leaves the weights at zero") {
    ClassifierConfig cfg;
    cfg.epochs = 5;
    cfg.learning_rate = 0.0;
    const auto res = train_classifier(separable_vectors(5, 1), 6, cfg);
    CHECK(res.model.weights == QueryClassifier::zeros(2).weights);
}

TEST_CASE("training argument errors and divergence") {
    ClassifierConfig cfg;
    cfg.epochs = 2;
    cfg.batch_size = 0;
    CHECK_THROWS_AS(train_classifier(separable_vectors(2, 1), 6, cfg), ConfigError);
    cfg.batch_size = 4;
    cfg.learning_rate = -1;
    CHECK_THROWS_AS(train_classifier(separable_vectors(2, 1), 6, cfg), ConfigError);
    cfg.learning_rate = 0.1;
    CHECK_THROWS_AS(train_classifier(separable_vectors(2, 1), 9, cfg), ConfigError);
    auto poisoned = separable_vectors(2, 1);
    poisoned[3].x[0] = NAN;
    CHECK_THROWS_AS(train_classifier(poisoned, 6, cfg), DivergenceError);
}

TEST_CASE("evaluation from instances") {
    const auto [tab, c] = indicator_model();
    std::vector<LabeledQuery> test;
    for (int i = 0; i < 4; ++i) {
        test.push_back(query_for(1, Label::Yes));
        test.push_back(query_for(2, Label::No));
        test.push_back(query_for(3, Label::Unsure));
    }
    const auto perfect = evaluate_classifier(c, tab, test);
    for (const auto& m : perfect.per_class) CHECK(m.f1 == doctest::Approx(100.0));
    CHECK(perfect.overall_f1 == doctest::Approx(100.0));

    // Unsure absent from both gold and predictions.
    std::vector<LabeledQuery> two{query_for(1, Label::Yes), query_for(2, Label::No), query_for(2, Label::No)};
    const auto r = evaluate_classifier(c, tab, two);
    CHECK(r.per_class[2].f1 == 0.0);
    CHECK(r.per_class[2].support == 0);
    CHECK(r.overall_f1 == doctest::Approx(100.0));

    // One No query scored as Yes: Yes P=50 R=100, No has no true positive.
    std::vector<LabeledQuery> wrong{query_for(1, Label::Yes), query_for(1, Label::No)};
    const auto w = evaluate_classifier(c, tab, wrong);
    CHECK(w.per_class[0].f1 == doctest::Approx(200.0 / 3));
    CHECK(w.per_class[1].f1 == 0.0);
    CHECK(w.overall_f1 == doctest::Approx(100.0 / 3));
    CHECK(w.confusion[1][0] == 1);

    CHECK_THROWS_AS(evaluate_classifier(c, tab, {}), InputError);
}

TEST_CASE("training from instances on the separable graph") {
    const auto sep = separable_tkg();
    DatasetConfig dc;
    dc.train = {30, 30, 30};
    dc.test = {30, 30, 30};
    dc.train_max_time = sep.train_max_time;
    dc.seed = 1;
    const auto insts = build_dataset(sep.graph, sep.neutral, dc);
    const auto tab = EmbeddingTable::seeded(8, sep.graph.entities().size(), sep.graph.relations().size(), 4);
    std::vector<LabeledQuery> train, test;
    for (const auto& i : insts) (i.split.kind == SplitKind::Train ? train : test).push_back(i);
    ClassifierConfig cfg;
    cfg.epochs = 100;
    const auto res = train_classifier(train, tab, cfg);
    const auto report = evaluate_classifier(res.model, tab, test);
    CHECK(report.total == 90);
    CHECK(report.overall_f1 > 50.0);
}

TEST_CASE("classifier file round trip") {
    Rng rng(1);
    auto c = QueryClassifier::zeros(3);
    for (auto& w : c.weights) w = static_cast<float>(rng.uniform(-2, 2));
    TempDir dir;
    save_classifier(c, dir / "c.etrc");
    const auto back = load_classifier(dir / "c.etrc");
    CHECK(back.input_dim == 9);
    CHECK(back.weights == c.weights);
    write_file(dir / "bad.etrc", "ETRC");
    CHECK_THROWS(load_classifier(dir / "bad.etrc"));
}
