#include "etr/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <spdlog/spdlog.h>

#include "etr/binary_io.hpp"
#include "etr/error.hpp"
#include "etr/rng.hpp"

namespace etr {

QueryClassifier QueryClassifier::zeros(std::uint32_t d_s) {
    QueryClassifier c;
    c.input_dim = 3 * d_s;
    c.weights.assign(3 * std::size_t{c.input_dim}, 0.0);
    return c;
}

std::vector<double> query_features(const EmbeddingTable& tab, const Quadruple& q) {
    std::vector<double> x;
    x.reserve(3 * std::size_t{tab.dim()});
    for (float f : tab.row(TableKind::Entity, q.subject)) x.push_back(f);
    for (float f : tab.row(TableKind::Relation, q.relation)) x.push_back(f);
    for (float f : tab.row(TableKind::Entity, q.object)) x.push_back(f);
    return x;
}

std::array<double, 3> classifier_logits(const QueryClassifier& c, const std::vector<double>& x) {
    if (x.size() != c.input_dim) {
        throw ConfigError("classifier expects " + std::to_string(c.input_dim) + " inputs, got " +
                          std::to_string(x.size()));
    }
    std::array<double, 3> z{};
    for (std::size_t k = 0; k < 3; ++k) {
        const double* w = c.weights.data() + k * c.input_dim;
        double s = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) s += w[i] * x[i];
        z[k] = s;
    }
    return z;
}

std::array<double, 3> softmax(const std::array<double, 3>& logits) {
    const double m = *std::max_element(logits.begin(), logits.end());
    std::array<double, 3> p{};
    double sum = 0.0;
    for (std::size_t k = 0; k < 3; ++k) sum += (p[k] = std::exp(logits[k] - m));
    for (auto& v : p) v /= sum;
    return p;
}

std::array<double, 3> predict(const QueryClassifier& c, const EmbeddingTable& tab, const Quadruple& q) {
    return softmax(classifier_logits(c, query_features(tab, q)));
}

Label decide(const std::array<double, 3>& scores) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < 3; ++k) {
        if (scores[k] > scores[best]) best = k;
    }
    return kAllLabels[best];
}

double classifier_loss(const QueryClassifier& c, const std::vector<LabeledVector>& examples,
                       std::vector<double>* grad) {
    if (grad) grad->assign(c.weights.size(), 0.0);
    if (examples.empty()) return 0.0;
    double total = 0.0;
    for (const auto& ex : examples) {
        const auto z = classifier_logits(c, ex.x);
        const double m = *std::max_element(z.begin(), z.end());
        double sum = 0.0;
        for (double v : z) sum += std::exp(v - m);
        const auto y = index_of(ex.label);
        total += -(z[y] - m - std::log(sum));
        if (grad) {
            for (std::size_t k = 0; k < 3; ++k) {
                const double d = std::exp(z[k] - m) / sum - (k == y ? 1.0 : 0.0);
                double* g = grad->data() + k * c.input_dim;
                for (std::size_t i = 0; i < ex.x.size(); ++i) g[i] += d * ex.x[i];
            }
        }
    }
    const auto n = static_cast<double>(examples.size());
    if (grad) {
        for (auto& g : *grad) g /= n;
    }
    return total / n;
}

ClassifierResult train_classifier(const std::vector<LabeledVector>& examples, std::uint32_t input_dim,
                                  const ClassifierConfig& cfg) {
    if (cfg.batch_size == 0) throw ConfigError("batch size must be >= 1");
    if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
        throw ConfigError("learning rate must be finite and >= 0");
    }
    if (input_dim % 3 != 0) throw ConfigError("classifier input dimension must be a multiple of 3");
    ClassifierResult result;
    result.model = QueryClassifier::zeros(input_dim / 3);
    auto& model = result.model;
    for (const auto& ex : examples) {
        if (ex.x.size() != input_dim) throw ConfigError("training vector has the wrong dimension");
    }

    std::vector<std::size_t> order(examples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<LabeledVector> batch;
    std::vector<double> grad;
    for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, 7, epoch));
        rng.shuffle(std::span<std::size_t>(order));
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const auto end = std::min(order.size(), start + cfg.batch_size);
            batch.clear();
            for (std::size_t k = start; k < end; ++k) batch.push_back(examples[order[k]]);
            const double loss = classifier_loss(model, batch, &grad);
            if (!std::isfinite(loss)) {
                throw DivergenceError("classifier training diverged in epoch " + std::to_string(epoch), epoch);
            }
            total += loss * static_cast<double>(batch.size());
            for (std::size_t i = 0; i < grad.size(); ++i) model.weights[i] -= cfg.learning_rate * grad[i];
        }
        const double mean = examples.empty() ? 0.0 : total / static_cast<double>(examples.size());
        result.epoch_loss.push_back(mean);
        spdlog::debug("classifier epoch {}: loss {:.6f}", epoch, mean);
    }
    return result;
}

ClassifierResult train_classifier(const std::vector<LabeledQuery>& instances, const EmbeddingTable& tab,
                                  const ClassifierConfig& cfg) {
    std::vector<LabeledVector> examples;
    examples.reserve(instances.size());
    for (const auto& inst : instances) examples.push_back({query_features(tab, inst.query), inst.label});
    return train_classifier(examples, 3 * tab.dim(), cfg);
}

MetricReport evaluate_classifier(const QueryClassifier& c, const EmbeddingTable& tab,
                                 const std::vector<LabeledQuery>& test) {
    if (test.empty()) throw InputError("evaluation needs at least one test instance");
    std::vector<std::optional<Label>> pred;
    std::vector<Label> gold;
    for (const auto& inst : test) {
        pred.push_back(decide(classifier_logits(c, query_features(tab, inst.query))));
        gold.push_back(inst.label);
    }
    return classification_report(pred, gold);
}

void save_classifier(const QueryClassifier& c, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + file.string());
    binio::write_magic(out, "ETRC");
    binio::write_u32(out, c.input_dim);
    for (double w : c.weights) binio::write_f32(out, static_cast<float>(w));
    if (!out) throw InputError("write failed for " + file.string());
}

QueryClassifier load_classifier(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot open " + file.string());
    const std::string what = "classifier checkpoint " + file.string();
    binio::expect_magic(in, "ETRC", what);
    QueryClassifier c;
    c.input_dim = binio::read_u32(in, what);
    if (c.input_dim == 0 || c.input_dim % 3 != 0) throw InputError(what + ": bad input dimension");
    c.weights.resize(3 * std::size_t{c.input_dim});
    for (auto& w : c.weights) {
        w = binio::read_f32(in, what);
        if (!std::isfinite(w)) throw InputError(what + ": non-finite weight");
    }
    return c;
}

}  // namespace etr
