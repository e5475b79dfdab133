#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "etr/encoder.hpp"
#include "etr/metrics.hpp"
#include "etr/sampler.hpp"

namespace etr {

/// Linear 3-class scorer over (e_s | r | e_o); rows are Yes, No, Unsure.
struct QueryClassifier {
    std::uint32_t input_dim = 0;  // 3 * d_s
    std::vector<double> weights;  // 3 x input_dim, row-major

    static QueryClassifier zeros(std::uint32_t d_s);
};

/// (e_s | r | e_o) as doubles; throws ReferenceError for unknown ids.
std::vector<double> query_features(const EmbeddingTable& tab, const Quadruple& q);

std::array<double, 3> classifier_logits(const QueryClassifier& c, const std::vector<double>& x);
std::array<double, 3> softmax(const std::array<double, 3>& logits);

/// softmax(W (e_s | r | e_o)).
std::array<double, 3> predict(const QueryClassifier& c, const EmbeddingTable& tab, const Quadruple& q);

/// Argmax with ties going to the lowest class index.
Label decide(const std::array<double, 3>& scores);

struct ClassifierConfig {
    std::uint32_t epochs = 200;
    double learning_rate = 0.1;
    std::size_t batch_size = 64;
    std::uint64_t seed = 0;
};

struct LabeledVector {
    std::vector<double> x;
    Label label = Label::Yes;
};

/// Mean cross-entropy over the examples; fills `grad` (same layout as the
/// weights) with the mean gradient when non-null.
double classifier_loss(const QueryClassifier& c, const std::vector<LabeledVector>& examples,
                       std::vector<double>* grad = nullptr);

struct ClassifierResult {
    QueryClassifier model;
    std::vector<double> epoch_loss;
};

/// Minibatch SGD from zero weights over seeded per-epoch shuffles. Throws
/// DivergenceError on a non-finite loss.
ClassifierResult train_classifier(const std::vector<LabeledVector>& examples, std::uint32_t input_dim,
                                  const ClassifierConfig& cfg);
ClassifierResult train_classifier(const std::vector<LabeledQuery>& instances, const EmbeddingTable& tab,
                                  const ClassifierConfig& cfg);

/// Argmax decisions scored with classification_report. Throws InputError on
/// an empty test set.
MetricReport evaluate_classifier(const QueryClassifier& c, const EmbeddingTable& tab,
                                 const std::vector<LabeledQuery>& test);

/// "ETRC" file: u32 3*d_s, then 3 x 3*d_s f32 weights row-major.
void save_classifier(const QueryClassifier& c, const std::filesystem::path& file);
QueryClassifier load_classifier(const std::filesystem::path& file);

}  // namespace etr
