#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "etr/tkg.hpp"

namespace etr {

enum class TableKind { Entity, Relation };

/// Entity and relation embeddings, row-major, stored in single precision.
class EmbeddingTable {
  public:
    EmbeddingTable() = default;
    EmbeddingTable(std::uint32_t d_s, std::size_t num_entities, std::size_t num_relations);

    std::uint32_t dim() const noexcept { return d_s_; }
    std::size_t num_entities() const noexcept { return num_entities_; }
    std::size_t num_relations() const noexcept { return num_relations_; }

    /// Row view; throws ReferenceError for an out-of-bounds id.
    std::span<const float> row(TableKind kind, std::uint32_t id) const;
    std::span<float> mutable_row(TableKind kind, std::uint32_t id);

    bool all_finite() const noexcept;
    bool operator==(const EmbeddingTable&) const = default;

    /// Seeded uniform draws in [-1/sqrt(d_s), 1/sqrt(d_s)]: entity rows then relation rows.
    static EmbeddingTable seeded(std::uint32_t d_s, std::size_t num_entities, std::size_t num_relations,
                                 std::uint64_t seed);

  private:
    std::uint32_t d_s_ = 0;
    std::size_t num_entities_ = 0;
    std::size_t num_relations_ = 0;
    std::vector<float> entities_;
    std::vector<float> relations_;
};

/// Copy of the stored row.
std::vector<float> lookup(const EmbeddingTable& tab, TableKind kind, std::uint32_t id);

/// "ETRE" little-endian file: u32 d_s, u32 |E|, u32 |R|, f32 entity rows, f32 relation rows.
void save_embeddings(const EmbeddingTable& tab, const std::filesystem::path& file);
EmbeddingTable load_embeddings(const std::filesystem::path& file);

struct EncoderConfig {
    std::uint32_t d_s = 512;
    std::uint32_t hidden = 64;
    std::uint32_t epochs = 10;
    double learning_rate = 0.05;
    /// Epoch e (from 1) steps with learning_rate / (1 + lr_decay * (e - 1)).
    double lr_decay = 0.5;
    std::uint64_t seed = 0;
    std::uint32_t history_horizon = 30;
    /// Facts after this time are not used; defaults to the graph's train boundary.
    std::optional<TimestampId> train_max_time;
    double holdout_fraction = 0.1;

    /// Throws ConfigError on invalid values.
    void validate() const;
};

/// Proxy classes: 0 true fact, 1 object corrupted, 2 relation swapped.
inline constexpr std::size_t kProxyClasses = 3;
inline constexpr std::size_t kFrequencyFeatures = 4;

struct ProxyExample {
    Quadruple fact;
    /// log1p counts of (s,r,o), (s,*,o), (s,r,*), (s,*,*) in [t - horizon, t).
    std::array<double, kFrequencyFeatures> features{};
    std::size_t label = 0;
};

std::array<double, kFrequencyFeatures> frequency_features(const TemporalGraph& g, const Quadruple& q,
                                                         std::uint32_t horizon);

/// One positive, one object-corrupted and one relation-swapped example per
/// fact up to the train boundary; corruptions never hit a true fact.
std::vector<ProxyExample> build_proxy_examples(const TemporalGraph& g, const EncoderConfig& cfg);

/// Embeddings plus the one-hidden-layer MLP of the proxy objective:
/// x = [e_s | r | e_o | features], h = tanh(W1 x + b1), logits = W2 h + b2.
class ProxyModel {
  public:
    enum class Layer { Entity, Relation, Hidden, HiddenBias, Output, OutputBias };

    ProxyModel(const EmbeddingTable& init, std::uint32_t hidden, std::uint64_t seed);

    std::uint32_t dim() const noexcept { return d_s_; }
    std::uint32_t hidden() const noexcept { return hidden_; }
    std::size_t input_dim() const noexcept { return 3 * std::size_t{d_s_} + kFrequencyFeatures; }

    std::span<double> parameters(Layer layer);
    std::span<const double> parameters(Layer layer) const;

    std::array<double, kProxyClasses> logits(const ProxyExample& ex) const;
    /// Cross-entropy of the example.
    double loss(const ProxyExample& ex) const;
    /// Loss plus dense gradient per layer, laid out like parameters(layer).
    double loss_and_gradient(const ProxyExample& ex, std::array<std::vector<double>, 6>& grad) const;
    /// In-place SGD step on one example; touches only the rows it uses. Returns the loss.
    double sgd_step(const ProxyExample& ex, double lr);
    std::size_t predict(const ProxyExample& ex) const;

    EmbeddingTable table() const;

  private:
    struct Forward {
        std::vector<double> x;
        std::vector<double> h;
        std::array<double, kProxyClasses> prob{};
        double loss = 0.0;
    };
    Forward forward(const ProxyExample& ex) const;

    std::uint32_t d_s_;
    std::uint32_t hidden_;
    std::size_t num_entities_;
    std::size_t num_relations_;
    std::vector<double> entities_;
    std::vector<double> relations_;
    std::vector<double> w1_, b1_, w2_, b2_;
};

struct EncoderResult {
    EmbeddingTable table;
    /// Mean training loss per epoch.
    std::vector<double> epoch_loss;
    /// Mean held-out loss per epoch.
    std::vector<double> holdout_loss;
    double holdout_accuracy = 0.0;
    std::size_t train_examples = 0;
    std::size_t holdout_examples = 0;
};

/// Trains the embeddings with plain per-example SGD on the proxy objective.
/// `resume` supplies starting embeddings; its d_s must equal cfg.d_s.
/// Throws DivergenceError naming the epoch on a non-finite loss.
EncoderResult train_encoder(const TemporalGraph& g, const EncoderConfig& cfg,
                            const EmbeddingTable* resume = nullptr);

}  // namespace etr
