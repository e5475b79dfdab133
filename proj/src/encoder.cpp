#include "etr/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <spdlog/spdlog.h>

#include "etr/binary_io.hpp"
#include "etr/error.hpp"
#include "etr/rng.hpp"

namespace etr {

// ---------------------------------------------------------------------------
// EmbeddingTable

EmbeddingTable::EmbeddingTable(std::uint32_t d_s, std::size_t num_entities, std::size_t num_relations)
    : d_s_(d_s),
      num_entities_(num_entities),
      num_relations_(num_relations),
      entities_(num_entities * d_s, 0.0f),
      relations_(num_relations * d_s, 0.0f) {}

std::span<const float> EmbeddingTable::row(TableKind kind, std::uint32_t id) const {
    const bool entity = kind == TableKind::Entity;
    const std::size_t n = entity ? num_entities_ : num_relations_;
    if (id >= n) {
        throw ReferenceError(std::string(entity ? "entity" : "relation") + " id " + std::to_string(id) +
                             " out of bounds (" + std::to_string(n) + " rows)");
    }
    const auto& v = entity ? entities_ : relations_;
    return {v.data() + std::size_t{id} * d_s_, d_s_};
}

std::span<float> EmbeddingTable::mutable_row(TableKind kind, std::uint32_t id) {
    const auto r = std::as_const(*this).row(kind, id);
    return {const_cast<float*>(r.data()), r.size()};
}

bool EmbeddingTable::all_finite() const noexcept {
    auto finite = [](float f) { return std::isfinite(f); };
    return std::all_of(entities_.begin(), entities_.end(), finite) &&
           std::all_of(relations_.begin(), relations_.end(), finite);
}

EmbeddingTable EmbeddingTable::seeded(std::uint32_t d_s, std::size_t num_entities, std::size_t num_relations,
                                      std::uint64_t seed) {
    if (d_s == 0) throw ConfigError("d_s must be >= 1");
    EmbeddingTable t(d_s, num_entities, num_relations);
    const double a = 1.0 / std::sqrt(static_cast<double>(d_s));
    Rng rng(seed);
    for (auto& v : t.entities_) v = static_cast<float>(rng.uniform(-a, a));
    for (auto& v : t.relations_) v = static_cast<float>(rng.uniform(-a, a));
    return t;
}

std::vector<float> lookup(const EmbeddingTable& tab, TableKind kind, std::uint32_t id) {
    const auto r = tab.row(kind, id);
    return {r.begin(), r.end()};
}

void save_embeddings(const EmbeddingTable& tab, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + file.string());
    binio::write_magic(out, "ETRE");
    binio::write_u32(out, tab.dim());
    binio::write_u32(out, static_cast<std::uint32_t>(tab.num_entities()));
    binio::write_u32(out, static_cast<std::uint32_t>(tab.num_relations()));
    for (std::uint32_t e = 0; e < tab.num_entities(); ++e) {
        for (float f : tab.row(TableKind::Entity, e)) binio::write_f32(out, f);
    }
    for (std::uint32_t r = 0; r < tab.num_relations(); ++r) {
        for (float f : tab.row(TableKind::Relation, r)) binio::write_f32(out, f);
    }
    if (!out) throw InputError("write failed for " + file.string());
}

EmbeddingTable load_embeddings(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot open " + file.string());
    const std::string what = "embedding file " + file.string();
    binio::expect_magic(in, "ETRE", what);
    const auto d = binio::read_u32(in, what);
    const auto ne = binio::read_u32(in, what);
    const auto nr = binio::read_u32(in, what);
    if (d == 0) throw InputError(what + ": d_s is zero");
    EmbeddingTable t(d, ne, nr);
    for (std::uint32_t e = 0; e < ne; ++e) {
        for (auto& f : t.mutable_row(TableKind::Entity, e)) f = binio::read_f32(in, what);
    }
    for (std::uint32_t r = 0; r < nr; ++r) {
        for (auto& f : t.mutable_row(TableKind::Relation, r)) f = binio::read_f32(in, what);
    }
    if (!t.all_finite()) throw InputError(what + ": non-finite value");
    return t;
}

// ---------------------------------------------------------------------------
// Proxy data

void EncoderConfig::validate() const {
    if (d_s == 0) throw ConfigError("d_s must be >= 1");
    if (hidden == 0) throw ConfigError("hidden size must be >= 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be > 0");
    if (!(lr_decay >= 0.0) || !std::isfinite(lr_decay)) throw ConfigError("lr_decay must be >= 0");
    if (history_horizon == 0) throw ConfigError("history horizon must be >= 1");
    if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0)) {
        throw ConfigError("holdout fraction must lie in [0, 1)");
    }
}

std::array<double, kFrequencyFeatures> frequency_features(const TemporalGraph& g, const Quadruple& q,
                                                         std::uint32_t horizon) {
    const TimestampId first = q.time > horizon ? q.time - horizon : 0;
    std::array<std::size_t, kFrequencyFeatures> n{};
    g.for_each_from(q.subject, first, q.time, [&](const Quadruple& f) {
        const bool rel = f.relation == q.relation;
        const bool obj = f.object == q.object;
        n[0] += rel && obj;
        n[1] += obj;
        n[2] += rel;
        n[3] += 1;
    });
    std::array<double, kFrequencyFeatures> out{};
    for (std::size_t i = 0; i < kFrequencyFeatures; ++i) out[i] = std::log1p(static_cast<double>(n[i]));
    return out;
}

std::vector<ProxyExample> build_proxy_examples(const TemporalGraph& g, const EncoderConfig& cfg) {
    const TimestampId boundary = cfg.train_max_time.value_or(g.default_train_max_time());
    const auto ne = g.entities().size();
    const auto nr = g.relations().size();
    constexpr int kAttempts = 16;
    Rng rng(derive_seed(cfg.seed, 5, 0));
    std::vector<ProxyExample> out;
    for (const auto& f : g.facts()) {
        if (f.time > boundary) break;
        out.push_back({f, frequency_features(g, f, cfg.history_horizon), 0});
        if (ne > 1) {
            for (int a = 0; a < kAttempts; ++a) {
                Quadruple c = f;
                c.object = static_cast<EntityId>(rng.below(ne));
                if (c.object == f.object || g.contains(c)) continue;
                out.push_back({c, frequency_features(g, c, cfg.history_horizon), 1});
                break;
            }
        }
        if (nr > 1) {
            for (int a = 0; a < kAttempts; ++a) {
                Quadruple c = f;
                c.relation = static_cast<RelationId>(rng.below(nr));
                if (c.relation == f.relation || g.contains(c)) continue;
                out.push_back({c, frequency_features(g, c, cfg.history_horizon), 2});
                break;
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// ProxyModel

ProxyModel::ProxyModel(const EmbeddingTable& init, std::uint32_t hidden, std::uint64_t seed)
    : d_s_(init.dim()),
      hidden_(hidden),
      num_entities_(init.num_entities()),
      num_relations_(init.num_relations()) {
    if (hidden == 0) throw ConfigError("hidden size must be >= 1");
    entities_.reserve(num_entities_ * d_s_);
    for (std::uint32_t e = 0; e < num_entities_; ++e) {
        for (float f : init.row(TableKind::Entity, e)) entities_.push_back(f);
    }
    relations_.reserve(num_relations_ * d_s_);
    for (std::uint32_t r = 0; r < num_relations_; ++r) {
        for (float f : init.row(TableKind::Relation, r)) relations_.push_back(f);
    }
    Rng rng(seed);
    const double a1 = 1.0 / std::sqrt(static_cast<double>(input_dim()));
    const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    w1_.resize(hidden * input_dim());
    for (auto& w : w1_) w = rng.uniform(-a1, a1);
    b1_.assign(hidden, 0.0);
    w2_.resize(kProxyClasses * hidden);
    for (auto& w : w2_) w = rng.uniform(-a2, a2);
    b2_.assign(kProxyClasses, 0.0);
}

std::span<double> ProxyModel::parameters(Layer layer) {
    const auto p = std::as_const(*this).parameters(layer);
    return {const_cast<double*>(p.data()), p.size()};
}

std::span<const double> ProxyModel::parameters(Layer layer) const {
    switch (layer) {
        case Layer::Entity: return entities_;
        case Layer::Relation: return relations_;
        case Layer::Hidden: return w1_;
        case Layer::HiddenBias: return b1_;
        case Layer::Output: return w2_;
        case Layer::OutputBias: return b2_;
    }
    return {};
}

ProxyModel::Forward ProxyModel::forward(const ProxyExample& ex) const {
    const auto& q = ex.fact;
    if (q.subject >= num_entities_ || q.object >= num_entities_ || q.relation >= num_relations_) {
        throw ReferenceError("proxy example references an id outside the embedding table");
    }
    Forward f;
    f.x.resize(input_dim());
    const std::size_t d = d_s_;
    std::copy_n(entities_.begin() + q.subject * d, d, f.x.begin());
    std::copy_n(relations_.begin() + q.relation * d, d, f.x.begin() + d);
    std::copy_n(entities_.begin() + q.object * d, d, f.x.begin() + 2 * d);
    std::copy(ex.features.begin(), ex.features.end(), f.x.begin() + 3 * d);

    const std::size_t in = input_dim();
    f.h.resize(hidden_);
    for (std::size_t j = 0; j < hidden_; ++j) {
        double z = b1_[j];
        const double* w = w1_.data() + j * in;
        for (std::size_t i = 0; i < in; ++i) z += w[i] * f.x[i];
        f.h[j] = std::tanh(z);
    }
    std::array<double, kProxyClasses> logit{};
    for (std::size_t c = 0; c < kProxyClasses; ++c) {
        double z = b2_[c];
        for (std::size_t j = 0; j < hidden_; ++j) z += w2_[c * hidden_ + j] * f.h[j];
        logit[c] = z;
    }
    const double m = *std::max_element(logit.begin(), logit.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < kProxyClasses; ++c) sum += std::exp(logit[c] - m);
    for (std::size_t c = 0; c < kProxyClasses; ++c) f.prob[c] = std::exp(logit[c] - m) / sum;
    f.loss = -(logit[ex.label] - m - std::log(sum));
    return f;
}

std::array<double, kProxyClasses> ProxyModel::logits(const ProxyExample& ex) const {
    const auto f = forward(ex);
    std::array<double, kProxyClasses> out{};
    for (std::size_t c = 0; c < kProxyClasses; ++c) {
        double z = b2_[c];
        for (std::size_t j = 0; j < hidden_; ++j) z += w2_[c * hidden_ + j] * f.h[j];
        out[c] = z;
    }
    return out;
}

double ProxyModel::loss(const ProxyExample& ex) const { return forward(ex).loss; }

std::size_t ProxyModel::predict(const ProxyExample& ex) const {
    const auto f = forward(ex);
    return static_cast<std::size_t>(std::max_element(f.prob.begin(), f.prob.end()) - f.prob.begin());
}

double ProxyModel::loss_and_gradient(const ProxyExample& ex, std::array<std::vector<double>, 6>& grad) const {
    const auto f = forward(ex);
    const std::size_t in = input_dim();
    const std::size_t d = d_s_;
    grad[0].assign(entities_.size(), 0.0);
    grad[1].assign(relations_.size(), 0.0);
    grad[2].assign(w1_.size(), 0.0);
    grad[3].assign(b1_.size(), 0.0);
    grad[4].assign(w2_.size(), 0.0);
    grad[5].assign(b2_.size(), 0.0);

    std::array<double, kProxyClasses> dlogit{};
    for (std::size_t c = 0; c < kProxyClasses; ++c) dlogit[c] = f.prob[c] - (c == ex.label ? 1.0 : 0.0);
    std::vector<double> dz(hidden_, 0.0);
    for (std::size_t c = 0; c < kProxyClasses; ++c) {
        grad[5][c] = dlogit[c];
        for (std::size_t j = 0; j < hidden_; ++j) {
            grad[4][c * hidden_ + j] = dlogit[c] * f.h[j];
            dz[j] += w2_[c * hidden_ + j] * dlogit[c];
        }
    }
    std::vector<double> dx(in, 0.0);
    for (std::size_t j = 0; j < hidden_; ++j) {
        dz[j] *= 1.0 - f.h[j] * f.h[j];
        grad[3][j] = dz[j];
        for (std::size_t i = 0; i < in; ++i) {
            grad[2][j * in + i] = dz[j] * f.x[i];
            dx[i] += w1_[j * in + i] * dz[j];
        }
    }
    const auto& q = ex.fact;
    for (std::size_t k = 0; k < d; ++k) {
        grad[0][q.subject * d + k] += dx[k];
        grad[1][q.relation * d + k] += dx[d + k];
        grad[0][q.object * d + k] += dx[2 * d + k];
    }
    return f.loss;
}

double ProxyModel::sgd_step(const ProxyExample& ex, double lr) {
    const auto f = forward(ex);
    const std::size_t in = input_dim();
    const std::size_t d = d_s_;
    std::array<double, kProxyClasses> dlogit{};
    for (std::size_t c = 0; c < kProxyClasses; ++c) dlogit[c] = f.prob[c] - (c == ex.label ? 1.0 : 0.0);
    std::vector<double> dz(hidden_, 0.0);
    for (std::size_t c = 0; c < kProxyClasses; ++c) {
        for (std::size_t j = 0; j < hidden_; ++j) dz[j] += w2_[c * hidden_ + j] * dlogit[c];
    }
    for (std::size_t j = 0; j < hidden_; ++j) dz[j] *= 1.0 - f.h[j] * f.h[j];
    std::vector<double> dx(in, 0.0);
    for (std::size_t j = 0; j < hidden_; ++j) {
        const double* w = w1_.data() + j * in;
        for (std::size_t i = 0; i < in; ++i) dx[i] += w[i] * dz[j];
    }

    for (std::size_t c = 0; c < kProxyClasses; ++c) {
        b2_[c] -= lr * dlogit[c];
        for (std::size_t j = 0; j < hidden_; ++j) w2_[c * hidden_ + j] -= lr * dlogit[c] * f.h[j];
    }
    for (std::size_t j = 0; j < hidden_; ++j) {
        b1_[j] -= lr * dz[j];
        double* w = w1_.data() + j * in;
        for (std::size_t i = 0; i < in; ++i) w[i] -= lr * dz[j] * f.x[i];
    }
    const auto& q = ex.fact;
    for (std::size_t k = 0; k < d; ++k) {
        entities_[q.subject * d + k] -= lr * dx[k];
        relations_[q.relation * d + k] -= lr * dx[d + k];
        entities_[q.object * d + k] -= lr * dx[2 * d + k];
    }
    return f.loss;
}

EmbeddingTable ProxyModel::table() const {
    EmbeddingTable t(d_s_, num_entities_, num_relations_);
    for (std::uint32_t e = 0; e < num_entities_; ++e) {
        auto row = t.mutable_row(TableKind::Entity, e);
        for (std::size_t k = 0; k < d_s_; ++k) row[k] = static_cast<float>(entities_[e * d_s_ + k]);
    }
    for (std::uint32_t r = 0; r < num_relations_; ++r) {
        auto row = t.mutable_row(TableKind::Relation, r);
        for (std::size_t k = 0; k < d_s_; ++k) row[k] = static_cast<float>(relations_[r * d_s_ + k]);
    }
    return t;
}

// ---------------------------------------------------------------------------
// Training

EncoderResult train_encoder(const TemporalGraph& g, const EncoderConfig& cfg, const EmbeddingTable* resume) {
    cfg.validate();
    if (g.facts().empty()) throw InputError("cannot train an encoder on an empty graph");
    const auto ne = g.entities().size();
    const auto nr = g.relations().size();

    EmbeddingTable init;
    if (resume) {
        if (resume->dim() != cfg.d_s) {
            throw ConfigError("resumed embeddings have d_s=" + std::to_string(resume->dim()) +
                              " but the configuration asks for d_s=" + std::to_string(cfg.d_s));
        }
        if (resume->num_entities() != ne || resume->num_relations() != nr) {
            throw ConfigError("resumed embeddings do not match the graph vocabulary sizes");
        }
        init = *resume;
    } else {
        init = EmbeddingTable::seeded(cfg.d_s, ne, nr, cfg.seed);
    }

    EncoderResult result;
    if (cfg.epochs == 0) {
        result.table = std::move(init);
        return result;
    }

    auto examples = build_proxy_examples(g, cfg);
    if (examples.empty()) throw InputError("no proxy examples before the train boundary");
    {
        Rng rng(derive_seed(cfg.seed, 2, 0));
        rng.shuffle(std::span<ProxyExample>(examples));
    }
    const auto n_hold = static_cast<std::size_t>(static_cast<double>(examples.size()) * cfg.holdout_fraction);
    const std::span<const ProxyExample> holdout(examples.data(), n_hold);
    std::vector<std::size_t> order(examples.size() - n_hold);
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = n_hold + i;
    result.train_examples = order.size();
    result.holdout_examples = n_hold;

    ProxyModel model(init, cfg.hidden, derive_seed(cfg.seed, 1, 0));
    for (std::uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, 3, epoch));
        rng.shuffle(std::span<std::size_t>(order));
        const double lr = cfg.learning_rate / (1.0 + cfg.lr_decay * static_cast<double>(epoch - 1));
        for (const auto i : order) model.sgd_step(examples[i], lr);
        // Loss of the end-of-epoch model over the whole training part.
        double total = 0.0;
        for (const auto i : order) total += model.loss(examples[i]);
        const double mean = order.empty() ? 0.0 : total / static_cast<double>(order.size());
        if (!std::isfinite(mean)) {
            throw DivergenceError("encoder training diverged in epoch " + std::to_string(epoch), epoch);
        }
        result.epoch_loss.push_back(mean);
        double hold = 0.0;
        for (const auto& ex : holdout) hold += model.loss(ex);
        result.holdout_loss.push_back(n_hold ? hold / static_cast<double>(n_hold) : 0.0);
        spdlog::info("encoder epoch {}/{}: train loss {:.6f}, held-out loss {:.6f}", epoch, cfg.epochs, mean,
                     result.holdout_loss.back());
    }
    std::size_t correct = 0;
    for (const auto& ex : holdout) correct += model.predict(ex) == ex.label;
    result.holdout_accuracy = n_hold ? static_cast<double>(correct) / static_cast<double>(n_hold) : 0.0;
    result.table = model.table();
    if (!result.table.all_finite()) {
        throw DivergenceError("encoder produced non-finite embeddings", cfg.epochs);
    }
    return result;
}

}  // namespace etr
