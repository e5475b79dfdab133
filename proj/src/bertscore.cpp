#include <algorithm>
#include <atomic>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include "etr/error.hpp"
#include "etr/http.hpp"
#include "etr/metrics.hpp"

namespace etr {

HttpEmbedder::HttpEmbedder(std::string base_url, std::string model, std::string api_key, int timeout_seconds)
    : model_(std::move(model)), api_key_(std::move(api_key)), timeout_seconds_(timeout_seconds) {
    const auto ep = parse_endpoint(base_url);
    origin_ = ep.origin;
    path_ = join_route(ep, "/v1/embeddings");
}

std::vector<std::vector<double>> HttpEmbedder::embed(const std::vector<std::string>& tokens) {
    if (tokens.empty()) return {};
    httplib::Client client(origin_);
    client.set_connection_timeout(timeout_seconds_);
    client.set_read_timeout(timeout_seconds_);
    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    const nlohmann::json body{{"model", model_}, {"input", tokens}};
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) throw TransportError("embedding endpoint unreachable: " + httplib::to_string(res.error()));
    if (res->status != 200) throw TransportError("embedding endpoint returned HTTP " + std::to_string(res->status));
    try {
        const auto j = nlohmann::json::parse(res->body);
        const auto& data = j.at("data");
        if (data.size() != tokens.size()) throw TransportError("embedding count does not match token count");
        std::vector<std::vector<double>> out(tokens.size());
        for (const auto& item : data) {
            const auto idx = item.value("index", std::size_t{0});
            if (idx >= out.size()) throw TransportError("embedding index out of range");
            out[idx] = item.at("embedding").get<std::vector<double>>();
        }
        return out;
    } catch (const nlohmann::json::exception& e) {
        throw TransportError(std::string("malformed embedding response: ") + e.what());
    }
}

std::vector<std::vector<double>> StubEmbedder::embed(const std::vector<std::string>& tokens) {
    std::vector<std::vector<double>> out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) {
        auto it = table_.find(t);
        if (it == table_.end()) throw TransportError("stub embedder has no vector for \"" + t + "\"");
        out.push_back(it->second);
    }
    return out;
}

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ContractError("embedding dimensions differ");
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

double bertscore_from_vectors(const std::vector<std::vector<double>>& candidate,
                              const std::vector<std::vector<double>>& reference) {
    if (candidate.empty() || reference.empty()) return 0.0;
    std::vector<std::vector<double>> sim(candidate.size(), std::vector<double>(reference.size()));
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        for (std::size_t j = 0; j < reference.size(); ++j) sim[i][j] = cosine(candidate[i], reference[j]);
    }
    double p = 0.0;
    for (std::size_t i = 0; i < candidate.size(); ++i) p += *std::max_element(sim[i].begin(), sim[i].end());
    p /= static_cast<double>(candidate.size());
    double r = 0.0;
    for (std::size_t j = 0; j < reference.size(); ++j) {
        double best = sim[0][j];
        for (std::size_t i = 1; i < candidate.size(); ++i) best = std::max(best, sim[i][j]);
        r += best;
    }
    r /= static_cast<double>(reference.size());
    if (p + r <= 0.0) return 0.0;
    return 100.0 * std::clamp(2.0 * p * r / (p + r), 0.0, 1.0);
}

std::optional<double> bertscore(std::string_view candidate, std::string_view reference, Embedder& embedder) {
    try {
        const auto c = embedder.embed(tokenize(candidate));
        const auto r = embedder.embed(tokenize(reference));
        return bertscore_from_vectors(c, r);
    } catch (const TransportError& e) {
        spdlog::warn("BertScore unavailable for a pair: {}", e.what());
        return std::nullopt;
    }
}

void add_text_metrics(MetricReport& report, const std::vector<ScoredPair>& pairs, Embedder* embedder,
                      std::size_t max_in_flight) {
    if (pairs.empty()) return;
    std::vector<std::string> cands, refs;
    double rouge = 0.0, met = 0.0;
    for (const auto& p : pairs) {
        cands.push_back(p.candidate);
        refs.push_back(p.reference);
        const auto c = tokenize(p.candidate);
        const auto r = tokenize(p.reference);
        rouge += rouge_l(c, r);
        met += meteor(c, r);
    }
    const auto n = static_cast<double>(pairs.size());
    report.bleu4 = corpus_bleu4(cands, refs);
    report.rouge_l = rouge / n;
    report.meteor = met / n;

    if (!embedder) return;
    std::vector<std::optional<double>> scores(pairs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < pairs.size(); i = next.fetch_add(1)) {
            scores[i] = bertscore(pairs[i].candidate, pairs[i].reference, *embedder);
        }
    };
    {
        std::vector<std::jthread> pool;
        const auto threads = std::max<std::size_t>(1, std::min(max_in_flight, pairs.size()));
        for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    double sum = 0.0;
    std::size_t ok = 0;
    for (const auto& s : scores) {
        if (s) {
            sum += *s;
            ++ok;
        } else {
            ++report.bertscore_unavailable;
        }
    }
    if (ok) report.bertscore_f1 = sum / static_cast<double>(ok);
}

}  // namespace etr
