#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "etr/chains.hpp"
#include "etr/encoder.hpp"
#include "etr/sampler.hpp"

namespace etr {

/// Pooled structural representation of a query and its chains, 3*d_s long.
struct GraphVector {
    std::vector<double> values;
    std::size_t chain_count = 0;
    std::size_t step_count = 0;

    bool operator==(const GraphVector&) const = default;
};

/// Row-major d_x x 3*d_s matrix applied as W * values.
struct ProjectionMatrix {
    std::size_t rows = 0;  // d_x
    std::size_t cols = 0;  // 3 * d_s
    std::vector<double> values;
};

/// (sum over chain steps of (s | r | o) + (e_s | r | e_o)) / (steps + 1).
/// Steps are summed in canonical (t, s, r, o) order with compensated
/// accumulation, so any chain ordering gives the same bits.
GraphVector pool(const EmbeddingTable& tab, const Quadruple& query, const ChainSet& cs);

/// Throws ConfigError when W.cols != values.size().
std::vector<double> project(const GraphVector& gv, const ProjectionMatrix& W);

/// "ETRT" token file: u32 3*d_s, u32 count, then per record u32 instance
/// index and 3*d_s f32 values. Returns the record count.
std::size_t export_tokens(const std::vector<LabeledQuery>& instances, const EmbeddingTable& tab,
                          const std::filesystem::path& out);

struct TokenRecord {
    std::uint32_t index = 0;
    std::vector<float> values;
};

struct TokenFile {
    std::uint32_t dim = 0;
    std::vector<TokenRecord> records;
};

TokenFile read_tokens(const std::filesystem::path& file);

}  // namespace etr
