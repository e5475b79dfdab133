#include "etr/adapter.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "etr/binary_io.hpp"
#include "etr/error.hpp"
#include "etr/instances.hpp"

namespace etr {

namespace {

// Neumaier-compensated running sum per coordinate.
class CompensatedSum {
  public:
    explicit CompensatedSum(std::size_t n) : sum_(n, 0.0), comp_(n, 0.0) {}

    void add(std::size_t offset, std::span<const float> v) {
        for (std::size_t k = 0; k < v.size(); ++k) {
            double& s = sum_[offset + k];
            const double x = v[k];
            const double t = s + x;
            if (std::abs(s) >= std::abs(x)) {
                comp_[offset + k] += (s - t) + x;
            } else {
                comp_[offset + k] += (x - t) + s;
            }
            s = t;
        }
    }

    double value(std::size_t i) const { return sum_[i] + comp_[i]; }

  private:
    std::vector<double> sum_;
    std::vector<double> comp_;
};

void add_triple(CompensatedSum& acc, const EmbeddingTable& tab, const Quadruple& q) {
    const std::size_t d = tab.dim();
    acc.add(0, tab.row(TableKind::Entity, q.subject));
    acc.add(d, tab.row(TableKind::Relation, q.relation));
    acc.add(2 * d, tab.row(TableKind::Entity, q.object));
}

}  // namespace

GraphVector pool(const EmbeddingTable& tab, const Quadruple& query, const ChainSet& cs) {
    auto steps = cs.flattened();
    std::sort(steps.begin(), steps.end(), TimeMajorLess{});

    const std::size_t n = 3 * std::size_t{tab.dim()};
    CompensatedSum acc(n);
    for (const auto& s : steps) add_triple(acc, tab, s);
    add_triple(acc, tab, query);

    GraphVector gv;
    gv.chain_count = cs.chains.size();
    gv.step_count = steps.size();
    gv.values.resize(n);
    const double denom = static_cast<double>(steps.size() + 1);
    for (std::size_t i = 0; i < n; ++i) gv.values[i] = acc.value(i) / denom;
    return gv;
}

std::vector<double> project(const GraphVector& gv, const ProjectionMatrix& W) {
    if (W.cols != gv.values.size() || W.values.size() != W.rows * W.cols) {
        throw ConfigError("projection matrix is " + std::to_string(W.rows) + "x" + std::to_string(W.cols) +
                          " but the graph vector has " + std::to_string(gv.values.size()) + " values");
    }
    std::vector<double> out(W.rows, 0.0);
    for (std::size_t i = 0; i < W.rows; ++i) {
        const double* w = W.values.data() + i * W.cols;
        double s = 0.0;
        for (std::size_t j = 0; j < W.cols; ++j) s += w[j] * gv.values[j];
        out[i] = s;
    }
    return out;
}

std::size_t export_tokens(const std::vector<LabeledQuery>& instances, const EmbeddingTable& tab,
                          const std::filesystem::path& out) {
    std::vector<GraphVector> vectors;
    vectors.reserve(instances.size());
    for (const auto& inst : instances) {
        check_instance_ids(inst, tab.num_entities(), tab.num_relations());
        vectors.push_back(pool(tab, inst.query, inst.chains));
    }
    std::ofstream os(out, std::ios::binary | std::ios::trunc);
    if (!os) throw InputError("cannot write " + out.string());
    binio::write_magic(os, "ETRT");
    binio::write_u32(os, 3 * tab.dim());
    binio::write_u32(os, static_cast<std::uint32_t>(instances.size()));
    for (std::size_t i = 0; i < instances.size(); ++i) {
        binio::write_u32(os, static_cast<std::uint32_t>(instances[i].id));
        for (double v : vectors[i].values) binio::write_f32(os, static_cast<float>(v));
    }
    if (!os) throw InputError("write failed for " + out.string());
    return instances.size();
}

TokenFile read_tokens(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw InputError("cannot open " + file.string());
    const std::string what = "token file " + file.string();
    binio::expect_magic(in, "ETRT", what);
    TokenFile tf;
    tf.dim = binio::read_u32(in, what);
    const auto count = binio::read_u32(in, what);
    tf.records.resize(count);
    for (auto& r : tf.records) {
        r.index = binio::read_u32(in, what);
        r.values.resize(tf.dim);
        for (auto& v : r.values) v = binio::read_f32(in, what);
    }
    return tf;
}

}  // namespace etr
