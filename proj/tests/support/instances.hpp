#pragma once

// Seeded random copresheaf instances shared by the unit and acceptance
// suites. Instances are small (<= 10 nodes, stalk dim <= 4) connected
// Erdős–Rényi digraphs with near-orthogonal transports and weights in
// U(0.5, 1.5); this keeps the nonzero Laplacian spectrum well conditioned,
// which the convergence checks rely on.

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "ctnn/copresheaf/copresheaf.hpp"
#include "ctnn/laplacian/operators.hpp"

namespace ctnn_tests {

using ctnn::ad::Rng;
using ctnn::ad::Tensor;

inline Tensor random_orthogonal(int d, Rng& rng) {
    Eigen::MatrixXd a(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(a);
    Eigen::MatrixXd q = qr.householderQ();
    Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int i = 0; i < d; ++i)
        if (r(i, i) < 0) q.col(i) = -q.col(i);
    Tensor t({d, d});
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) t.mut(i, j) = q(i, j);
    return t;
}

struct InstanceOpts {
    int min_nodes = 4;
    int max_nodes = 10;
    int max_dim = 4;
    double p_edge = 0.6;
    bool orthogonal = true;   // otherwise I + 0.4 * N(0,1) perturbations
    bool random_weights = true;
};

/// One-direction-per-pair random copresheaf base; symmetrize with
/// SymmetrizedCopresheaf::from to get a Laplacian-ready structure.
inline ctnn::cps::Copresheaf random_copresheaf(Rng rng, const InstanceOpts& opts = {}) {
    const int n = opts.min_nodes +
                  static_cast<int>(rng.below(static_cast<std::uint64_t>(opts.max_nodes - opts.min_nodes + 1)));
    const int d = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(opts.max_dim)));

    std::vector<std::pair<int, int>> pairs;
    for (int u = 0; u < n; ++u)
        for (int v = u + 1; v < n; ++v)
            if (rng.uniform() < opts.p_edge) pairs.emplace_back(u, v);
    // connect stragglers so the diffusion tests see one component
    std::vector<char> seen(static_cast<std::size_t>(n), 0);
    if (!pairs.empty()) seen[static_cast<std::size_t>(pairs[0].first)] = 1;
    bool grew = true;
    while (grew) {
        grew = false;
        for (auto& [u, v] : pairs)
            if (seen[static_cast<std::size_t>(u)] != seen[static_cast<std::size_t>(v)]) {
                seen[static_cast<std::size_t>(u)] = seen[static_cast<std::size_t>(v)] = 1;
                grew = true;
            }
    }
    for (int v = 0; v < n; ++v)
        if (!seen[static_cast<std::size_t>(v)]) {
            int anchor = (v + 1) % n;
            pairs.emplace_back(std::min(v, anchor), std::max(v, anchor));
            seen[static_cast<std::size_t>(v)] = 1;
        }

    ctnn::cc::InducedDigraph g;
    std::map<std::pair<int, int>, Tensor> table;
    std::map<int, int> dims;
    std::set<int> verts;
    for (auto& [u, v] : pairs) {
        Tensor rho;
        if (opts.orthogonal) {
            rho = random_orthogonal(d, rng);
        } else {
            rho = Tensor::identity(d);
            for (int i = 0; i < rho.size(); ++i) rho.data()[i] += 0.4 * rng.normal();
        }
        table[{u, v}] = rho;
        g.edges.emplace_back(u, v);
        verts.insert(u);
        verts.insert(v);
    }
    g.vertices.assign(verts.begin(), verts.end());
    for (std::size_t i = 0; i < g.vertices.size(); ++i) g.index[g.vertices[i]] = static_cast<int>(i);
    std::sort(g.edges.begin(), g.edges.end(), [](const auto& a, const auto& b) {
        return std::tie(a.second, a.first) < std::tie(b.second, b.first);
    });
    for (int v : g.vertices) dims[v] = d;

    auto cp = ctnn::cps::Copresheaf::with_fixed_maps(std::move(g), std::move(dims), std::move(table));
    if (opts.random_weights)
        for (const auto& [src, dst] : cp.digraph().edges) cp.set_weight(src, dst, rng.uniform(0.5, 1.5));
    return cp;
}

inline ctnn::cps::CochainField random_field(const ctnn::cps::Copresheaf& cp, Rng rng,
                                            double scale = 1.0) {
    ctnn::cps::CochainField h;
    for (int v : cp.digraph().vertices) h.set(v, ctnn::ad::randn({cp.stalk_dim(v)}, rng, scale));
    return h;
}

inline double field_dot(const ctnn::cps::CochainField& a, const ctnn::cps::CochainField& b) {
    double acc = 0;
    for (int cell : a.cells())
        for (int i = 0; i < a.at(cell).size(); ++i) acc += a.at(cell).at(i) * b.at(cell).at(i);
    return acc;
}

inline double edge_dot(const ctnn::lap::EdgeField& a, const ctnn::lap::EdgeField& b) {
    double acc = 0;
    for (const auto& [edge, val] : a.values) {
        const Tensor& other = b.values.at(edge);
        for (int i = 0; i < val.size(); ++i) acc += val.at(i) * other.at(i);
    }
    return acc;
}

}  // namespace ctnn_tests
