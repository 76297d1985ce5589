#pragma once

#include <map>
#include <utility>
#include <vector>

#include "ctnn/ad/tensor.hpp"
#include "ctnn/cc/complex.hpp"

namespace ctnn::cc {

/// Which cells count as neighbors. adjacency(r,k): r-cells sharing a common
/// (r+k)-cell (the cell itself excluded). incidence(r,k): k-cells strictly
/// containing the queried r-cell. custom: an explicit directed edge list,
/// N(x) = sources of edges into x.
struct NeighborhoodSpec {
    enum class Kind { Adjacency, Incidence, Custom };

    Kind kind = Kind::Adjacency;
    int r = 0;
    int k = 1;
    std::vector<std::pair<int, int>> edges;  // custom only: (src, dst) cell ids

    static NeighborhoodSpec adjacency(int r, int k) { return {Kind::Adjacency, r, k, {}}; }
    static NeighborhoodSpec incidence(int r, int k) { return {Kind::Incidence, r, k, {}}; }
    static NeighborhoodSpec custom(std::vector<std::pair<int, int>> edges) {
        return {Kind::Custom, 0, 0, std::move(edges)};
    }
};

namespace detail {

/// N(x) without rank preconditions: cells outside the spec's query rank get
/// an empty neighborhood (needed when sweeping all cells for the digraph).
inline std::vector<int> neighbors_impl(const CombinatorialComplex& cc, const NeighborhoodSpec& spec,
                                       int x) {
    std::vector<int> out;
    const Cell& cx = cc.cell(x);
    switch (spec.kind) {
        case NeighborhoodSpec::Kind::Adjacency: {
            if (cx.rank != spec.r) return out;
            for (int y : cc.cells_of_rank(spec.r)) {
                if (y == x) continue;
                bool shared = false;
                for (int z : cc.cells_of_rank(spec.r + spec.k)) {
                    if (cc.contains(x, z) && cc.contains(y, z)) {
                        shared = true;
                        break;
                    }
                }
                if (shared) out.push_back(y);
            }
            break;
        }
        case NeighborhoodSpec::Kind::Incidence: {
            if (cx.rank != spec.r) return out;
            for (int y : cc.cells_of_rank(spec.k))
                if (y != x && cc.contains(x, y)) out.push_back(y);
            break;
        }
        case NeighborhoodSpec::Kind::Custom: {
            for (const auto& [src, dst] : spec.edges)
                if (dst == x) out.push_back(src);
            std::sort(out.begin(), out.end());
            out.erase(std::unique(out.begin(), out.end()), out.end());
            break;
        }
    }
    return out;  // rank-indexed iteration already yields ascending ids
}

}  // namespace detail

/// Neighbor set of cell x in ascending id order.
inline std::vector<int> neighborhood(const CombinatorialComplex& cc, const NeighborhoodSpec& spec,
                                     int x) {
    const Cell& cx = cc.cell(x);  // throws UnknownCell
    if (spec.kind == NeighborhoodSpec::Kind::Adjacency && cx.rank != spec.r)
        throw RankMismatch("adjacency(" + std::to_string(spec.r) + "," + std::to_string(spec.k) +
                           ") queried at rank " + std::to_string(cx.rank));
    return detail::neighbors_impl(cc, spec, x);
}

/// Directed graph induced by a neighborhood function: vertices are the
/// effective support plus all neighbors, and there is an edge y -> x exactly
/// when y is a neighbor of x.
struct InducedDigraph {
    std::vector<int> vertices;               // cell ids ascending
    std::vector<std::pair<int, int>> edges;  // (src, dst), ordered by (dst, src)
    std::map<int, int> index;                // cell id -> slot in `vertices`

    int slot(int cell_id) const {
        auto it = index.find(cell_id);
        if (it == index.end()) throw UnknownCell("cell " + std::to_string(cell_id) + " not in digraph");
        return it->second;
    }

    /// In-neighbor source ids per vertex slot, ascending.
    std::vector<std::vector<int>> in_sources() const {
        std::vector<std::vector<int>> in(vertices.size());
        for (const auto& [src, dst] : edges) in[static_cast<std::size_t>(slot(dst))].push_back(src);
        return in;
    }

    bool has_edge(int src, int dst) const {
        for (const auto& e : edges)
            if (e.first == src && e.second == dst) return true;
        return false;
    }
};

inline InducedDigraph induced_digraph(const CombinatorialComplex& cc, const NeighborhoodSpec& spec) {
    InducedDigraph g;
    std::set<int> verts;
    for (const auto& cell : cc.cells()) {
        auto nbrs = detail::neighbors_impl(cc, spec, cell.id);
        if (nbrs.empty()) continue;
        verts.insert(cell.id);
        for (int y : nbrs) {
            verts.insert(y);
            g.edges.emplace_back(y, cell.id);
        }
    }
    std::sort(g.edges.begin(), g.edges.end(),
              [](const auto& a, const auto& b) { return std::tie(a.second, a.first) < std::tie(b.second, b.first); });
    g.vertices.assign(verts.begin(), verts.end());
    for (std::size_t i = 0; i < g.vertices.size(); ++i) g.index[g.vertices[i]] = static_cast<int>(i);
    return g;
}

/// Binary neighborhood matrix, |Z| x |Y|: entry (i, j) = 1 iff z_i is a
/// neighbor of y_j. Throws NeighborOutsideZ when some N(y_j) is not covered.
inline ad::Tensor neighborhood_matrix(const CombinatorialComplex& cc, const NeighborhoodSpec& spec,
                                      const std::vector<int>& ys, const std::vector<int>& zs) {
    std::map<int, int> zpos;
    for (std::size_t i = 0; i < zs.size(); ++i) zpos[zs[i]] = static_cast<int>(i);
    ad::Tensor m({static_cast<int>(zs.size()), static_cast<int>(ys.size())});
    for (std::size_t j = 0; j < ys.size(); ++j) {
        for (int z : detail::neighbors_impl(cc, spec, ys[j])) {
            auto it = zpos.find(z);
            if (it == zpos.end())
                throw NeighborOutsideZ("neighbor " + std::to_string(z) + " of cell " +
                                       std::to_string(ys[j]) + " is not in Z");
            m.mut(it->second, static_cast<int>(j)) = 1.0;
        }
    }
    return m;
}

}  // namespace ctnn::cc
