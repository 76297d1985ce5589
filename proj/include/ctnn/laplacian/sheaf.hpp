#pragma once

#include <map>
#include <utility>
#include <vector>

#include "ctnn/laplacian/operators.hpp"

namespace ctnn::lap {

/// Cellular sheaf on an undirected graph: stalks on vertices and edges,
/// one restriction map F_{v <| e}: F(v) -> F(e) per incidence.
struct CellularSheaf {
    int n_vertices = 0;
    std::vector<std::pair<int, int>> edges;             // undirected, stored (u, v) with u < v
    std::map<int, int> vertex_dim;
    std::vector<int> edge_dim;                          // by edge index
    std::map<std::pair<int, int>, Tensor> restriction;  // (edge index, vertex) -> F(e) x F(v)

    const Tensor& restrict_map(int edge_index, int vertex) const {
        auto it = restriction.find({edge_index, vertex});
        if (it == restriction.end())
            throw UnknownCell("no restriction map for vertex " + std::to_string(vertex) +
                              " on edge " + std::to_string(edge_index));
        return it->second;
    }

    std::vector<int> incident_edges(int vertex) const {
        std::vector<int> out;
        for (std::size_t e = 0; e < edges.size(); ++e)
            if (edges[e].first == vertex || edges[e].second == vertex)
                out.push_back(static_cast<int>(e));
        return out;
    }
};

/// Realize sheaf message passing as vertex-to-vertex transports on the
/// bidirected graph: rho_{y->x} = F_{x<|e}^T F_{y<|e} for e = {x, y}.
inline Copresheaf sheaf_to_copresheaf(const CellularSheaf& sheaf) {
    cc::InducedDigraph g;
    std::map<int, int> dims;
    std::map<std::pair<int, int>, Tensor> table;
    std::set<int> verts;
    for (std::size_t e = 0; e < sheaf.edges.size(); ++e) {
        const auto [u, v] = sheaf.edges[e];
        verts.insert(u);
        verts.insert(v);
        const Tensor& fu = sheaf.restrict_map(static_cast<int>(e), u);
        const Tensor& fv = sheaf.restrict_map(static_cast<int>(e), v);
        if (fu.dim(0) != fv.dim(0))
            throw DimensionMismatch("edge stalk dims disagree on edge " + std::to_string(e));
        table[{v, u}] = ad::matmul(ad::transpose(fu), fv);  // F(v) -> F(u)
        table[{u, v}] = ad::matmul(ad::transpose(fv), fu);  // F(u) -> F(v)
        g.edges.emplace_back(v, u);
        g.edges.emplace_back(u, v);
    }
    g.vertices.assign(verts.begin(), verts.end());
    for (std::size_t i = 0; i < g.vertices.size(); ++i) g.index[g.vertices[i]] = static_cast<int>(i);
    std::sort(g.edges.begin(), g.edges.end(), [](const auto& a, const auto& b) {
        return std::tie(a.second, a.first) < std::tie(b.second, b.first);
    });
    for (int v : g.vertices) dims[v] = sheaf.vertex_dim.at(v);
    return Copresheaf::with_fixed_maps(std::move(g), std::move(dims), std::move(table));
}

/// Whether every edge pair satisfies rho_{x->y} = rho_{y->x}^T. Sheaf-derived
/// transports always do; the (I, 0) witness does not, which is exactly the
/// strict-subsumption separation.
inline bool reciprocity_holds(const Copresheaf& cp, double tol = 1e-12) {
    for (const auto& [src, dst] : cp.digraph().edges) {
        if (!cp.digraph().has_edge(dst, src)) return false;
        Tensor fwd = cp.transport(src, dst);
        Tensor rev = cp.transport(dst, src);
        if (rev.dim(0) != fwd.dim(1) || rev.dim(1) != fwd.dim(0)) return false;
        for (int i = 0; i < fwd.dim(0); ++i)
            for (int j = 0; j < fwd.dim(1); ++j)
                if (std::abs(rev.at(j, i) - fwd.at(i, j)) > tol) return false;
    }
    return true;
}

/// Sheaf-Laplacian blocks: L_xx = sum_e F_{x<|e}^T F_{x<|e};
/// L_xy = -F_{x<|e}^T F_{y<|e} when x and y share e, zero otherwise.
inline Tensor sheaf_laplacian_block(const CellularSheaf& sheaf, int x, int y) {
    const int dx = sheaf.vertex_dim.at(x), dy = sheaf.vertex_dim.at(y);
    Tensor block({dx, dy});
    for (std::size_t e = 0; e < sheaf.edges.size(); ++e) {
        const auto [u, v] = sheaf.edges[e];
        if (x == y) {
            if (u == x || v == x) {
                const Tensor& fx = sheaf.restrict_map(static_cast<int>(e), x);
                block = ad::add(block, ad::matmul(ad::transpose(fx), fx));
            }
        } else if ((u == x && v == y) || (u == y && v == x)) {
            const Tensor& fx = sheaf.restrict_map(static_cast<int>(e), x);
            const Tensor& fy = sheaf.restrict_map(static_cast<int>(e), y);
            block = ad::sub(block, ad::matmul(ad::transpose(fx), fy));
        }
    }
    return block;
}

/// Neural-sheaf-diffusion update, used as the reference oracle for the
/// message-passing equivalence test:
///   h_x+ = h_x - sum_{y in N(x) u {x}} W2 L_{F,x,y} W1 h_y.
inline CochainField nsd_update(const CellularSheaf& sheaf, const CochainField& h, const Tensor& w1,
                               const Tensor& w2) {
    int d = -1;
    for (const auto& [v, dim] : sheaf.vertex_dim) {
        if (d < 0) d = dim;
        if (dim != d) throw DimensionMismatch("nsd_update requires a uniform vertex stalk dim");
    }
    if (w1.dim(0) != d || w1.dim(1) != d || w2.dim(0) != d || w2.dim(1) != d)
        throw DimensionMismatch("W1/W2 must be square of the stalk dim");

    CochainField out;
    for (const auto& [x, dimx] : sheaf.vertex_dim) {
        Tensor acc({dimx});
        for (const auto& [y, dimy] : sheaf.vertex_dim) {
            Tensor block = sheaf_laplacian_block(sheaf, x, y);
            bool zero = true;
            for (int i = 0; i < block.size() && zero; ++i) zero = block.at(i) == 0.0;
            if (zero && x != y) continue;
            acc = ad::add(acc, ad::matmul(w2, ad::matmul(block, ad::matmul(w1, h.at(y)))));
        }
        out.set(x, ad::sub(h.at(x), acc));
    }
    return out;
}

}  // namespace ctnn::lap
