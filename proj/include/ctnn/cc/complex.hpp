#pragma once

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ctnn/error.hpp"

namespace ctnn::cc {

/// A cell of a combinatorial complex. Identity within a complex is the sorted
/// vertex set; the rank is stored data, not derived from cardinality.
struct Cell {
    int id = -1;
    std::vector<int> vertices;  // sorted, unique, non-empty
    int rank = 0;
};

inline bool subset_of(const std::vector<int>& a, const std::vector<int>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
}

/// Finite ranked cell family over an integer vertex universe. Cells are
/// ordered by (rank, lexicographic vertex set) and ids index that order, so
/// every derived matrix and reduction is reproducible.
class CombinatorialComplex {
public:
    using CellSpec = std::pair<std::vector<int>, int>;

    static CombinatorialComplex build(std::vector<CellSpec> specs, int vertex_count = -1) {
        CombinatorialComplex cc;
        std::vector<Cell> cells;
        cells.reserve(specs.size());
        int max_vertex = -1;
        for (auto& [verts, rank] : specs) {
            if (verts.empty()) throw Error("build_complex: empty vertex set");
            if (rank < 0) throw Error("build_complex: negative rank");
            Cell cell;
            cell.vertices = verts;
            std::sort(cell.vertices.begin(), cell.vertices.end());
            cell.vertices.erase(std::unique(cell.vertices.begin(), cell.vertices.end()),
                                cell.vertices.end());
            cell.rank = rank;
            for (int v : cell.vertices) max_vertex = std::max(max_vertex, v);
            cells.push_back(std::move(cell));
        }
        std::sort(cells.begin(), cells.end(), [](const Cell& a, const Cell& b) {
            if (a.rank != b.rank) return a.rank < b.rank;
            return a.vertices < b.vertices;
        });
        for (std::size_t i = 0; i < cells.size(); ++i) {
            cells[i].id = static_cast<int>(i);
            if (i > 0 && cells[i].vertices == cells[i - 1].vertices)
                throw DuplicateCell(vertices_str(cells[i].vertices));
        }
        // duplicates at different ranks are not adjacent after the sort
        std::set<std::vector<int>> seen;
        for (const auto& cell : cells)
            if (!seen.insert(cell.vertices).second) throw DuplicateCell(vertices_str(cell.vertices));

        cc.vertex_count_ = vertex_count >= 0 ? vertex_count : max_vertex + 1;
        cc.cells_ = std::move(cells);
        for (const auto& cell : cc.cells_) {
            cc.rank_index_[cell.rank].push_back(cell.id);
            cc.by_vertices_[cell.vertices] = cell.id;
        }
        if (cc.cells_.size() > 10000)
            std::fprintf(stderr, "warning: complex has %zu cells (soft cap 10000)\n", cc.cells_.size());
        cc.validate();
        return cc;
    }

    /// Re-checks the Def. 1 invariants: singleton cells sit at rank 0 and
    /// containment never decreases rank.
    void validate() const {
        for (const auto& cell : cells_)
            if (cell.vertices.size() == 1 && cell.rank != 0)
                throw SingletonRankNonzero(vertices_str(cell.vertices) + " has rank " +
                                           std::to_string(cell.rank));
        for (const auto& x : cells_)
            for (const auto& y : cells_) {
                if (x.id == y.id || x.vertices.size() > y.vertices.size()) continue;
                if (x.rank > y.rank && subset_of(x.vertices, y.vertices))
                    throw RankMonotonicityViolation(vertices_str(x.vertices) + " (rank " +
                                                    std::to_string(x.rank) + ") inside " +
                                                    vertices_str(y.vertices) + " (rank " +
                                                    std::to_string(y.rank) + ")");
            }
    }

    int vertex_count() const { return vertex_count_; }
    int cell_count() const { return static_cast<int>(cells_.size()); }
    const std::vector<Cell>& cells() const { return cells_; }

    const Cell& cell(int id) const {
        if (id < 0 || id >= cell_count()) throw UnknownCell("id " + std::to_string(id));
        return cells_[static_cast<std::size_t>(id)];
    }

    const std::vector<int>& cells_of_rank(int r) const {
        static const std::vector<int> empty;
        auto it = rank_index_.find(r);
        return it == rank_index_.end() ? empty : it->second;
    }

    int dim() const { return rank_index_.empty() ? 0 : rank_index_.rbegin()->first; }

    /// Cell id for a vertex set, or -1.
    int find(std::vector<int> vertices) const {
        std::sort(vertices.begin(), vertices.end());
        auto it = by_vertices_.find(vertices);
        return it == by_vertices_.end() ? -1 : it->second;
    }

    int require(std::vector<int> vertices) const {
        int id = find(std::move(vertices));
        if (id < 0) throw UnknownCell("no such cell");
        return id;
    }

    bool contains(int sub, int super) const {
        return subset_of(cell(sub).vertices, cell(super).vertices);
    }

    static std::string vertices_str(const std::vector<int>& vs) {
        std::string s = "{";
        for (std::size_t i = 0; i < vs.size(); ++i) s += (i ? "," : "") + std::to_string(vs[i]);
        return s + "}";
    }

private:
    int vertex_count_ = 0;
    std::vector<Cell> cells_;
    std::map<int, std::vector<int>> rank_index_;
    std::map<std::vector<int>, int> by_vertices_;
};

}  // namespace ctnn::cc
