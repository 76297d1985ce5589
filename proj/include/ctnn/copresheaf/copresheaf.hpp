#pragma once

#include <map>
#include <utility>
#include <vector>

#include "ctnn/cc/neighborhood.hpp"
#include "ctnn/copresheaf/family.hpp"

namespace ctnn::cps {

/// Assignment of one stalk vector per cell.
class CochainField {
public:
    CochainField() = default;

    void set(int cell, Tensor v) {
        if (!values_.count(cell)) order_.push_back(cell);
        values_[cell] = std::move(v);
        std::sort(order_.begin(), order_.end());
    }

    const Tensor& at(int cell) const {
        auto it = values_.find(cell);
        if (it == values_.end()) throw UnknownCell("field has no value at cell " + std::to_string(cell));
        return it->second;
    }

    bool has(int cell) const { return values_.count(cell) > 0; }
    const std::vector<int>& cells() const { return order_; }
    std::size_t size() const { return order_.size(); }

private:
    std::map<int, Tensor> values_;
    std::vector<int> order_;
};

/// Per-vertex stalk dimensions over an induced digraph.
struct StalkSpace {
    cc::InducedDigraph digraph;
    std::map<int, int> dims;

    static StalkSpace uniform(cc::InducedDigraph g, int d) {
        StalkSpace s;
        for (int v : g.vertices) s.dims[v] = d;
        s.digraph = std::move(g);
        return s;
    }

    int dim(int cell) const {
        auto it = dims.find(cell);
        if (it == dims.end()) throw UnknownCell("no stalk at cell " + std::to_string(cell));
        return it->second;
    }
};

/// Copresheaf on an induced digraph: stalks + a transport rule + positive
/// edge weights. Feature-conditioned families draw their conditioning pair
/// from a stored field (GNN convention: raw endpoint features).
class Copresheaf {
public:
    Copresheaf() = default;

    Copresheaf(StalkSpace stalks, TransportFamily family, CochainField conditioning = {})
        : stalks_(std::move(stalks)), family_(std::move(family)), cond_(std::move(conditioning)) {}

    static Copresheaf with_fixed_maps(cc::InducedDigraph g, std::map<int, int> dims,
                                      std::map<std::pair<int, int>, Tensor> table) {
        StalkSpace s;
        s.digraph = std::move(g);
        s.dims = std::move(dims);
        return Copresheaf(std::move(s), TransportFamily::fixed_per_edge(std::move(table)));
    }

    const cc::InducedDigraph& digraph() const { return stalks_.digraph; }
    const StalkSpace& stalks() const { return stalks_; }
    const TransportFamily& family() const { return family_; }
    TransportFamily& family() { return family_; }
    int stalk_dim(int cell) const { return stalks_.dim(cell); }

    void set_weight(int src, int dst, double w) {
        if (w <= 0.0) throw NonPositiveWeight("w(" + std::to_string(src) + "->" + std::to_string(dst) +
                                              ") = " + std::to_string(w));
        weights_[{src, dst}] = w;
    }

    double weight(int src, int dst) const {
        auto it = weights_.find({src, dst});
        return it == weights_.end() ? 1.0 : it->second;
    }

    /// Materialized transport matrix for an edge.
    Tensor transport(int src, int dst) const {
        if (!family_.feature_conditioned()) return family_.eval_edge(src, dst);
        return family_.eval(cond_.at(dst), cond_.at(src));
    }

    /// Transport with an explicit conditioning field.
    Tensor transport(int src, int dst, const CochainField& features) const {
        if (!family_.feature_conditioned()) return family_.eval_edge(src, dst);
        return family_.eval(features.at(dst), features.at(src));
    }

    /// rho_{src->dst} applied to v.
    Tensor push(int src, int dst, const Tensor& v) const {
        if (!family_.feature_conditioned()) return family_.apply_edge(src, dst, v);
        return family_.apply(cond_.at(dst), cond_.at(src), v);
    }

    const CochainField& conditioning() const { return cond_; }
    void set_conditioning(CochainField f) { cond_ = std::move(f); }

private:
    StalkSpace stalks_;
    TransportFamily family_;
    CochainField cond_;
    std::map<std::pair<int, int>, double> weights_;
};

}  // namespace ctnn::cps
