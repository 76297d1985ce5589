#pragma once

#include <map>
#include <vector>

#include "ctnn/copresheaf/copresheaf.hpp"

namespace ctnn::cps {

/// Copresheaf neighborhood matrix: block-sparse |Z| x |Y| table in the
/// Def. 3 orientation, block (i, j) = rho_{z_i -> y_j} when z_i is a
/// neighbor of y_j. Application contracts over rows, so y_j receives the
/// transported sum of its neighbors.
struct Cnm {
    std::vector<int> ys, zs;

    struct Block {
        int zi, yj;  // positions within zs / ys
        Tensor m;
    };
    std::vector<Block> blocks;  // ordered by (yj, zi)

    bool has_block(int zi, int yj) const {
        for (const auto& b : blocks)
            if (b.zi == zi && b.yj == yj) return true;
        return false;
    }

    Tensor block(int zi, int yj) const {
        for (const auto& b : blocks)
            if (b.zi == zi && b.yj == yj) return b.m;
        throw UnknownCell("no block at (" + std::to_string(zi) + "," + std::to_string(yj) + ")");
    }

    /// Binary support indicator in the same |Z| x |Y| orientation.
    Tensor support() const {
        Tensor s({static_cast<int>(zs.size()), static_cast<int>(ys.size())});
        for (const auto& b : blocks) s.mut(b.zi, b.yj) = 1.0;
        return s;
    }
};

/// Assemble the CNM of the copresheaf's neighborhood relation for ordered
/// cell collections Y and Z. Feature-conditioned transports are evaluated
/// from `features`.
inline Cnm assemble_cnm(const Copresheaf& cp, const std::vector<int>& ys, const std::vector<int>& zs,
                        const CochainField& features = {}) {
    Cnm out;
    out.ys = ys;
    out.zs = zs;
    std::map<int, int> zpos;
    for (std::size_t i = 0; i < zs.size(); ++i) zpos[zs[i]] = static_cast<int>(i);

    auto in_sources = cp.digraph().in_sources();
    for (std::size_t j = 0; j < ys.size(); ++j) {
        auto it = cp.digraph().index.find(ys[j]);
        if (it == cp.digraph().index.end()) continue;  // empty neighborhood
        for (int src : in_sources[static_cast<std::size_t>(it->second)]) {
            auto zit = zpos.find(src);
            if (zit == zpos.end())
                throw NeighborOutsideZ("neighbor " + std::to_string(src) + " of cell " +
                                       std::to_string(ys[j]) + " is not in Z");
            Cnm::Block b;
            b.zi = zit->second;
            b.yj = static_cast<int>(j);
            b.m = cp.family().feature_conditioned() ? cp.transport(src, ys[j], features)
                                                    : cp.transport(src, ys[j]);
            out.blocks.push_back(std::move(b));
        }
    }
    std::sort(out.blocks.begin(), out.blocks.end(), [](const Cnm::Block& a, const Cnm::Block& b) {
        return std::tie(a.yj, a.zi) < std::tie(b.yj, b.zi);
    });
    return out;
}

/// y_j <- sum_i rho_{z_i -> y_j} h_{z_i}, ascending i. Targets with no
/// blocks get a zero vector of the dimension listed in `target_dims`, or are
/// omitted from the output field when unlisted.
inline CochainField apply_cnm(const Cnm& cnm, const CochainField& field,
                              const std::map<int, int>& target_dims = {}) {
    CochainField out;
    std::vector<Tensor> acc(cnm.ys.size());
    for (const auto& b : cnm.blocks) {
        const Tensor& h = field.at(cnm.zs[static_cast<std::size_t>(b.zi)]);
        if (h.size() != b.m.dim(1))
            throw DimensionMismatch("field value of size " + std::to_string(h.size()) +
                                    " against block " + Tensor::shape_str(b.m.shape()));
        Tensor term = ad::matmul(b.m, h);
        auto& slot = acc[static_cast<std::size_t>(b.yj)];
        slot = slot.defined() ? ad::add(slot, term) : term;
    }
    for (std::size_t j = 0; j < cnm.ys.size(); ++j) {
        if (acc[j].defined()) {
            out.set(cnm.ys[j], acc[j]);
        } else {
            auto it = target_dims.find(cnm.ys[j]);
            if (it != target_dims.end()) out.set(cnm.ys[j], Tensor({it->second}));
        }
    }
    return out;
}

/// Copresheaf adjacency matrix over the r-cells of cc (square), per
/// N_adj^{(r,k)}. The copresheaf must live on the matching induced digraph.
inline Cnm cam(const cc::CombinatorialComplex& complex, const Copresheaf& cp, int r, int k,
               const CochainField& features = {}) {
    (void)k;
    const auto& cells = complex.cells_of_rank(r);
    return assemble_cnm(cp, cells, cells, features);
}

/// Copresheaf incidence matrix, |X^k| x |X^r|, per N_inc^{(r,k)}.
inline Cnm cim(const cc::CombinatorialComplex& complex, const Copresheaf& cp, int r, int k,
               const CochainField& features = {}) {
    return assemble_cnm(cp, complex.cells_of_rank(r), complex.cells_of_rank(k), features);
}

}  // namespace ctnn::cps
