#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <utility>
#include <vector>

#include "ctnn/copresheaf/copresheaf.hpp"

namespace ctnn::lap {

using ad::Tensor;
using cps::CochainField;
using cps::Copresheaf;

/// One vector in the target stalk per directed edge.
struct EdgeField {
    std::map<std::pair<int, int>, Tensor> values;

    const Tensor& at(int src, int dst) const {
        auto it = values.find({src, dst});
        if (it == values.end())
            throw UnknownCell("edge field has no value at " + std::to_string(src) + "->" +
                              std::to_string(dst));
        return it->second;
    }
};

/// (B_rho h)_{y->x} = h_x - rho_{y->x} h_y.
inline EdgeField transport_discrepancy(const Copresheaf& cp, const CochainField& h) {
    EdgeField out;
    for (const auto& [src, dst] : cp.digraph().edges) {
        const Tensor& hx = h.at(dst);
        Tensor moved = cp.push(src, dst, h.at(src));
        if (moved.size() != hx.size())
            throw DimensionMismatch("transport lands in dim " + std::to_string(moved.size()) +
                                    ", target stalk has " + std::to_string(hx.size()));
        out.values[{src, dst}] = ad::sub(hx, moved);
    }
    return out;
}

/// Euclidean adjoint: (B^T xi)_x = sum_{y->x} xi_{y->x} - sum_{x->z} rho_{x->z}^T xi_{x->z}.
inline CochainField adjoint_apply(const Copresheaf& cp, const EdgeField& xi) {
    CochainField out;
    std::map<int, Tensor> acc;
    for (int v : cp.digraph().vertices) acc[v] = Tensor({cp.stalk_dim(v)});
    for (const auto& [src, dst] : cp.digraph().edges) {
        const Tensor& val = xi.at(src, dst);
        acc[dst] = ad::add(acc[dst], val);
        acc[src] = ad::sub(acc[src], ad::matmul(ad::transpose(cp.transport(src, dst)), val));
    }
    for (int v : cp.digraph().vertices) out.set(v, acc[v]);
    return out;
}

/// Weighted transport energy E_rho(h) = sum_edges w |h_x - rho h_y|^2.
/// Differentiable; the gradient in h is 2 L_rho h.
inline Tensor energy(const Copresheaf& cp, const CochainField& h) {
    Tensor total = Tensor::scalar(0.0);
    for (const auto& [src, dst] : cp.digraph().edges) {
        Tensor d = ad::sub(h.at(dst), cp.push(src, dst, h.at(src)));
        total = ad::add(total, ad::scalar_mul(ad::dot(d, d), cp.weight(src, dst)));
    }
    return total;
}

/// Copresheaf whose edge set is closed under reversal with the transpose
/// convention rho_{x->y} = rho_{y->x}^T and matching weights. Built by
/// materializing every transport, so the Laplacian below is a fixed linear
/// operator.
class SymmetrizedCopresheaf {
public:
    static SymmetrizedCopresheaf from(const Copresheaf& base, double tol = 1e-12) {
        std::map<std::pair<int, int>, Tensor> table;
        std::map<std::pair<int, int>, double> weights;
        for (const auto& [src, dst] : base.digraph().edges) {
            table[{src, dst}] = base.transport(src, dst).detached();
            weights[{src, dst}] = base.weight(src, dst);
        }
        for (const auto& [edge, rho] : std::map<std::pair<int, int>, Tensor>(table)) {
            auto rev = std::make_pair(edge.second, edge.first);
            Tensor rho_t = ad::transpose(rho);
            auto it = table.find(rev);
            if (it == table.end()) {
                table[rev] = rho_t;
                weights[rev] = weights[edge];
            } else {
                double worst = 0;
                if (it->second.shape() != rho_t.shape())
                    throw SymmetrizationViolation("reverse transport shape mismatch");
                for (int i = 0; i < rho_t.size(); ++i)
                    worst = std::max(worst, std::abs(it->second.at(i) - rho_t.at(i)));
                if (worst > tol || weights[rev] != weights[edge])
                    throw SymmetrizationViolation("edge " + std::to_string(edge.first) + "<->" +
                                                  std::to_string(edge.second) +
                                                  " violates the transpose convention");
            }
        }

        cc::InducedDigraph g;
        g.vertices = base.digraph().vertices;
        g.index = base.digraph().index;
        for (const auto& [edge, rho] : table) g.edges.push_back(edge);
        std::sort(g.edges.begin(), g.edges.end(), [](const auto& a, const auto& b) {
            return std::tie(a.second, a.first) < std::tie(b.second, b.first);
        });

        std::map<int, int> dims;
        for (int v : base.digraph().vertices) dims[v] = base.stalk_dim(v);
        SymmetrizedCopresheaf s;
        s.cp_ = Copresheaf::with_fixed_maps(std::move(g), std::move(dims), std::move(table));
        for (const auto& [edge, w] : weights) s.cp_.set_weight(edge.first, edge.second, w);
        s.verify(tol);
        return s;
    }

    const Copresheaf& copresheaf() const { return cp_; }

    /// Re-checks reversal closure and the transpose/weight convention.
    void verify(double tol = 1e-12) const {
        for (const auto& [src, dst] : cp_.digraph().edges) {
            if (!cp_.digraph().has_edge(dst, src))
                throw SymmetrizationViolation("missing reverse of " + std::to_string(src) + "->" +
                                              std::to_string(dst));
            Tensor fwd = cp_.transport(src, dst);
            Tensor rev = cp_.transport(dst, src);
            Tensor fwd_t = ad::transpose(fwd);
            if (rev.shape() != fwd_t.shape()) throw SymmetrizationViolation("shape mismatch");
            for (int i = 0; i < rev.size(); ++i)
                if (std::abs(rev.at(i) - fwd_t.at(i)) > tol)
                    throw SymmetrizationViolation("transpose convention violated on " +
                                                  std::to_string(src) + "->" + std::to_string(dst));
            if (cp_.weight(src, dst) != cp_.weight(dst, src))
                throw SymmetrizationViolation("weight convention violated");
        }
    }

private:
    Copresheaf cp_;
};

/// Nodewise Laplacian action (L h)_x = sum_{y->x} w (h_x - rho_{y->x} h_y),
/// valid on the symmetrized structure.
inline CochainField laplacian_apply(const SymmetrizedCopresheaf& scp, const CochainField& h) {
    const Copresheaf& cp = scp.copresheaf();
    std::map<int, Tensor> acc;
    for (int v : cp.digraph().vertices) acc[v] = Tensor({cp.stalk_dim(v)});
    for (const auto& [src, dst] : cp.digraph().edges) {
        Tensor d = ad::sub(h.at(dst), cp.push(src, dst, h.at(src)));
        acc[dst] = ad::add(acc[dst], ad::scalar_mul(d, cp.weight(src, dst)));
    }
    CochainField out;
    for (int v : cp.digraph().vertices) out.set(v, acc[v]);
    return out;
}

/// Factored form B^T W B h; agrees with laplacian_apply on symmetrized
/// copresheaves up to roundoff.
inline CochainField laplacian_apply_factored(const SymmetrizedCopresheaf& scp, const CochainField& h) {
    const Copresheaf& cp = scp.copresheaf();
    EdgeField xi = transport_discrepancy(cp, h);
    for (auto& [edge, v] : xi.values) v = ad::scalar_mul(v, cp.weight(edge.first, edge.second));
    return adjoint_apply(cp, xi);
}

/// One explicit gradient step on (1/2) E_rho: h' = (I - eta L_rho) h.
inline CochainField diffusion_step(const SymmetrizedCopresheaf& scp, const CochainField& h,
                                   double eta) {
    CochainField lh = laplacian_apply(scp, h);
    CochainField out;
    for (int v : scp.copresheaf().digraph().vertices)
        out.set(v, ad::sub(h.at(v), ad::scalar_mul(lh.at(v), eta)));
    return out;
}

struct SpectralEstimate {
    double value = 0.0;
    bool converged = true;
    int iterations = 0;
};

/// Power iteration on L_rho with a seeded deterministic start vector.
inline SpectralEstimate spectral_norm_estimate(const SymmetrizedCopresheaf& scp,
                                               int max_iterations = 200, double rel_tol = 1e-8,
                                               std::uint64_t seed = 2024) {
    const Copresheaf& cp = scp.copresheaf();
    if (cp.digraph().edges.empty()) return {0.0, true, 0};

    ad::NoGradGuard pause;
    ad::Rng rng(seed);
    CochainField v;
    double norm2 = 0;
    for (int cell : cp.digraph().vertices) {
        Tensor t = ad::randn({cp.stalk_dim(cell)}, rng);
        norm2 += ad::MapCV(t.data(), t.size()).squaredNorm();
        v.set(cell, t);
    }
    double norm = std::sqrt(norm2);

    SpectralEstimate est;
    double prev = 0;
    for (int it = 0; it < max_iterations; ++it) {
        CochainField lv = laplacian_apply(scp, v);
        double lv_norm2 = 0;
        for (int cell : cp.digraph().vertices)
            lv_norm2 += ad::MapCV(lv.at(cell).data(), lv.at(cell).size()).squaredNorm();
        double lv_norm = std::sqrt(lv_norm2);
        est.iterations = it + 1;
        if (lv_norm == 0.0) return {0.0, true, it + 1};  // start vector in the kernel
        est.value = lv_norm / norm;
        CochainField next;
        for (int cell : cp.digraph().vertices)
            next.set(cell, ad::scalar_mul(lv.at(cell), 1.0 / lv_norm));
        v = next;
        norm = 1.0;
        if (it > 0 && std::abs(est.value - prev) <= rel_tol * std::max(1.0, est.value)) {
            est.converged = true;
            return est;
        }
        prev = est.value;
    }
    est.converged = false;
    return est;
}

/// Dense materialization of L_rho for oracles and kernel identification.
/// O((n d)^2) storage; capped because production paths apply the operator.
inline Eigen::MatrixXd dense_laplacian(const SymmetrizedCopresheaf& scp, int max_total_dim = 64) {
    const Copresheaf& cp = scp.copresheaf();
    std::map<int, int> offset;
    int total = 0;
    for (int v : cp.digraph().vertices) {
        offset[v] = total;
        total += cp.stalk_dim(v);
    }
    if (total > max_total_dim)
        throw Error("dense_laplacian: total dimension " + std::to_string(total) + " exceeds cap " +
                    std::to_string(max_total_dim));
    Eigen::MatrixXd L = Eigen::MatrixXd::Zero(total, total);
    for (const auto& [src, dst] : cp.digraph().edges) {
        const double w = cp.weight(src, dst);
        Tensor rho_t = cp.transport(src, dst);
        const int ds = cp.stalk_dim(src), dd = cp.stalk_dim(dst);
        Eigen::MatrixXd rho(dd, ds);
        for (int i = 0; i < dd; ++i)
            for (int j = 0; j < ds; ++j) rho(i, j) = rho_t.at(i, j);
        const int ox = offset[dst], oy = offset[src];
        L.block(ox, ox, dd, dd) += w * Eigen::MatrixXd::Identity(dd, dd);
        L.block(ox, oy, dd, ds) -= w * rho;
        L.block(oy, ox, ds, dd) -= w * rho.transpose();
        L.block(oy, oy, ds, ds) += w * rho.transpose() * rho;
    }
    return L;
}

/// Flatten a cochain field into the dense vertex ordering used above.
inline Eigen::VectorXd flatten(const SymmetrizedCopresheaf& scp, const CochainField& h) {
    const Copresheaf& cp = scp.copresheaf();
    int total = 0;
    for (int v : cp.digraph().vertices) total += cp.stalk_dim(v);
    Eigen::VectorXd x(total);
    int pos = 0;
    for (int v : cp.digraph().vertices)
        for (int i = 0; i < cp.stalk_dim(v); ++i) x(pos++) = h.at(v).at(i);
    return x;
}

inline CochainField unflatten(const SymmetrizedCopresheaf& scp, const Eigen::VectorXd& x) {
    const Copresheaf& cp = scp.copresheaf();
    CochainField h;
    int pos = 0;
    for (int v : cp.digraph().vertices) {
        Tensor t({cp.stalk_dim(v)});
        for (int i = 0; i < t.size(); ++i) t.mut(i) = x(pos++);
        h.set(v, t);
    }
    return h;
}

/// Orthogonal projector onto ker L_rho from a dense symmetric eigensolve,
/// eigenvalue cutoff 1e-8.
inline Eigen::MatrixXd kernel_projector(const Eigen::MatrixXd& L, double cutoff = 1e-8) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
    Eigen::MatrixXd P = Eigen::MatrixXd::Zero(L.rows(), L.cols());
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i) < cutoff) P += es.eigenvectors().col(i) * es.eigenvectors().col(i).transpose();
    return P;
}

inline int kernel_dim(const Eigen::MatrixXd& L, double cutoff = 1e-8) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(L);
    int k = 0;
    for (int i = 0; i < es.eigenvalues().size(); ++i)
        if (es.eigenvalues()(i) < cutoff) ++k;
    return k;
}

}  // namespace ctnn::lap
