#pragma once

#include <map>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "ctnn/ad/ops.hpp"
#include "ctnn/nn/linear.hpp"

namespace ctnn::cps {

using ad::Tensor;

enum class FamilyKind {
    ConstantIdentity,
    FixedPerEdge,
    General,
    PreLinear,
    DiagonalMlp,
    GraphAttention,
    OuterProduct,
    NonlinearMlp,
    GaussianRbf,
    Dynamic,
    Bilinear,
    SheafFc,
    SheafMlp,
    SheafSpd,
    SharedLoc,
};

inline const char* family_name(FamilyKind k) {
    switch (k) {
        case FamilyKind::ConstantIdentity: return "identity";
        case FamilyKind::FixedPerEdge: return "fixed_per_edge";
        case FamilyKind::General: return "general";
        case FamilyKind::PreLinear: return "pre_linear";
        case FamilyKind::DiagonalMlp: return "diagonal_mlp";
        case FamilyKind::GraphAttention: return "graph_attention";
        case FamilyKind::OuterProduct: return "outer_product";
        case FamilyKind::NonlinearMlp: return "nonlinear_mlp";
        case FamilyKind::GaussianRbf: return "gaussian_rbf";
        case FamilyKind::Dynamic: return "dynamic";
        case FamilyKind::Bilinear: return "bilinear";
        case FamilyKind::SheafFc: return "sheaf_fc";
        case FamilyKind::SheafMlp: return "sheaf_mlp";
        case FamilyKind::SheafSpd: return "sheaf_spd";
        case FamilyKind::SharedLoc: return "shared_loc";
    }
    return "?";
}

/// Parameterized rule producing the edge transport rho_{y->x} from the
/// endpoint conditioning pair. Attention passes (q_x, k_y); GNN/conv contexts
/// pass raw (h_x, h_y); the family does not care which.
///
/// eval() returns the d x d matrix; apply() transports a value vector and
/// shortcuts the rank-one / scalar families so rho never has to be
/// materialized on hot paths.
class TransportFamily {
public:
    TransportFamily() = default;

    static TransportFamily constant_identity(int d) {
        TransportFamily f(FamilyKind::ConstantIdentity, d, 0);
        return f;
    }

    /// Explicit per-edge matrices keyed by (src, dst); supports heterogeneous
    /// stalk dimensions.
    static TransportFamily fixed_per_edge(std::map<std::pair<int, int>, Tensor> table) {
        TransportFamily f(FamilyKind::FixedPerEdge, 0, 0);
        f.table_ = std::move(table);
        return f;
    }

    static TransportFamily general(int cond, int d, ad::Rng& rng) {
        TransportFamily f(FamilyKind::General, d, cond);
        f.w_ = f.make_weight(d * d, 2 * cond, rng, false);
        return f;
    }

    static TransportFamily pre_linear(int d) { return TransportFamily(FamilyKind::PreLinear, d, d); }

    static TransportFamily diagonal_mlp(int cond, int d, ad::Rng& rng) {
        TransportFamily f(FamilyKind::DiagonalMlp, d, cond);
        f.mlp_ = nn::Mlp(2 * cond, 2 * cond, d, rng);
        return f;
    }

    static TransportFamily graph_attention(int cond, int d, ad::Rng& rng) {
        TransportFamily f(FamilyKind::GraphAttention, d, cond);
        f.mlp_ = nn::Mlp(2 * cond, 2 * cond, 1, rng);
        return f;
    }

    static TransportFamily outer_product(int cond, int d, ad::Rng& rng) {
        TransportFamily f(FamilyKind::OuterProduct, d, cond);
        f.w_ = f.make_weight(d, cond, rng, false);
        f.w2_ = f.make_weight(d, cond, rng, false);
        return f;
    }

    static TransportFamily nonlinear_mlp(int cond, int d, ad::Rng& rng) {
        TransportFamily f(FamilyKind::NonlinearMlp, d, cond);
        f.mlp_ = nn::Mlp(2 * cond, 2 * cond, d * d, rng);
        return f;
    }

    static TransportFamily gaussian_rbf(int d) {
        TransportFamily f(FamilyKind::GaussianRbf, d, d);
        f.w_ = Tensor::scalar(1.0);
        f.w_.set_requires_grad();
        return f;
    }

    static TransportFamily dynamic(int cond, int d, ad::Rng& rng) {
        TransportFamily f(FamilyKind::Dynamic, d, cond);
        f.w_ = f.make_weight(d * d, cond, rng, false);
        return f;
    }

    static TransportFamily bilinear(int cond, int d, ad::Rng& rng) {
        TransportFamily f(FamilyKind::Bilinear, d, cond);
        f.w_ = f.make_weight(cond, cond, rng, false);
        return f;
    }

    static TransportFamily sheaf_fc(int cond, int d, ad::Rng& rng) {
        TransportFamily f(FamilyKind::SheafFc, d, cond);
        f.w_ = f.make_weight(d * d, 2 * cond, rng, true);
        (void)rng;
        return f;
    }

    static TransportFamily sheaf_mlp(int cond, int d, ad::Rng& rng) {
        TransportFamily f(FamilyKind::SheafMlp, d, cond);
        f.mlp_ = nn::Mlp(2 * cond, 2 * cond, d * d, rng, /*zero_init_last=*/true);
        return f;
    }

    static TransportFamily sheaf_spd(int cond, int d, ad::Rng& rng) {
        TransportFamily f(FamilyKind::SheafSpd, d, cond);
        f.w_ = f.make_weight(d * d, 2 * cond, rng, true);
        (void)rng;
        return f;
    }

    /// rho = I + sigmoid(MLP)[scalar] * tanh(MLP)[d x d]; identity at init.
    static TransportFamily shared_loc(int cond, int d, ad::Rng& rng) {
        TransportFamily f(FamilyKind::SharedLoc, d, cond);
        f.mlp_ = nn::Mlp(2 * cond, 2 * cond, d * d, rng, /*zero_init_last=*/true);
        f.mlp2_ = nn::Mlp(2 * cond, 2 * cond, 1, rng, /*zero_init_last=*/true);
        return f;
    }

    FamilyKind kind() const { return kind_; }
    int dim() const { return d_; }
    int cond_dim() const { return cond_; }

    bool feature_conditioned() const {
        return kind_ != FamilyKind::ConstantIdentity && kind_ != FamilyKind::FixedPerEdge;
    }

    bool is_identity() const { return kind_ == FamilyKind::ConstantIdentity; }

    /// Matrix for a table-backed edge.
    Tensor eval_edge(int src, int dst) const {
        if (kind_ == FamilyKind::ConstantIdentity) return Tensor::identity(d_);
        if (kind_ != FamilyKind::FixedPerEdge)
            throw DimensionMismatch("eval_edge on a feature-conditioned family");
        auto it = table_.find({src, dst});
        if (it == table_.end())
            throw DimensionMismatch("no transport stored for edge " + std::to_string(src) + "->" +
                                    std::to_string(dst));
        return it->second;
    }

    /// Transport matrix from the conditioning pair (target first, source
    /// second, matching rho_{y->x} = f(q_x, k_y)).
    Tensor eval(const Tensor& tgt, const Tensor& src) const {
        using namespace ad;
        switch (kind_) {
            case FamilyKind::ConstantIdentity:
                return Tensor::identity(d_);
            case FamilyKind::FixedPerEdge:
                throw DimensionMismatch("fixed_per_edge family needs eval_edge(src, dst)");
            case FamilyKind::General:
                return reshape(ad::tanh(matmul(w_, pair(tgt, src))), {d_, d_});
            case FamilyKind::PreLinear:
                check(tgt, src);
                return outer(tgt, src);
            case FamilyKind::DiagonalMlp:
                return diag(sigmoid(mlp_.forward(pair(tgt, src))));
            case FamilyKind::GraphAttention:
                return mul(sigmoid(mlp_.forward(pair(tgt, src))), Tensor::identity(d_));
            case FamilyKind::OuterProduct:
                return outer(matmul(w_, tgt), matmul(w2_, src));
            case FamilyKind::NonlinearMlp:
                return reshape(mlp_.forward(pair(tgt, src)), {d_, d_});
            case FamilyKind::GaussianRbf:
                return mul(rbf_scalar(tgt, src), Tensor::identity(d_));
            case FamilyKind::Dynamic:
                return reshape(matmul(w_, tgt), {d_, d_});
            case FamilyKind::Bilinear:
                return mul(dot(tgt, matmul(w_, src)), Tensor::identity(d_));
            case FamilyKind::SheafFc:
                return add(Tensor::identity(d_), ad::tanh(reshape(matmul(w_, pair(tgt, src)), {d_, d_})));
            case FamilyKind::SheafMlp:
                return add(Tensor::identity(d_), ad::tanh(reshape(mlp_.forward(pair(tgt, src)), {d_, d_})));
            case FamilyKind::SheafSpd: {
                Tensor q = reshape(matmul(w_, pair(tgt, src)), {d_, d_});
                return add(Tensor::identity(d_), matmul(q, transpose(q)));
            }
            case FamilyKind::SharedLoc: {
                Tensor delta = ad::tanh(reshape(mlp_.forward(pair(tgt, src)), {d_, d_}));
                Tensor alpha = sigmoid(mlp2_.forward(pair(tgt, src)));
                return add(Tensor::identity(d_), mul(alpha, delta));
            }
        }
        throw DimensionMismatch("unknown family kind");
    }

    /// rho(tgt, src) * v without materializing rho where a cheaper route
    /// exists (identity, rank-one, scalar and diagonal families).
    Tensor apply(const Tensor& tgt, const Tensor& src, const Tensor& v) const {
        using namespace ad;
        switch (kind_) {
            case FamilyKind::ConstantIdentity:
                return v;
            case FamilyKind::PreLinear:
                check(tgt, src);
                return mul(dot(src, v), tgt);
            case FamilyKind::OuterProduct:
                return mul(dot(matmul(w2_, src), v), matmul(w_, tgt));
            case FamilyKind::GraphAttention:
                return mul(sigmoid(mlp_.forward(pair(tgt, src))), v);
            case FamilyKind::GaussianRbf:
                return mul(rbf_scalar(tgt, src), v);
            case FamilyKind::Bilinear:
                return mul(dot(tgt, matmul(w_, src)), v);
            case FamilyKind::DiagonalMlp:
                return mul(sigmoid(mlp_.forward(pair(tgt, src))), v);
            default:
                return matmul(eval(tgt, src), v);
        }
    }

    Tensor apply_edge(int src, int dst, const Tensor& v) const {
        if (kind_ == FamilyKind::ConstantIdentity) return v;
        return ad::matmul(eval_edge(src, dst), v);
    }

    void collect(const std::string& prefix, nn::ParamRefs& out) {
        if (w_.defined() && w_.requires_grad()) out.emplace_back(prefix + ".w", &w_);
        if (w2_.defined() && w2_.requires_grad()) out.emplace_back(prefix + ".w2", &w2_);
        if (mlp_.defined()) mlp_.collect(prefix + ".mlp", out);
        if (mlp2_.defined()) mlp2_.collect(prefix + ".mlp2", out);
    }

private:
    TransportFamily(FamilyKind kind, int d, int cond) : kind_(kind), d_(d), cond_(cond) {}

    Tensor make_weight(int out, int in, ad::Rng& rng, bool zero) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        Tensor w = zero ? Tensor::zeros({out, in}) : ad::randu({out, in}, rng, -bound, bound);
        w.set_requires_grad();
        return w;
    }

    static Tensor pair(const Tensor& a, const Tensor& b) { return ad::concat({a, b}, 0); }

    void check(const Tensor& tgt, const Tensor& src) const {
        if (tgt.size() != d_ || src.size() != d_)
            throw DimensionMismatch("family of dim " + std::to_string(d_) + " conditioned on " +
                                    Tensor::shape_str(tgt.shape()) + ", " +
                                    Tensor::shape_str(src.shape()));
    }

    /// exp(-|q - k|^2 / (2 sigma^2)) with sigma floored at 1e-3.
    Tensor rbf_scalar(const Tensor& tgt, const Tensor& src) const {
        using namespace ad;
        Tensor d = sub(tgt, src);
        Tensor s = dot(d, d);
        Tensor sf = clamp_min(w_, 1e-3);
        return ad::exp(neg(div(s, scalar_mul(mul(sf, sf), 2.0))));
    }

    FamilyKind kind_ = FamilyKind::ConstantIdentity;
    int d_ = 0;
    int cond_ = 0;
    Tensor w_, w2_;
    nn::Mlp mlp_, mlp2_;
    std::map<std::pair<int, int>, Tensor> table_;
};

}  // namespace ctnn::cps
