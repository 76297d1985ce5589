#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ctnn/ad/ops.hpp"
#include "ctnn/ad/rng.hpp"

namespace ctnn::nn {

using ad::Tensor;

/// Named trainable tensors of a module, for optimizers and serialization.
using ParamRefs = std::vector<std::pair<std::string, Tensor*>>;

/// Affine map with uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init; zero_init
/// zeroes both weight and bias (the sheaf-family convention).
class Linear {
public:
    Linear() = default;

    Linear(int in, int out, ad::Rng& rng, bool zero_init = false) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(in));
        w_ = zero_init ? Tensor::zeros({out, in}) : ad::randu({out, in}, rng, -bound, bound);
        b_ = zero_init ? Tensor::zeros({out}) : ad::randu({out}, rng, -bound, bound);
        w_.set_requires_grad();
        b_.set_requires_grad();
    }

    Tensor forward(const Tensor& x) const { return ad::add(ad::matmul(w_, x), b_); }

    /// Rows of X are independent items: Y = X W^T + b.
    Tensor forward_rows(const Tensor& x) const {
        return ad::add_rows(ad::matmul(x, ad::transpose(w_)), b_);
    }

    Tensor& weight() { return w_; }
    Tensor& bias() { return b_; }
    const Tensor& weight() const { return w_; }
    const Tensor& bias() const { return b_; }
    int in_dim() const { return w_.dim(1); }
    int out_dim() const { return w_.dim(0); }
    bool defined() const { return w_.defined(); }

    void collect(const std::string& prefix, ParamRefs& out) {
        out.emplace_back(prefix + ".w", &w_);
        out.emplace_back(prefix + ".b", &b_);
    }

private:
    Tensor w_, b_;
};

/// Two-layer perceptron with tanh hidden activation and linear output.
class Mlp {
public:
    Mlp() = default;

    Mlp(int in, int hidden, int out, ad::Rng& rng, bool zero_init_last = false)
        : l1_(in, hidden, rng), l2_(hidden, out, rng, zero_init_last) {}

    Tensor forward(const Tensor& x) const { return l2_.forward(ad::tanh(l1_.forward(x))); }

    Tensor forward_rows(const Tensor& x) const {
        return l2_.forward_rows(ad::tanh(l1_.forward_rows(x)));
    }

    bool defined() const { return l1_.defined(); }

    void collect(const std::string& prefix, ParamRefs& out) {
        l1_.collect(prefix + ".l1", out);
        l2_.collect(prefix + ".l2", out);
    }

private:
    Linear l1_, l2_;
};

}  // namespace ctnn::nn
