#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "ctnn/error.hpp"

namespace ctnn::ad {

class Tape;

namespace detail {
struct Storage {
    std::vector<double> data;
    std::vector<double> grad;  // materialized by Tape::backward for trainable leaves
    bool requires_grad = false;
};
inline std::uint64_t next_epoch() {
    static std::uint64_t counter = 0;
    return ++counter;
}
}  // namespace detail

/// Dense row-major 64-bit tensor. Copies share the underlying buffer; ops
/// return fresh tensors. If a Tape is active and an input participates in
/// differentiation, the op records itself on the tape.
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<int> shape)
        : shape_(std::move(shape)), st_(std::make_shared<detail::Storage>()) {
        st_->data.assign(count(shape_), 0.0);
    }

    Tensor(std::vector<int> shape, std::vector<double> values)
        : shape_(std::move(shape)), st_(std::make_shared<detail::Storage>()) {
        if (static_cast<std::size_t>(count(shape_)) != values.size())
            throw ShapeMismatch("tensor init: " + shape_str(shape_) + " vs " +
                                std::to_string(values.size()) + " values");
        st_->data = std::move(values);
    }

    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    static Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

    static Tensor full(std::vector<int> shape, double v) {
        Tensor t(std::move(shape));
        std::fill(t.data(), t.data() + t.size(), v);
        return t;
    }

    static Tensor identity(int n) {
        Tensor t({n, n});
        for (int i = 0; i < n; ++i) t.data()[i * n + i] = 1.0;
        return t;
    }

    bool defined() const { return static_cast<bool>(st_); }
    const std::vector<int>& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
    int size() const { return count(shape_); }

    double* data() { return st_->data.data(); }
    const double* data() const { return st_->data.data(); }

    double at(int i) const { return st_->data[static_cast<std::size_t>(i)]; }
    double at(int i, int j) const { return st_->data[static_cast<std::size_t>(i) * shape_[1] + j]; }
    double& mut(int i) { return st_->data[static_cast<std::size_t>(i)]; }
    double& mut(int i, int j) { return st_->data[static_cast<std::size_t>(i) * shape_[1] + j]; }

    double value() const {
        if (size() != 1) throw ShapeMismatch("value() on non-scalar " + shape_str(shape_));
        return st_->data[0];
    }

    Tensor& set_requires_grad(bool on = true) {
        st_->requires_grad = on;
        return *this;
    }
    bool requires_grad() const { return st_ && st_->requires_grad; }

    /// Gradient buffer; empty until a backward pass has reached this leaf.
    const std::vector<double>& grad() const { return st_->grad; }
    void zero_grad() { st_->grad.assign(st_->data.size(), 0.0); }

    /// Value copy detached from any tape.
    Tensor detached() const { return Tensor(shape_, st_->data); }

    std::shared_ptr<detail::Storage> storage() const { return st_; }

    static int count(const std::vector<int>& shape) {
        int n = 1;
        for (int d : shape) n *= d;
        return n;
    }

    static std::string shape_str(const std::vector<int>& shape) {
        std::ostringstream os;
        os << '(';
        for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
        os << ')';
        return os.str();
    }

private:
    std::vector<int> shape_;
    std::shared_ptr<detail::Storage> st_;

    mutable int node_ = -1;
    mutable std::uint64_t epoch_ = 0;
    friend class Tape;
};

/// Reverse-mode tape. Activates on construction (thread-local stack) and
/// records every op whose inputs participate in differentiation. backward()
/// runs one reverse sweep, deposits gradients into trainable leaves, and
/// frees the recording.
class Tape {
public:
    Tape() : epoch_(detail::next_epoch()) { stack().push_back(this); }
    ~Tape() { stack().pop_back(); }
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    static Tape* current() { return stack().empty() ? nullptr : stack().back(); }

    /// Node id for an input tensor: existing node, a fresh leaf if the tensor
    /// is trainable, or -1 for constants.
    int input_node(const Tensor& t) {
        if (t.epoch_ == epoch_ && t.node_ >= 0) return t.node_;
        if (!t.requires_grad()) return -1;
        Rec rec;
        rec.size = t.size();
        rec.leaf = t.storage();
        recs_.push_back(std::move(rec));
        t.node_ = static_cast<int>(recs_.size()) - 1;
        t.epoch_ = epoch_;
        return t.node_;
    }

    using Pull = std::function<void(Tape&, const double*)>;

    void record(const Tensor& out, std::vector<int> parents, Pull pull) {
        Rec rec;
        rec.size = out.size();
        rec.parents = std::move(parents);
        rec.pull = std::move(pull);
        recs_.push_back(std::move(rec));
        out.node_ = static_cast<int>(recs_.size()) - 1;
        out.epoch_ = epoch_;
    }

    /// Adjoint buffer for a node, zero-initialized on first touch.
    double* adj(int node) {
        auto& a = adjoints_[static_cast<std::size_t>(node)];
        if (a.empty()) a.assign(static_cast<std::size_t>(recs_[static_cast<std::size_t>(node)].size), 0.0);
        return a.data();
    }

    /// Reverse sweep from a scalar loss. Gradients accumulate (+=) into the
    /// grad buffers of trainable leaves, in tape order. The recording is
    /// cleared afterwards and the tape can be reused.
    void backward(const Tensor& loss) {
        if (loss.size() != 1) throw NotScalarLoss("loss has shape " + Tensor::shape_str(loss.shape()));
        if (loss.epoch_ != epoch_ || loss.node_ < 0)
            throw DetachedTensor("loss was not produced on the active tape");
        const int root = loss.node_;

        std::vector<char> reach(recs_.size(), 0);
        reach[static_cast<std::size_t>(root)] = 1;
        for (int i = root; i >= 0; --i) {
            if (!reach[static_cast<std::size_t>(i)]) continue;
            for (int p : recs_[static_cast<std::size_t>(i)].parents)
                if (p >= 0) reach[static_cast<std::size_t>(p)] = 1;
        }

        adjoints_.assign(recs_.size(), {});
        adj(root)[0] = 1.0;
        for (int i = root; i >= 0; --i) {
            auto& rec = recs_[static_cast<std::size_t>(i)];
            if (!reach[static_cast<std::size_t>(i)]) continue;
            if (rec.pull && !adjoints_[static_cast<std::size_t>(i)].empty())
                rec.pull(*this, adjoints_[static_cast<std::size_t>(i)].data());
        }
        for (std::size_t i = 0; i < recs_.size(); ++i) {
            auto& rec = recs_[i];
            if (!rec.leaf || !reach[i] || adjoints_[i].empty()) continue;
            if (rec.leaf->grad.empty()) rec.leaf->grad.assign(rec.leaf->data.size(), 0.0);
            for (std::size_t k = 0; k < adjoints_[i].size(); ++k) rec.leaf->grad[k] += adjoints_[i][k];
        }

        recs_.clear();
        adjoints_.clear();
        epoch_ = detail::next_epoch();
    }

    std::size_t node_count() const { return recs_.size(); }

private:
    struct Rec {
        std::vector<int> parents;
        Pull pull;                               // empty for leaves
        std::shared_ptr<detail::Storage> leaf;   // set for leaves only
        int size = 0;
    };

    static std::vector<Tape*>& stack() {
        thread_local std::vector<Tape*> s;
        return s;
    }

    std::vector<Rec> recs_;
    std::vector<std::vector<double>> adjoints_;
    std::uint64_t epoch_;

    friend struct NoGradGuard;
};

/// Suspends recording within a scope (oracle evaluations, metrics).
struct NoGradGuard {
    NoGradGuard() { Tape::stack().push_back(nullptr); }
    ~NoGradGuard() { Tape::stack().pop_back(); }
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;
};

}  // namespace ctnn::ad
