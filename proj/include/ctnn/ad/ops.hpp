#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

#include "ctnn/ad/rng.hpp"
#include "ctnn/ad/tensor.hpp"

namespace ctnn::ad {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using MapCM = Eigen::Map<const EMat>;
using MapV = Eigen::Map<Eigen::VectorXd>;
using MapCV = Eigen::Map<const Eigen::VectorXd>;

namespace detail {

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.shape() != b.shape())
        throw ShapeMismatch(std::string(op) + ": " + Tensor::shape_str(a.shape()) + " vs " +
                            Tensor::shape_str(b.shape()));
}

struct Ctx {
    Tape* tape = nullptr;
    int pa = -1;
    int pb = -1;
    bool on() const { return tape && (pa >= 0 || pb >= 0); }
};

inline Ctx ctx(const Tensor& a) {
    Ctx c;
    c.tape = Tape::current();
    if (c.tape) c.pa = c.tape->input_node(a);
    return c;
}

inline Ctx ctx(const Tensor& a, const Tensor& b) {
    Ctx c;
    c.tape = Tape::current();
    if (c.tape) {
        c.pa = c.tape->input_node(a);
        c.pb = c.tape->input_node(b);
    }
    return c;
}

}  // namespace detail

// ---- random initialization -------------------------------------------------

inline Tensor randu(std::vector<int> shape, Rng& rng, double lo, double hi) {
    Tensor t(std::move(shape));
    for (int i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

inline Tensor randn(std::vector<int> shape, Rng& rng, double stddev = 1.0) {
    Tensor t(std::move(shape));
    for (int i = 0; i < t.size(); ++i) t.data()[i] = stddev * rng.normal();
    return t;
}

// ---- elementwise arithmetic (scalar-with-tensor broadcast only) ------------

namespace detail {

enum class EwKind { Add, Sub, Mul, Div };

inline Tensor elementwise(const Tensor& a, const Tensor& b, EwKind kind, const char* name) {
    const bool sa = a.size() == 1 && b.size() > 1;
    const bool sb = b.size() == 1 && a.size() > 1;
    if (!sa && !sb) check_same_shape(a, b, name);
    const Tensor& big = sa ? b : a;
    Tensor out(big.shape());
    const int n = out.size();
    const double* pa = a.data();
    const double* pb = b.data();
    double* po = out.data();
    for (int i = 0; i < n; ++i) {
        const double x = sa ? pa[0] : pa[i];
        const double y = sb ? pb[0] : pb[i];
        switch (kind) {
            case EwKind::Add: po[i] = x + y; break;
            case EwKind::Sub: po[i] = x - y; break;
            case EwKind::Mul: po[i] = x * y; break;
            case EwKind::Div: po[i] = x / y; break;
        }
    }
    auto c = ctx(a, b);
    if (c.on()) {
        auto sta = a.storage();
        auto stb = b.storage();
        const int pa_id = c.pa, pb_id = c.pb;
        c.tape->record(out, {pa_id, pb_id}, [=](Tape& t, const double* g) {
            const double* da = sta->data.data();
            const double* db = stb->data.data();
            if (pa_id >= 0) {
                double* ga = t.adj(pa_id);
                for (int i = 0; i < n; ++i) {
                    const double y = sb ? db[0] : db[i];
                    double v = 0;
                    switch (kind) {
                        case EwKind::Add: v = g[i]; break;
                        case EwKind::Sub: v = g[i]; break;
                        case EwKind::Mul: v = g[i] * y; break;
                        case EwKind::Div: v = g[i] / y; break;
                    }
                    ga[sa ? 0 : i] += v;
                }
            }
            if (pb_id >= 0) {
                double* gb = t.adj(pb_id);
                for (int i = 0; i < n; ++i) {
                    const double x = sa ? da[0] : da[i];
                    const double y = sb ? db[0] : db[i];
                    double v = 0;
                    switch (kind) {
                        case EwKind::Add: v = g[i]; break;
                        case EwKind::Sub: v = -g[i]; break;
                        case EwKind::Mul: v = g[i] * x; break;
                        case EwKind::Div: v = -g[i] * x / (y * y); break;
                    }
                    gb[sb ? 0 : i] += v;
                }
            }
        });
    }
    return out;
}

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) { return detail::elementwise(a, b, detail::EwKind::Add, "add"); }
inline Tensor sub(const Tensor& a, const Tensor& b) { return detail::elementwise(a, b, detail::EwKind::Sub, "sub"); }
inline Tensor mul(const Tensor& a, const Tensor& b) { return detail::elementwise(a, b, detail::EwKind::Mul, "mul"); }
inline Tensor div(const Tensor& a, const Tensor& b) { return detail::elementwise(a, b, detail::EwKind::Div, "div"); }

inline Tensor scalar_mul(const Tensor& a, double cval) {
    Tensor out(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) out.data()[i] = cval * a.data()[i];
    auto c = detail::ctx(a);
    if (c.on()) {
        const int pa = c.pa;
        c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
            double* ga = t.adj(pa);
            for (int i = 0; i < n; ++i) ga[i] += cval * g[i];
        });
    }
    return out;
}

inline Tensor neg(const Tensor& a) { return scalar_mul(a, -1.0); }

// ---- linear algebra ---------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() == 2 && b.rank() == 2) {
        const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
        if (b.dim(0) != k)
            throw ShapeMismatch("matmul: " + Tensor::shape_str(a.shape()) + " x " +
                                Tensor::shape_str(b.shape()));
        Tensor out({m, n});
        MapM(out.data(), m, n).noalias() = MapCM(a.data(), m, k) * MapCM(b.data(), k, n);
        auto c = detail::ctx(a, b);
        if (c.on()) {
            auto sta = a.storage();
            auto stb = b.storage();
            const int pa = c.pa, pb = c.pb;
            c.tape->record(out, {pa, pb}, [=](Tape& t, const double* g) {
                MapCM G(g, m, n);
                if (pa >= 0) MapM(t.adj(pa), m, k).noalias() += G * MapCM(stb->data.data(), k, n).transpose();
                if (pb >= 0) MapM(t.adj(pb), k, n).noalias() += MapCM(sta->data.data(), m, k).transpose() * G;
            });
        }
        return out;
    }
    if (a.rank() == 2 && b.rank() == 1) {
        const int m = a.dim(0), k = a.dim(1);
        if (b.dim(0) != k)
            throw ShapeMismatch("matmul: " + Tensor::shape_str(a.shape()) + " x " +
                                Tensor::shape_str(b.shape()));
        Tensor out({m});
        MapV(out.data(), m).noalias() = MapCM(a.data(), m, k) * MapCV(b.data(), k);
        auto c = detail::ctx(a, b);
        if (c.on()) {
            auto sta = a.storage();
            auto stb = b.storage();
            const int pa = c.pa, pb = c.pb;
            c.tape->record(out, {pa, pb}, [=](Tape& t, const double* g) {
                MapCV G(g, m);
                if (pa >= 0) MapM(t.adj(pa), m, k).noalias() += G * MapCV(stb->data.data(), k).transpose();
                if (pb >= 0) MapV(t.adj(pb), k).noalias() += MapCM(sta->data.data(), m, k).transpose() * G;
            });
        }
        return out;
    }
    throw ShapeMismatch("matmul expects 2D x 2D or 2D x 1D, got " + Tensor::shape_str(a.shape()) +
                        " x " + Tensor::shape_str(b.shape()));
}

inline Tensor transpose(const Tensor& a) {
    if (a.rank() != 2) throw ShapeMismatch("transpose expects 2D, got " + Tensor::shape_str(a.shape()));
    const int m = a.dim(0), n = a.dim(1);
    Tensor out({n, m});
    MapM(out.data(), n, m) = MapCM(a.data(), m, n).transpose();
    auto c = detail::ctx(a);
    if (c.on()) {
        const int pa = c.pa;
        c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
            MapM(t.adj(pa), m, n) += MapCM(g, n, m).transpose();
        });
    }
    return out;
}

inline Tensor outer(const Tensor& a, const Tensor& b) {
    if (a.rank() != 1 || b.rank() != 1)
        throw ShapeMismatch("outer expects vectors, got " + Tensor::shape_str(a.shape()) + ", " +
                            Tensor::shape_str(b.shape()));
    const int m = a.dim(0), n = b.dim(0);
    Tensor out({m, n});
    MapM(out.data(), m, n).noalias() = MapCV(a.data(), m) * MapCV(b.data(), n).transpose();
    auto c = detail::ctx(a, b);
    if (c.on()) {
        auto sta = a.storage();
        auto stb = b.storage();
        const int pa = c.pa, pb = c.pb;
        c.tape->record(out, {pa, pb}, [=](Tape& t, const double* g) {
            MapCM G(g, m, n);
            if (pa >= 0) MapV(t.adj(pa), m).noalias() += G * MapCV(stb->data.data(), n);
            if (pb >= 0) MapV(t.adj(pb), n).noalias() += G.transpose() * MapCV(sta->data.data(), m);
        });
    }
    return out;
}

inline Tensor dot(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "dot");
    const int n = a.size();
    Tensor out = Tensor::scalar(MapCV(a.data(), n).dot(MapCV(b.data(), n)));
    auto c = detail::ctx(a, b);
    if (c.on()) {
        auto sta = a.storage();
        auto stb = b.storage();
        const int pa = c.pa, pb = c.pb;
        c.tape->record(out, {pa, pb}, [=](Tape& t, const double* g) {
            if (pa >= 0) MapV(t.adj(pa), n) += g[0] * MapCV(stb->data.data(), n);
            if (pb >= 0) MapV(t.adj(pb), n) += g[0] * MapCV(sta->data.data(), n);
        });
    }
    return out;
}

// ---- pointwise nonlinearities ----------------------------------------------

namespace detail {

template <typename F, typename DF>
Tensor pointwise(const Tensor& a, F f, DF dfdy_from, bool deriv_uses_output) {
    Tensor out(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) out.data()[i] = f(a.data()[i]);
    auto c = ctx(a);
    if (c.on()) {
        auto st = deriv_uses_output ? out.storage() : a.storage();
        const int pa = c.pa;
        c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
            double* ga = t.adj(pa);
            const double* v = st->data.data();
            for (int i = 0; i < n; ++i) ga[i] += g[i] * dfdy_from(v[i]);
        });
    }
    return out;
}

}  // namespace detail

inline Tensor tanh(const Tensor& a) {
    return detail::pointwise(a, [](double x) { return std::tanh(x); },
                             [](double y) { return 1.0 - y * y; }, true);
}

inline Tensor sigmoid(const Tensor& a) {
    return detail::pointwise(a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                             [](double y) { return y * (1.0 - y); }, true);
}

inline Tensor exp(const Tensor& a) {
    return detail::pointwise(a, [](double x) { return std::exp(x); },
                             [](double y) { return y; }, true);
}

inline Tensor log(const Tensor& a) {
    return detail::pointwise(a, [](double x) { return std::log(x); },
                             [](double x) { return 1.0 / x; }, false);
}

// ---- reductions --------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
    Tensor out = Tensor::scalar(MapCV(a.data(), a.size()).sum());
    auto c = detail::ctx(a);
    if (c.on()) {
        const int pa = c.pa, n = a.size();
        c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
            double* ga = t.adj(pa);
            for (int i = 0; i < n; ++i) ga[i] += g[0];
        });
    }
    return out;
}

inline Tensor mean(const Tensor& a) {
    const int n = a.size();
    Tensor out = Tensor::scalar(MapCV(a.data(), n).sum() / n);
    auto c = detail::ctx(a);
    if (c.on()) {
        const int pa = c.pa;
        c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
            double* ga = t.adj(pa);
            const double s = g[0] / n;
            for (int i = 0; i < n; ++i) ga[i] += s;
        });
    }
    return out;
}

/// Sum of a 2D tensor along an axis: axis 0 collapses rows (result length
/// cols), axis 1 collapses columns (result length rows).
inline Tensor sum_axis(const Tensor& a, int axis) {
    if (a.rank() != 2 || (axis != 0 && axis != 1))
        throw ShapeMismatch("sum_axis expects 2D, got " + Tensor::shape_str(a.shape()));
    const int m = a.dim(0), n = a.dim(1);
    Tensor out({axis == 0 ? n : m});
    MapCM A(a.data(), m, n);
    if (axis == 0)
        MapV(out.data(), n) = A.colwise().sum().transpose();
    else
        MapV(out.data(), m) = A.rowwise().sum();
    auto c = detail::ctx(a);
    if (c.on()) {
        const int pa = c.pa;
        c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
            MapM GA(t.adj(pa), m, n);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) GA(i, j) += g[axis == 0 ? j : i];
        });
    }
    return out;
}

inline Tensor mean_axis(const Tensor& a, int axis) {
    const double denom = axis == 0 ? a.dim(0) : a.dim(1);
    return scalar_mul(sum_axis(a, axis), 1.0 / denom);
}

// ---- shape ops ----------------------------------------------------------------

inline Tensor reshape(const Tensor& a, std::vector<int> shape) {
    if (Tensor::count(shape) != a.size())
        throw ShapeMismatch("reshape " + Tensor::shape_str(a.shape()) + " -> " + Tensor::shape_str(shape));
    Tensor out(std::move(shape), std::vector<double>(a.data(), a.data() + a.size()));
    auto c = detail::ctx(a);
    if (c.on()) {
        const int pa = c.pa, n = a.size();
        c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
            double* ga = t.adj(pa);
            for (int i = 0; i < n; ++i) ga[i] += g[i];
        });
    }
    return out;
}

inline Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) throw ShapeMismatch("concat of zero tensors");
    const int rk = parts[0].rank();
    if (rk == 1 && axis == 0) {
        int total = 0;
        for (const auto& p : parts) {
            if (p.rank() != 1) throw ShapeMismatch("concat axis 0: mixed ranks");
            total += p.dim(0);
        }
        Tensor out({total});
        int off = 0;
        for (const auto& p : parts) {
            std::copy(p.data(), p.data() + p.size(), out.data() + off);
            off += p.size();
        }
        Tape* tape = Tape::current();
        if (tape) {
            std::vector<int> ids(parts.size());
            std::vector<int> sizes(parts.size());
            bool any = false;
            for (std::size_t i = 0; i < parts.size(); ++i) {
                ids[i] = tape->input_node(parts[i]);
                sizes[i] = parts[i].size();
                any = any || ids[i] >= 0;
            }
            if (any)
                tape->record(out, ids, [=](Tape& t, const double* g) {
                    int o = 0;
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                        if (ids[i] >= 0) {
                            double* ga = t.adj(ids[i]);
                            for (int k = 0; k < sizes[i]; ++k) ga[k] += g[o + k];
                        }
                        o += sizes[i];
                    }
                });
        }
        return out;
    }
    if (rk == 2) {
        const int m = parts[0].dim(0), n = parts[0].dim(1);
        int rows = 0, cols = 0;
        for (const auto& p : parts) {
            if (p.rank() != 2) throw ShapeMismatch("concat: mixed ranks");
            if (axis == 0 && p.dim(1) != n) throw ShapeMismatch("concat axis 0: col mismatch");
            if (axis == 1 && p.dim(0) != m) throw ShapeMismatch("concat axis 1: row mismatch");
            rows += p.dim(0);
            cols += p.dim(1);
        }
        Tensor out(axis == 0 ? std::vector<int>{rows, n} : std::vector<int>{m, cols});
        if (axis == 0) {
            int ro = 0;
            for (const auto& p : parts) {
                std::copy(p.data(), p.data() + p.size(), out.data() + ro * n);
                ro += p.dim(0);
            }
        } else {
            int co = 0;
            for (const auto& p : parts) {
                for (int i = 0; i < m; ++i)
                    std::copy(p.data() + i * p.dim(1), p.data() + (i + 1) * p.dim(1),
                              out.data() + i * cols + co);
                co += p.dim(1);
            }
        }
        Tape* tape = Tape::current();
        if (tape) {
            std::vector<int> ids(parts.size());
            std::vector<std::vector<int>> shapes(parts.size());
            bool any = false;
            for (std::size_t i = 0; i < parts.size(); ++i) {
                ids[i] = tape->input_node(parts[i]);
                shapes[i] = parts[i].shape();
                any = any || ids[i] >= 0;
            }
            if (any) {
                const int outcols = out.dim(1);
                tape->record(out, ids, [=](Tape& t, const double* g) {
                    int ro = 0, co = 0;
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                        const int pm = shapes[i][0], pn = shapes[i][1];
                        if (ids[i] >= 0) {
                            double* ga = t.adj(ids[i]);
                            for (int r = 0; r < pm; ++r)
                                for (int q = 0; q < pn; ++q)
                                    ga[r * pn + q] +=
                                        axis == 0 ? g[(ro + r) * outcols + q] : g[r * outcols + co + q];
                        }
                        if (axis == 0) ro += pm; else co += pn;
                    }
                });
            }
        }
        return out;
    }
    throw ShapeMismatch("concat supports 1D axis 0 and 2D axes 0/1");
}

inline Tensor slice(const Tensor& a, int axis, int start, int end) {
    if (start < 0 || end > a.dim(axis) || start >= end)
        throw ShapeMismatch("slice [" + std::to_string(start) + "," + std::to_string(end) + ") of " +
                            Tensor::shape_str(a.shape()));
    if (a.rank() == 1) {
        const int len = end - start;
        Tensor out({len}, std::vector<double>(a.data() + start, a.data() + end));
        auto c = detail::ctx(a);
        if (c.on()) {
            const int pa = c.pa;
            c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
                double* ga = t.adj(pa);
                for (int i = 0; i < len; ++i) ga[start + i] += g[i];
            });
        }
        return out;
    }
    if (a.rank() == 2) {
        const int m = a.dim(0), n = a.dim(1);
        if (axis == 0) {
            const int len = end - start;
            Tensor out({len, n}, std::vector<double>(a.data() + start * n, a.data() + end * n));
            auto c = detail::ctx(a);
            if (c.on()) {
                const int pa = c.pa;
                c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
                    double* ga = t.adj(pa);
                    for (int i = 0; i < len * n; ++i) ga[start * n + i] += g[i];
                });
            }
            return out;
        }
        const int len = end - start;
        Tensor out({m, len});
        for (int i = 0; i < m; ++i)
            std::copy(a.data() + i * n + start, a.data() + i * n + end, out.data() + i * len);
        auto c = detail::ctx(a);
        if (c.on()) {
            const int pa = c.pa;
            c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
                double* ga = t.adj(pa);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < len; ++j) ga[i * n + start + j] += g[i * len + j];
            });
        }
        return out;
    }
    throw ShapeMismatch("slice supports 1D/2D");
}

/// Row i of a 2D tensor as a vector.
inline Tensor row(const Tensor& a, int i) {
    if (a.rank() != 2) throw ShapeMismatch("row expects 2D");
    const int n = a.dim(1);
    Tensor out({n}, std::vector<double>(a.data() + i * n, a.data() + (i + 1) * n));
    auto c = detail::ctx(a);
    if (c.on()) {
        const int pa = c.pa;
        c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
            double* ga = t.adj(pa);
            for (int j = 0; j < n; ++j) ga[i * n + j] += g[j];
        });
    }
    return out;
}

// ---- row-structured helpers ----------------------------------------------------

/// Y[i,j] = s[i] * X[i,j].
inline Tensor scale_rows(const Tensor& x, const Tensor& s) {
    if (x.rank() != 2 || s.rank() != 1 || s.dim(0) != x.dim(0))
        throw ShapeMismatch("scale_rows: " + Tensor::shape_str(x.shape()) + " vs " +
                            Tensor::shape_str(s.shape()));
    const int m = x.dim(0), n = x.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.data()[i * n + j] = s.at(i) * x.at(i, j);
    auto c = detail::ctx(x, s);
    if (c.on()) {
        auto stx = x.storage();
        auto sts = s.storage();
        const int px = c.pa, ps = c.pb;
        c.tape->record(out, {px, ps}, [=](Tape& t, const double* g) {
            if (px >= 0) {
                double* gx = t.adj(px);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) gx[i * n + j] += g[i * n + j] * sts->data[i];
            }
            if (ps >= 0) {
                double* gs = t.adj(ps);
                for (int i = 0; i < m; ++i) {
                    double acc = 0;
                    for (int j = 0; j < n; ++j) acc += g[i * n + j] * stx->data[i * n + j];
                    gs[i] += acc;
                }
            }
        });
    }
    return out;
}

/// Y[i,j] = X[i,j] + b[j] (bias broadcast over rows).
inline Tensor add_rows(const Tensor& x, const Tensor& b) {
    if (x.rank() != 2 || b.rank() != 1 || b.dim(0) != x.dim(1))
        throw ShapeMismatch("add_rows: " + Tensor::shape_str(x.shape()) + " vs " +
                            Tensor::shape_str(b.shape()));
    const int m = x.dim(0), n = x.dim(1);
    Tensor out({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) out.data()[i * n + j] = x.at(i, j) + b.at(j);
    auto c = detail::ctx(x, b);
    if (c.on()) {
        const int px = c.pa, pb = c.pb;
        c.tape->record(out, {px, pb}, [=](Tape& t, const double* g) {
            if (px >= 0) {
                double* gx = t.adj(px);
                for (int i = 0; i < m * n; ++i) gx[i] += g[i];
            }
            if (pb >= 0) {
                double* gb = t.adj(pb);
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < n; ++j) gb[j] += g[i * n + j];
            }
        });
    }
    return out;
}

/// Square matrix with v on the diagonal.
inline Tensor diag(const Tensor& v) {
    if (v.rank() != 1) throw ShapeMismatch("diag expects a vector");
    const int n = v.dim(0);
    Tensor out({n, n});
    for (int i = 0; i < n; ++i) out.mut(i, i) = v.at(i);
    auto c = detail::ctx(v);
    if (c.on()) {
        const int pa = c.pa;
        c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
            double* gv = t.adj(pa);
            for (int i = 0; i < n; ++i) gv[i] += g[i * n + i];
        });
    }
    return out;
}

/// max(x, lo) elementwise; gradient passes through only above the floor.
inline Tensor clamp_min(const Tensor& a, double lo) {
    Tensor out(a.shape());
    const int n = a.size();
    for (int i = 0; i < n; ++i) out.data()[i] = std::max(a.data()[i], lo);
    auto c = detail::ctx(a);
    if (c.on()) {
        auto sta = a.storage();
        const int pa = c.pa;
        c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
            double* ga = t.adj(pa);
            for (int i = 0; i < n; ++i)
                if (sta->data[static_cast<std::size_t>(i)] > lo) ga[i] += g[i];
        });
    }
    return out;
}

// ---- softmax and losses ----------------------------------------------------------

namespace detail {

inline void softmax_inplace(const double* x, double* y, int n) {
    double mx = x[0];
    for (int i = 1; i < n; ++i) mx = std::max(mx, x[i]);
    double z = 0;
    for (int i = 0; i < n; ++i) {
        y[i] = std::exp(x[i] - mx);
        z += y[i];
    }
    for (int i = 0; i < n; ++i) y[i] /= z;
}

}  // namespace detail

/// Softmax over the last axis: whole vector for 1D, each row for 2D.
inline Tensor softmax(const Tensor& a) {
    if (a.rank() == 1) {
        const int n = a.dim(0);
        Tensor out({n});
        detail::softmax_inplace(a.data(), out.data(), n);
        auto c = detail::ctx(a);
        if (c.on()) {
            auto sty = out.storage();
            const int pa = c.pa;
            c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
                double* ga = t.adj(pa);
                const double* y = sty->data.data();
                double dotgy = 0;
                for (int i = 0; i < n; ++i) dotgy += g[i] * y[i];
                for (int i = 0; i < n; ++i) ga[i] += y[i] * (g[i] - dotgy);
            });
        }
        return out;
    }
    if (a.rank() == 2) {
        const int m = a.dim(0), n = a.dim(1);
        Tensor out({m, n});
        for (int i = 0; i < m; ++i) detail::softmax_inplace(a.data() + i * n, out.data() + i * n, n);
        auto c = detail::ctx(a);
        if (c.on()) {
            auto sty = out.storage();
            const int pa = c.pa;
            c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
                double* ga = t.adj(pa);
                const double* y = sty->data.data();
                for (int i = 0; i < m; ++i) {
                    double dotgy = 0;
                    for (int j = 0; j < n; ++j) dotgy += g[i * n + j] * y[i * n + j];
                    for (int j = 0; j < n; ++j) ga[i * n + j] += y[i * n + j] * (g[i * n + j] - dotgy);
                }
            });
        }
        return out;
    }
    throw ShapeMismatch("softmax supports 1D/2D");
}

/// Mean squared error over all elements.
inline Tensor mse_loss(const Tensor& pred, const Tensor& target) {
    detail::check_same_shape(pred, target, "mse_loss");
    const int n = pred.size();
    double acc = 0;
    for (int i = 0; i < n; ++i) {
        const double d = pred.data()[i] - target.data()[i];
        acc += d * d;
    }
    Tensor out = Tensor::scalar(acc / n);
    auto c = detail::ctx(pred, target);
    if (c.on()) {
        auto stp = pred.storage();
        auto stt = target.storage();
        const int pp = c.pa, pt = c.pb;
        c.tape->record(out, {pp, pt}, [=](Tape& t, const double* g) {
            const double s = 2.0 * g[0] / n;
            if (pp >= 0) {
                double* gp = t.adj(pp);
                for (int i = 0; i < n; ++i) gp[i] += s * (stp->data[i] - stt->data[i]);
            }
            if (pt >= 0) {
                double* gt = t.adj(pt);
                for (int i = 0; i < n; ++i) gt[i] -= s * (stp->data[i] - stt->data[i]);
            }
        });
    }
    return out;
}

/// Cross-entropy of integer class `label` under softmax(logits).
inline Tensor cross_entropy_logits(const Tensor& logits, int label) {
    if (logits.rank() != 1) throw ShapeMismatch("cross_entropy_logits expects a logit vector");
    const int n = logits.dim(0);
    if (label < 0 || label >= n) throw ShapeMismatch("label out of range");
    std::vector<double> probs(static_cast<std::size_t>(n));
    detail::softmax_inplace(logits.data(), probs.data(), n);
    Tensor out = Tensor::scalar(-std::log(std::max(probs[static_cast<std::size_t>(label)], 1e-300)));
    auto c = detail::ctx(logits);
    if (c.on()) {
        const int pa = c.pa;
        c.tape->record(out, {pa}, [=](Tape& t, const double* g) {
            double* ga = t.adj(pa);
            for (int i = 0; i < n; ++i)
                ga[i] += g[0] * (probs[static_cast<std::size_t>(i)] - (i == label ? 1.0 : 0.0));
        });
    }
    return out;
}

}  // namespace ctnn::ad
