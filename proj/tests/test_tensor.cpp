#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "ctnn/ad/gradcheck.hpp"
#include "ctnn/ad/ops.hpp"
#include "ctnn/ad/rng.hpp"
#include "ctnn/ad/tensor.hpp"

using namespace ctnn;
using namespace ctnn::ad;

namespace {

Tensor naive_matmul(const Tensor& a, const Tensor& b) {
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c({m, n});
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0;
            for (int t = 0; t < k; ++t) acc += a.at(i, t) * b.at(t, j);
            c.mut(i, j) = acc;
        }
    return c;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double worst = 0;
    for (int i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a.at(i) - b.at(i)));
    return worst;
}

}  // namespace

TEST_CASE("softmax of a constant vector is uniform") {
    Tensor x({3}, {0.0, 0.0, 0.0});
    Tensor y = softmax(x);
    for (int i = 0; i < 3; ++i) REQUIRE(y.at(i) == Catch::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("outer product matches the rank-one map value") {
    Tensor q({2}, {1.0, 0.0});
    Tensor k({2}, {0.0, 2.0});
    Tensor m = outer(q, k);
    REQUIRE(m.at(0, 0) == 0.0);
    REQUIRE(m.at(0, 1) == 2.0);
    REQUIRE(m.at(1, 0) == 0.0);
    REQUIRE(m.at(1, 1) == 0.0);
}

TEST_CASE("matmul equals the naive triple loop") {
    Rng rng(7);
    Tensor a = randn({4, 5}, rng);
    Tensor b = randn({5, 3}, rng);
    REQUIRE(max_abs_diff(matmul(a, b), naive_matmul(a, b)) < 1e-12);
}

TEST_CASE("forward values match naive references on random inputs") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        Rng r = rng.substream(trial);
        Tensor a = randn({6}, r);
        Tensor b = randn({6}, r);
        Tensor s = add(a, b);
        Tensor d = sub(a, b);
        Tensor p = mul(a, b);
        Tensor q = div(a, b);
        double dotref = 0;
        for (int i = 0; i < 6; ++i) {
            REQUIRE(s.at(i) == a.at(i) + b.at(i));
            REQUIRE(d.at(i) == a.at(i) - b.at(i));
            REQUIRE(p.at(i) == a.at(i) * b.at(i));
            REQUIRE(q.at(i) == a.at(i) / b.at(i));
            dotref += a.at(i) * b.at(i);
        }
        REQUIRE(dot(a, b).value() == Catch::Approx(dotref).margin(1e-12));
        REQUIRE(sum(a).value() == Catch::Approx(MapCV(a.data(), 6).sum()).margin(1e-12));
        REQUIRE(mean(a).value() == Catch::Approx(MapCV(a.data(), 6).sum() / 6).margin(1e-12));
    }
}

TEST_CASE("scalar broadcast works both ways") {
    Tensor x({3}, {1.0, 2.0, 3.0});
    Tensor s = Tensor::scalar(2.0);
    Tensor y = mul(s, x);
    REQUIRE(y.at(2) == 6.0);
    Tensor z = sub(s, x);
    REQUIRE(z.at(0) == 1.0);
    REQUIRE(z.at(2) == -1.0);
    Tensor w = div(x, s);
    REQUIRE(w.at(1) == 1.0);
}

TEST_CASE("shape mismatches raise with offending shapes") {
    Tensor a({2, 3});
    Tensor b({3, 3});
    REQUIRE_THROWS_AS(add(a, b), ShapeMismatch);
    REQUIRE_THROWS_AS(matmul(a, a), ShapeMismatch);
}

TEST_CASE("sum backward yields all-ones") {
    Tensor x = Tensor({4}, {1.0, -2.0, 0.5, 3.0});
    x.set_requires_grad();
    Tape tape;
    Tensor loss = sum(x);
    tape.backward(loss);
    for (double g : x.grad()) REQUIRE(g == 1.0);
}

TEST_CASE("mse(Wx, y) gradient matches the closed form") {
    Rng rng(3);
    Tensor w = randn({3, 4}, rng);
    Tensor x = randn({4}, rng);
    Tensor y = randn({3}, rng);
    w.set_requires_grad();
    Tape tape;
    Tensor loss = mse_loss(matmul(w, x), y);
    tape.backward(loss);

    Tensor pred = matmul(w.detached(), x);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 4; ++j) {
            const double expected = 2.0 / 3.0 * (pred.at(i) - y.at(i)) * x.at(j);
            REQUIRE(w.grad()[static_cast<std::size_t>(i * 4 + j)] ==
                    Catch::Approx(expected).margin(1e-12));
        }
}

TEST_CASE("gradcheck: linear functional is exact to 1e-9") {
    Rng rng(5);
    Tensor a = randn({6}, rng);
    Tensor x0 = randn({6}, rng);
    auto f = [&](const Tensor& x) { return dot(a, x); };
    REQUIRE(gradcheck(f, x0) < 1e-9);
}

TEST_CASE("gradcheck: tanh/matmul/softmax composites stay under 1e-4") {
    Rng rng(17);
    Tensor w1 = randn({5, 4}, rng, 0.7);
    Tensor w2 = randn({3, 5}, rng, 0.7);
    Tensor target = randn({3}, rng);
    auto f = [&](const Tensor& x) {
        return mse_loss(matmul(w2, tanh(matmul(w1, x))), target);
    };
    for (int trial = 0; trial < 10; ++trial) {
        Rng r = rng.substream(100 + trial);
        REQUIRE(gradcheck(f, randn({4}, r)) < 1e-4);
    }

    auto g = [&](const Tensor& x) {
        Tensor sm = softmax(slice(x, 0, 0, 3));
        Tensor rest = sigmoid(slice(x, 0, 3, 6));
        return mean(mul(sm, rest));
    };
    for (int trial = 0; trial < 10; ++trial) {
        Rng r = rng.substream(200 + trial);
        REQUIRE(gradcheck(g, randn({6}, r)) < 1e-4);
    }
}

TEST_CASE("gradcheck: shape/reduction ops") {
    Rng rng(23);
    Tensor b = randn({4}, rng);
    auto f = [&](const Tensor& x) {
        Tensor m = reshape(x, {3, 4});
        Tensor sr = scale_rows(m, Tensor({3}, {0.5, -1.0, 2.0}));
        Tensor ar = add_rows(sr, b);
        Tensor cat = concat({ar, ar}, 1);
        Tensor stacked = concat({transpose(cat), transpose(ar)}, 0);
        return mean(mul(stacked, stacked));
    };
    for (int trial = 0; trial < 10; ++trial) {
        Rng r = rng.substream(trial);
        REQUIRE(gradcheck(f, randn({12}, r)) < 1e-4);
    }

    auto g = [&](const Tensor& x) {
        Tensor m = reshape(x, {2, 3});
        return add(sum(sum_axis(m, 0)), mean(mean_axis(m, 1)));
    };
    REQUIRE(gradcheck(g, randn({6}, rng)) < 1e-4);
}

TEST_CASE("softmax rows are a probability distribution") {
    Rng rng(31);
    Tensor x = randn({5, 7}, rng, 3.0);
    Tensor y = softmax(x);
    for (int i = 0; i < 5; ++i) {
        double s = 0;
        for (int j = 0; j < 7; ++j) {
            REQUIRE(y.at(i, j) >= 0.0);
            s += y.at(i, j);
        }
        REQUIRE(std::abs(s - 1.0) < 1e-12);
    }
}

TEST_CASE("cross-entropy of a strongly matching prediction tends to zero") {
    Tensor logits({3}, {20.0, -5.0, -5.0});
    REQUIRE(cross_entropy_logits(logits, 0).value() < 1e-9);
    REQUIRE(cross_entropy_logits(logits, 1).value() > 1.0);

    Rng rng(37);
    auto f = [&](const Tensor& z) { return cross_entropy_logits(z, 2); };
    for (int trial = 0; trial < 10; ++trial) {
        Rng r = rng.substream(trial);
        REQUIRE(gradcheck(f, randn({5}, r)) < 1e-4);
    }
}

TEST_CASE("backward rejects non-scalar and detached losses") {
    Tensor x({3}, {1.0, 2.0, 3.0});
    x.set_requires_grad();
    Tape tape;
    Tensor y = mul(x, x);
    REQUIRE_THROWS_AS(tape.backward(y), NotScalarLoss);
    Tensor detached = Tensor::scalar(1.0);
    REQUIRE_THROWS_AS(tape.backward(detached), DetachedTensor);
}

TEST_CASE("gradients accumulate across two backward passes") {
    Tensor x({2}, {1.0, 2.0});
    x.set_requires_grad();
    {
        Tape tape;
        tape.backward(sum(x));
    }
    {
        Tape tape;
        tape.backward(sum(x));
    }
    REQUIRE(x.grad()[0] == 2.0);
    x.zero_grad();
    REQUIRE(x.grad()[0] == 0.0);
}

TEST_CASE("rng is deterministic and substreams are independent") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
    Rng c = Rng(42).substream(1);
    Rng d = Rng(42).substream(2);
    REQUIRE(c.next_u64() != d.next_u64());

    Rng u(9);
    for (int i = 0; i < 1000; ++i) {
        double v = u.uniform();
        REQUIRE(v >= 0.0);
        REQUIRE(v < 1.0);
    }
}
