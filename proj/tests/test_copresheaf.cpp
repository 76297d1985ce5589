#include <Eigen/Dense>
#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "ctnn/copresheaf/cnm.hpp"
#include "ctnn/copresheaf/copresheaf.hpp"
#include "ctnn/copresheaf/family.hpp"

using namespace ctnn;
using namespace ctnn::cps;
using ad::Rng;
using ad::Tensor;

namespace {

cc::CombinatorialComplex two_triangles() {
    return cc::CombinatorialComplex::build({
        {{0}, 0}, {{1}, 0}, {{2}, 0}, {{3}, 0},
        {{0, 1}, 1}, {{1, 2}, 1}, {{2, 0}, 1}, {{3, 1}, 1}, {{2, 3}, 1},
        {{0, 1, 2}, 2}, {{3, 1, 2}, 2},
    });
}

cc::CombinatorialComplex abc_path() {
    return cc::CombinatorialComplex::build({
        {{0}, 0}, {{1}, 0}, {{2}, 0}, {{0, 1}, 1}, {{1, 2}, 1},
    });
}

Tensor diag2(double a, double b) { return Tensor({2, 2}, {a, 0, 0, b}); }

void randomize(TransportFamily& fam, Rng& rng, double scale = 0.5) {
    nn::ParamRefs refs;
    fam.collect("f", refs);
    for (auto& [name, t] : refs)
        for (int i = 0; i < t->size(); ++i) t->data()[i] = scale * rng.normal();
}

bool bit_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (int i = 0; i < a.size(); ++i)
        if (a.at(i) != b.at(i)) return false;
    return true;
}

}  // namespace

TEST_CASE("pre-linear transport is the outer product of the pair") {
    auto fam = TransportFamily::pre_linear(2);
    Tensor rho = fam.eval(Tensor({2}, {1, 0}), Tensor({2}, {0, 2}));
    REQUIRE(rho.at(0, 0) == 0.0);
    REQUIRE(rho.at(0, 1) == 2.0);
    REQUIRE(rho.at(1, 0) == 0.0);
    REQUIRE(rho.at(1, 1) == 0.0);
}

TEST_CASE("gaussian rbf at coincident pair is the identity") {
    auto fam = TransportFamily::gaussian_rbf(3);
    Tensor q({3}, {0.3, -1.0, 2.0});
    Tensor rho = fam.eval(q, q);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) REQUIRE(rho.at(i, j) == (i == j ? 1.0 : 0.0));
}

TEST_CASE("sheaf-spd maps are symmetric with spectrum >= 1") {
    Rng rng(44);
    auto fam = TransportFamily::sheaf_spd(4, 4, rng);
    randomize(fam, rng);
    for (int trial = 0; trial < 5; ++trial) {
        Rng r = rng.substream(trial);
        Tensor rho = fam.eval(ad::randn({4}, r), ad::randn({4}, r));
        Eigen::MatrixXd m(4, 4);
        for (int i = 0; i < 4; ++i)
            for (int j = 0; j < 4; ++j) m(i, j) = rho.at(i, j);
        REQUIRE((m - m.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
        REQUIRE(es.eigenvalues().minCoeff() >= 1.0 - 1e-10);
    }
}

TEST_CASE("zero-init contract: fresh sheaf families evaluate to the exact identity") {
    Rng rng(45);
    auto check_identity = [&](TransportFamily fam) {
        for (int trial = 0; trial < 5; ++trial) {
            Rng r = rng.substream(trial);
            Tensor rho = fam.eval(ad::randn({3}, r), ad::randn({3}, r));
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j) REQUIRE(rho.at(i, j) == (i == j ? 1.0 : 0.0));
        }
    };
    check_identity(TransportFamily::sheaf_fc(3, 3, rng));
    check_identity(TransportFamily::sheaf_mlp(3, 3, rng));
    check_identity(TransportFamily::sheaf_spd(3, 3, rng));
    check_identity(TransportFamily::shared_loc(3, 3, rng));
}

TEST_CASE("families are pure functions of parameters and conditioning") {
    Rng rng(46);
    for (auto kind : {FamilyKind::General, FamilyKind::DiagonalMlp, FamilyKind::OuterProduct,
                      FamilyKind::NonlinearMlp, FamilyKind::Bilinear, FamilyKind::SheafMlp}) {
        TransportFamily fam = [&] {
            switch (kind) {
                case FamilyKind::General: return TransportFamily::general(3, 3, rng);
                case FamilyKind::DiagonalMlp: return TransportFamily::diagonal_mlp(3, 3, rng);
                case FamilyKind::OuterProduct: return TransportFamily::outer_product(3, 3, rng);
                case FamilyKind::NonlinearMlp: return TransportFamily::nonlinear_mlp(3, 3, rng);
                case FamilyKind::Bilinear: return TransportFamily::bilinear(3, 3, rng);
                default: return TransportFamily::sheaf_mlp(3, 3, rng);
            }
        }();
        randomize(fam, rng);
        Rng r = rng.substream(7);
        Tensor q = ad::randn({3}, r), k = ad::randn({3}, r);
        REQUIRE(bit_equal(fam.eval(q, k), fam.eval(q, k)));
        Tensor v = ad::randn({3}, r);
        REQUIRE(bit_equal(fam.apply(q, k, v), fam.apply(q, k, v)));
    }
}

TEST_CASE("apply shortcuts agree with materialized transports") {
    Rng rng(47);
    auto check = [&](TransportFamily fam) {
        randomize(fam, rng);
        for (int trial = 0; trial < 5; ++trial) {
            Rng r = rng.substream(trial);
            Tensor q = ad::randn({3}, r), k = ad::randn({3}, r), v = ad::randn({3}, r);
            Tensor direct = fam.apply(q, k, v);
            Tensor ref = ad::matmul(fam.eval(q, k), v);
            for (int i = 0; i < 3; ++i) REQUIRE(direct.at(i) == Catch::Approx(ref.at(i)).margin(1e-12));
        }
    };
    check(TransportFamily::pre_linear(3));
    check(TransportFamily::outer_product(3, 3, rng));
    check(TransportFamily::graph_attention(3, 3, rng));
    check(TransportFamily::gaussian_rbf(3));
    check(TransportFamily::bilinear(3, 3, rng));
    check(TransportFamily::diagonal_mlp(3, 3, rng));
}

TEST_CASE("worked incidence CNM matches the displayed blocks") {
    auto complex = abc_path();
    const int a = complex.require({0}), b = complex.require({1}), c = complex.require({2});
    const int ab = complex.require({0, 1}), bc = complex.require({1, 2});

    auto g = cc::induced_digraph(complex, cc::NeighborhoodSpec::incidence(0, 1));
    std::map<int, int> dims;
    for (int v : g.vertices) dims[v] = 2;
    std::map<std::pair<int, int>, Tensor> table{
        {{ab, a}, diag2(1.0, 0.5)},
        {{ab, b}, diag2(1.0, 1.0)},
        {{bc, b}, diag2(1.0, 1.0)},
        {{bc, c}, diag2(1.0, 0.75)},
    };
    auto cp = Copresheaf::with_fixed_maps(g, dims, table);

    auto cnm = assemble_cnm(cp, {a, b, c}, {ab, bc});
    // |Z| x |Y| = 2 x 3, the transpose of the paper's 3 x 2 display
    Tensor support = cnm.support();
    REQUIRE(support.shape() == std::vector<int>{2, 3});
    REQUIRE(support.at(0, 0) == 1.0);
    REQUIRE(support.at(0, 1) == 1.0);
    REQUIRE(support.at(0, 2) == 0.0);
    REQUIRE(support.at(1, 0) == 0.0);
    REQUIRE(support.at(1, 1) == 1.0);
    REQUIRE(support.at(1, 2) == 1.0);
    REQUIRE(bit_equal(cnm.block(0, 0), diag2(1.0, 0.5)));
    REQUIRE(bit_equal(cnm.block(0, 1), diag2(1.0, 1.0)));
    REQUIRE(bit_equal(cnm.block(1, 1), diag2(1.0, 1.0)));
    REQUIRE(bit_equal(cnm.block(1, 2), diag2(1.0, 0.75)));

    SECTION("application sums transported neighbors per target") {
        CochainField h;
        h.set(ab, Tensor({2}, {1.0, 1.0}));
        h.set(bc, Tensor({2}, {1.0, 1.0}));
        auto out = apply_cnm(cnm, h);
        REQUIRE(out.at(b).at(0) == 2.0);
        REQUIRE(out.at(b).at(1) == 2.0);
        REQUIRE(out.at(a).at(1) == 0.5);
        REQUIRE(out.at(c).at(1) == 0.75);
    }

    SECTION("zero field maps to zero field") {
        CochainField h;
        h.set(ab, Tensor({2}));
        h.set(bc, Tensor({2}));
        auto out = apply_cnm(cnm, h);
        for (int cell : {a, b, c})
            for (int i = 0; i < 2; ++i) REQUIRE(out.at(cell).at(i) == 0.0);
    }
}

TEST_CASE("worked edge-adjacency CNM has the displayed support and blocks") {
    auto complex = two_triangles();
    const int e1 = complex.require({0, 1}), e2 = complex.require({1, 2}),
              e3 = complex.require({0, 2}), e4 = complex.require({1, 3}),
              e5 = complex.require({2, 3});
    std::vector<int> order{e1, e2, e3, e4, e5};  // the paper's edge ordering

    auto g = cc::induced_digraph(complex, cc::NeighborhoodSpec::adjacency(1, 1));
    std::map<int, int> dims;
    for (int v : g.vertices) dims[v] = 2;
    std::map<std::pair<int, int>, Tensor> table{
        {{e2, e1}, diag2(1, 0.8)}, {{e3, e1}, diag2(1, 0.6)},
        {{e1, e2}, diag2(1, 0.8)}, {{e3, e2}, diag2(1, 0.8)},
        {{e4, e2}, diag2(1, 1)},   {{e5, e2}, diag2(1, 0.6)},
        {{e1, e3}, diag2(1, 0.6)}, {{e2, e3}, diag2(1, 0.8)},
        {{e2, e4}, diag2(1, 1)},   {{e5, e4}, diag2(1, 0.7)},
        {{e2, e5}, diag2(1, 0.6)}, {{e4, e5}, diag2(1, 0.7)},
    };
    auto cp = Copresheaf::with_fixed_maps(g, dims, table);
    auto cnm = assemble_cnm(cp, order, order);

    // the display's support is symmetric, so it matches in either orientation
    const double expected[5][5] = {
        {0, 1, 1, 0, 0}, {1, 0, 1, 1, 1}, {1, 1, 0, 0, 0}, {0, 1, 0, 0, 1}, {0, 1, 0, 1, 0},
    };
    Tensor support = cnm.support();
    for (int i = 0; i < 5; ++i)
        for (int j = 0; j < 5; ++j) REQUIRE(support.at(i, j) == expected[i][j]);

    for (const auto& [edge, rho] : table) {
        auto zi = std::find(order.begin(), order.end(), edge.first) - order.begin();
        auto yj = std::find(order.begin(), order.end(), edge.second) - order.begin();
        REQUIRE(bit_equal(cnm.block(static_cast<int>(zi), static_cast<int>(yj)), rho));
    }
}

TEST_CASE("constant-identity CNM indicator equals the binary neighborhood matrix") {
    auto complex = two_triangles();
    auto spec = cc::NeighborhoodSpec::adjacency(1, 1);
    auto g = cc::induced_digraph(complex, spec);
    Copresheaf cp(StalkSpace::uniform(g, 2), TransportFamily::constant_identity(2));
    auto edge_cells = complex.cells_of_rank(1);
    auto cnm = cam(complex, cp, 1, 1);
    Tensor binary = cc::neighborhood_matrix(complex, spec, edge_cells, edge_cells);
    REQUIRE(bit_equal(cnm.support(), binary));
    for (const auto& blk : cnm.blocks) REQUIRE(bit_equal(blk.m, Tensor::identity(2)));
}

TEST_CASE("cim orientation follows the incidence matrix definition") {
    auto complex = abc_path();
    auto g = cc::induced_digraph(complex, cc::NeighborhoodSpec::incidence(0, 1));
    Copresheaf cp(StalkSpace::uniform(g, 2), TransportFamily::constant_identity(2));
    auto m = cim(complex, cp, 0, 1);
    REQUIRE(m.zs.size() == 2);  // |X^1| rows
    REQUIRE(m.ys.size() == 3);  // |X^0| cols
    Tensor support = m.support();
    REQUIRE(support.at(0, 0) == 1.0);
    REQUIRE(support.at(1, 2) == 1.0);
    REQUIRE(support.at(1, 0) == 0.0);
}

TEST_CASE("cam over a complex with no shared upper cells is empty") {
    auto complex = cc::CombinatorialComplex::build({{{0}, 0}, {{1}, 0}});
    auto g = cc::induced_digraph(complex, cc::NeighborhoodSpec::adjacency(0, 1));
    Copresheaf cp(StalkSpace::uniform(g, 2), TransportFamily::constant_identity(2));
    auto m = cam(complex, cp, 0, 1);
    REQUIRE(m.blocks.empty());
    for (int i = 0; i < m.support().size(); ++i) REQUIRE(m.support().at(i) == 0.0);
}

TEST_CASE("feature-conditioned CNM application matches a brute-force oracle") {
    auto complex = two_triangles();
    auto spec = cc::NeighborhoodSpec::adjacency(1, 1);
    auto g = cc::induced_digraph(complex, spec);
    Rng rng(48);
    auto fam = TransportFamily::sheaf_fc(2, 2, rng);
    randomize(fam, rng);

    // grab the raw weight for the independent reimplementation
    nn::ParamRefs refs;
    fam.collect("f", refs);
    const Tensor& w = *refs[0].second;  // (4 x 4): d*d rows, 2*cond cols

    CochainField feat, h;
    Rng r = rng.substream(1);
    for (int v : g.vertices) {
        feat.set(v, ad::randn({2}, r));
        h.set(v, ad::randn({2}, r));
    }

    Copresheaf cp(StalkSpace::uniform(g, 2), fam);
    auto cnm = assemble_cnm(cp, g.vertices, g.vertices, feat);
    auto out = apply_cnm(cnm, h);

    // oracle: direct loops, rho = I + tanh(W [feat_dst; feat_src]) reshaped row-major
    for (int dst : g.vertices) {
        double acc[2] = {0, 0};
        bool any = false;
        for (const auto& [src, d2] : g.edges) {
            if (d2 != dst) continue;
            any = true;
            double cond[4] = {feat.at(dst).at(0), feat.at(dst).at(1), feat.at(src).at(0),
                              feat.at(src).at(1)};
            double rho[4];
            for (int rrow = 0; rrow < 4; ++rrow) {
                double s = 0;
                for (int ccol = 0; ccol < 4; ++ccol) s += w.at(rrow, ccol) * cond[ccol];
                rho[rrow] = std::tanh(s);
            }
            rho[0] += 1.0;
            rho[3] += 1.0;
            acc[0] += rho[0] * h.at(src).at(0) + rho[1] * h.at(src).at(1);
            acc[1] += rho[2] * h.at(src).at(0) + rho[3] * h.at(src).at(1);
        }
        if (!any) continue;
        REQUIRE(out.at(dst).at(0) == Catch::Approx(acc[0]).margin(1e-12));
        REQUIRE(out.at(dst).at(1) == Catch::Approx(acc[1]).margin(1e-12));
    }
}

TEST_CASE("copresheaf rejects non-positive edge weights") {
    auto complex = abc_path();
    auto g = cc::induced_digraph(complex, cc::NeighborhoodSpec::incidence(0, 1));
    Copresheaf cp(StalkSpace::uniform(g, 2), TransportFamily::constant_identity(2));
    REQUIRE_THROWS_AS(cp.set_weight(3, 0, 0.0), NonPositiveWeight);
    REQUIRE_THROWS_AS(cp.set_weight(3, 0, -1.0), NonPositiveWeight);
}
