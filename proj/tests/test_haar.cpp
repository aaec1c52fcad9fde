#include <gtest/gtest.h>

#include <cmath>

#include "dyad/haar.hpp"

using namespace dyad;

namespace {
double vsum(const Vec& v) { return v.sum() / v.size(); }
double vnorm2(const Vec& v) { return v.squaredNorm() / v.size(); }
}  // namespace

TEST(Haar, TopCancellativeIsPlusMinusOne) {
    AxisLattice lat(TorusGrid(3), AxisShift(3, 0));
    Vec h = haar_evaluate({lat.cube(0, 0), 1}, 3);
    for (int c = 0; c < 8; ++c) EXPECT_DOUBLE_EQ(h[c], c < 4 ? 1.0 : -1.0);
}

TEST(Haar, HalfCubeIndicatorIsRootTwo) {
    AxisLattice lat(TorusGrid(3), AxisShift(3, 0));
    Vec h = haar_evaluate({lat.cube(1, 0), 0}, 3);
    for (int c = 0; c < 8; ++c) EXPECT_DOUBLE_EQ(h[c], c < 4 ? std::sqrt(2.0) : 0.0);
}

TEST(Haar, NormalizationAndMeanOnRandomCubes) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 200; ++t) {
        int L = 1 + rng() % 5;
        AxisLattice lat(TorusGrid(L), AxisShift(L, rng() % (1u << L)));
        int l = rng() % L;
        auto I = lat.cube(l, rng() % (1 << l));
        Vec h1 = haar_evaluate({I, 1}, L), h0 = haar_evaluate({I, 0}, L);
        EXPECT_NEAR(vsum(h1), 0.0, 1e-14);
        EXPECT_NEAR(vnorm2(h1), 1.0, 1e-12);
        EXPECT_NEAR(vnorm2(h0), 1.0, 1e-12);
        EXPECT_GT(vsum(h0), 0.0);
        for (int c = 0; c < (1 << L); ++c)
            if (!I.contains_cell(c, 1 << L)) EXPECT_EQ(h1[c], 0.0);
    }
}

TEST(Haar, ResolutionErrors) {
    AxisLattice lat(TorusGrid(3), AxisShift(3, 0));
    EXPECT_THROW(haar_evaluate({lat.cube(3, 0), 1}, 3), ResolutionError);
    DiscreteFunction f(3, 1.0);
    EXPECT_THROW(martingale_difference(f, lat, lat.cube(3, 1)), ResolutionError);
    EXPECT_THROW(martingale_block(f, lat, lat.cube(1, 1), 2), ResolutionError);
}

TEST(Haar, OrthonormalBasis) {
    AxisLattice lat(TorusGrid(4), AxisShift(4, 11));
    AxisDictionary d(lat);
    Mat B = d.orthonormal_basis();
    Mat G = B.transpose() * B / 16.0;
    EXPECT_LT((G - Mat::Identity(16, 16)).norm(), 1e-13);
}

TEST(Haar, MartingaleDifferenceOfConstantVanishes) {
    ShiftedGrid g(3, GridShift(3, 5, 2));
    DiscreteFunction f(3, 2.5);
    auto I = g.lattice(0).cube(1, 1);
    EXPECT_LT(martingale_difference(f, g.lattice(0), I).values().norm(), 1e-14);
}

TEST(Haar, MartingaleDifferenceFixesItsHaarFunction) {
    ShiftedGrid g(3, GridShift(3, 5, 2));
    auto I = g.lattice(0).cube(1, 0);
    Vec h = haar_evaluate({I, 1}, 3);
    DiscreteFunction f = DiscreteFunction::tensor(h, Vec::Ones(8));
    EXPECT_LT((martingale_difference(f, g.lattice(0), I) - f).values().norm(), 1e-13);
}

TEST(Haar, MartingaleDifferenceMatchesChildrenAverages) {
    // oracle: sum over children of (<f>_child - <f>_I) 1_child, computed cell by cell
    std::mt19937_64 rng(7);
    for (int t = 0; t < 50; ++t) {
        ShiftedGrid g(3, sample_shift(3, rng));
        auto f = DiscreteFunction::random_normal(3, rng);
        const auto& lat = g.lattice(0);
        int l = rng() % 3;
        auto I = lat.cube(l, rng() % (1 << l));
        auto out = martingale_difference(f, lat, I);
        for (int x2 = 0; x2 < 8; ++x2) {
            double avgI = 0;
            for (int a = 0; a < I.len; ++a) avgI += f((I.start + a) % 8, x2);
            avgI /= I.len;
            for (auto ch : {lat.left_child(I), lat.right_child(I)}) {
                double avgC = 0;
                for (int a = 0; a < ch.len; ++a) avgC += f((ch.start + a) % 8, x2);
                avgC /= ch.len;
                for (int a = 0; a < ch.len; ++a) EXPECT_NEAR(out((ch.start + a) % 8, x2), avgC - avgI, 1e-12);
            }
            for (int c = 0; c < 8; ++c)
                if (!I.contains_cell(c, 8)) EXPECT_EQ(out(c, x2), 0.0);
        }
        // Delta_I f = <f,h_I>_1 h_I
        Vec h = haar_evaluate({I, 1}, 3);
        Mat viaHaar = h * (h.transpose() * f.values()) / 8.0;
        EXPECT_LT((viaHaar - out.values()).norm(), 1e-12);
    }
}

TEST(Haar, BlockTelescopesToRestriction) {
    std::mt19937_64 rng(11);
    for (int t = 0; t < 30; ++t) {
        int L = 4;
        ShiftedGrid g(L, sample_shift(L, rng));
        auto f = DiscreteFunction::random_normal(L, rng);
        const auto& lat = g.lattice(1);
        int j = rng() % L;
        auto K = lat.cube(j, rng() % (1 << j));
        DiscreteFunction sum(L);
        for (int i = 0; i <= L - j - 1; ++i) sum += martingale_block(f, lat, K, i);
        EXPECT_LT((martingale_block(f, lat, K, 0) - martingale_difference(f, lat, K)).values().norm(), 1e-14);
        // add E_K f and compare with f 1_K along axis 2
        Vec ind = cube_indicator(K, 16);
        Mat EK = ind.asDiagonal() * g.dict(1).expectation(j);
        sum += g.apply_axis(1, EK, f);
        Mat expect = f.values() * ind.asDiagonal();
        EXPECT_LT((sum.values() - expect).norm(), 1e-12);
    }
}

TEST(Haar, BlockOfDescendantHaarIsItself) {
    AxisLattice lat(TorusGrid(4), AxisShift(4, 6));
    auto K = lat.cube(1, 1);
    auto I = lat.ancestor(lat.cube(3, 0), 0);
    // pick a level-3 descendant of K
    for (const auto& c : lat.level_cubes(3))
        if (lat.is_ancestor_or_self(K, c)) I = c;
    Vec h = haar_evaluate({I, 1}, 4);
    DiscreteFunction f = DiscreteFunction::tensor(h, Vec::Ones(16));
    EXPECT_LT((martingale_block(f, lat, K, 2) - f).values().norm(), 1e-13);
}

TEST(Haar, TruncatedProjectionExtremes) {
    std::mt19937_64 rng(5);
    ShiftedGrid g(3, sample_shift(3, rng));
    auto f = DiscreteFunction::random_normal(3, rng);
    EXPECT_LT((truncated_projection(f, g, 3, 3) - f).values().norm(), 1e-13);
    auto top = truncated_projection(f, g, 0, 0);
    EXPECT_LT((top.values().array() - f.values().mean()).matrix().norm(), 1e-13);
}

TEST(Haar, CollapseIdentity) {
    // E_{j1} (x) E_{j2} f = sum_{l1<j1, l2<j2} Delta^{<=}_{l1} (x) Delta^{<=}_{l2} f
    std::mt19937_64 rng(9);
    for (int t = 0; t < 100; ++t) {
        ShiftedGrid g(3, sample_shift(3, rng));
        auto f = DiscreteFunction::random_normal(3, rng);
        int j1 = 1 + rng() % 3, j2 = 1 + rng() % 3;
        DiscreteFunction rhs(3);
        for (int l1 = 0; l1 < j1; ++l1)
            for (int l2 = 0; l2 < j2; ++l2) {
                // evaluated by explicit Haar sums, independent of the projection matrices
                for (const auto& I : g.lattice(0).level_cubes(l1))
                    for (const auto& J : g.lattice(1).level_cubes(l2)) {
                        std::vector<HaarFunction> hs1{{I, 1}}, hs2{{J, 1}};
                        if (l1 == 0) hs1.push_back({I, 0});
                        if (l2 == 0) hs2.push_back({J, 0});
                        for (auto& a : hs1)
                            for (auto& b : hs2) {
                                Vec u = haar_evaluate(a, 3), v = haar_evaluate(b, 3);
                                double c = u.dot(f.values() * v) / 64.0;
                                rhs += DiscreteFunction::tensor(u, v) * c;
                            }
                    }
            }
        auto lhs = truncated_projection(f, g, j1, j2);
        EXPECT_LT((lhs - rhs).values().norm() / f.values().norm(), 1e-12);
    }
}

TEST(Haar, BiparameterParseval) {
    std::mt19937_64 rng(13);
    for (int t = 0; t < 50; ++t) {
        ShiftedGrid g(3, sample_shift(3, rng));
        auto f = DiscreteFunction::random_normal(3, rng);
        Mat C = g.coefficients(f);
        double s = 0;
        for (int a : g.dict(0).orthonormal_indices())
            for (int b : g.dict(1).orthonormal_indices()) s += C(a, b) * C(a, b);
        EXPECT_NEAR(s, f.pair(f), 1e-12 * f.pair(f));
    }
}
