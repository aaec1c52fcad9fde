#include <gtest/gtest.h>

#include <cmath>

#include "dyad/measures.hpp"

using namespace dyad;

namespace {

// brute-force sup over every dyadic-length arc pair, averages by direct summation
double ap_oracle(const Mat& w, double p) {
    int N = static_cast<int>(w.rows());
    double best = 0;
    for (int la = 1; la <= N; la *= 2)
        for (int a = 0; a < (la == N ? 1 : N); ++a)
            for (int lb = 1; lb <= N; lb *= 2)
                for (int b = 0; b < (lb == N ? 1 : N); ++b) {
                    double s1 = 0, s2 = 0;
                    for (int x = 0; x < la; ++x)
                        for (int y = 0; y < lb; ++y) {
                            double v = w((a + x) % N, (b + y) % N);
                            s1 += v;
                            s2 += std::pow(v, -1.0 / (p - 1.0));
                        }
                    double n = double(la) * lb;
                    best = std::max(best, (s1 / n) * std::pow(s2 / n, p - 1.0));
                }
    return best;
}

DiscreteFunction rnd(int L, std::mt19937_64& rng) { return DiscreteFunction::random_normal(L, rng); }

}  // namespace

TEST(Weights, UnitWeightHasCharacteristicOne) {
    auto w = Weight::unit(3);
    for (double p : {1.5, 2.0, 4.0}) EXPECT_NEAR(ap_characteristic(w, p), 1.0, 1e-14);
    EXPECT_NEAR(ainfty_characteristic(w), 1.0, 1e-14);
}

TEST(Weights, NonPositiveWeightRejected) {
    DiscreteFunction f(2, 1.0);
    f(1, 1) = 0.0;
    EXPECT_THROW(Weight{f}, DomainError);
    EXPECT_THROW(ap_characteristic(Weight::unit(2), 1.0), DomainError);
}

TEST(Weights, HalfStepMatchesEnumeration) {
    auto w = Weight(DiscreteFunction::from_function(3, [](double x, double) { return x < 0.5 ? 2.0 : 1.0; }));
    EXPECT_NEAR(ap_characteristic(w, 2.0), ap_oracle(w.f().values(), 2.0), 1e-13);
    // extremal arc straddles the jump with equal halves: (3/2)(3/4)
    EXPECT_NEAR(ap_characteristic(w, 2.0), 9.0 / 8.0, 1e-13);
}

TEST(Weights, RandomWeightsMatchEnumeration) {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> U(0.2, 3.0);
    for (int t = 0; t < 5; ++t) {
        Mat v(8, 8);
        for (int i = 0; i < 64; ++i) v.data()[i] = U(rng);
        Weight w(DiscreteFunction(3, v));
        for (double p : {4.0 / 3.0, 2.0, 4.0}) EXPECT_NEAR(ap_characteristic(w, p), ap_oracle(v, p), 1e-12 * ap_oracle(v, p));
    }
}

TEST(Weights, CharacteristicDominatesSlicesAndAinfty) {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> U(0.1, 5.0);
    for (int t = 0; t < 10; ++t) {
        Mat v(8, 8);
        for (int i = 0; i < 64; ++i) v.data()[i] = U(rng);
        Weight w(DiscreteFunction(3, v));
        double ap = ap_characteristic(w, 2.0);
        EXPECT_GE(ap + 1e-12, ap_characteristic_slices(w, 2.0, 0));
        EXPECT_GE(ap + 1e-12, ap_characteristic_slices(w, 2.0, 1));
        double ai = ainfty_characteristic(w);
        EXPECT_GE(ai, 1.0 - 1e-12);
        EXPECT_LE(ai, ap + 1e-12);
        GridShift g(3, t % 8, (3 * t) % 8);
        EXPECT_LE(ap_characteristic(w, 2.0, g), ap + 1e-12);
    }
}

TEST(Weights, LacunaryCharacteristicIncreasesWithT) {
    double prev = 0;
    for (double t : {1.5, 3.0, 10.0, 50.0, 400.0}) {
        double a = ap_characteristic(Weight::lacunary(3, t, 1.0), 2.0);
        EXPECT_GT(a, prev);
        // sup is attained on the arc split evenly across the jump
        EXPECT_NEAR(a, (1 + t) * (1 + 1 / t) / 4, 1e-12 * a);
        prev = a;
    }
}

TEST(Weights, CharacteristicOneIffConstantOnScope) {
    GridShift g(2, 1, 2);
    ShiftedGrid sg(2, g);
    // constant on every level-2 cube (cells) is trivially true; constant weight is the only one with value 1
    EXPECT_NEAR(ap_characteristic(Weight(DiscreteFunction(2, 3.0)), 2.0, g), 1.0, 1e-14);
    DiscreteFunction f(2, 1.0);
    f(0, 0) = 1.5;
    EXPECT_GT(ap_characteristic(Weight(f), 2.0, g), 1.0 + 1e-6);
}

TEST(Norms, ConstantOneHasNormOne) {
    DiscreteFunction one(3, 1.0);
    for (double p : {0.5, 1.0, 2.0, 7.0, kInf}) EXPECT_NEAR(lp_norm(one, p), 1.0, 1e-14);
    EXPECT_TRUE(lp_norm_report(one, 0.5).quasi);
    EXPECT_FALSE(lp_norm_report(one, 2.0).quasi);
}

TEST(Norms, HomogeneityAndTriangle) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 50; ++t) {
        auto f = rnd(3, rng), g = rnd(3, rng);
        for (double p : {0.5, 2.0 / 3.0, 1.0, 2.0, 4.0}) {
            EXPECT_NEAR(lp_norm(f * -3.0, p), 3.0 * lp_norm(f, p), 1e-12 * lp_norm(f, p));
            if (p >= 1)
                EXPECT_LE(lp_norm(f + g, p), lp_norm(f, p) + lp_norm(g, p) + 1e-12);
            else
                EXPECT_LE(std::pow(lp_norm(f + g, p), p), std::pow(lp_norm(f, p), p) + std::pow(lp_norm(g, p), p) + 1e-12);
        }
    }
}

TEST(Norms, MixedNormEqualExponentsIsPlainNorm) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 20; ++t) {
        auto f = rnd(3, rng);
        for (double p : {2.0 / 3.0, 4.0 / 3.0, 2.0, 4.0, kInf})
            EXPECT_NEAR(mixed_norm(f, p, p), lp_norm(f, p), 1e-12 * lp_norm(f, p));
    }
}

TEST(Norms, MixedNormMatchesSliceOracle) {
    std::mt19937_64 rng(5);
    auto f = rnd(3, rng);
    Vec w1 = Vec::LinSpaced(8, 0.5, 2.0), w2 = Vec::LinSpaced(8, 3.0, 1.0);
    for (auto [p1, p2] : {std::pair{2.0, 4.0}, {4.0 / 3.0, 2.0}, {4.0, 2.0 / 3.0}}) {
        double outer = 0;
        for (int i = 0; i < 8; ++i) {
            double inner = 0;
            for (int j = 0; j < 8; ++j) inner += std::pow(std::fabs(f(i, j)), p2) * w2[j] / 8;
            outer += std::pow(std::pow(inner, 1 / p2), p1) * w1[i] / 8;
        }
        EXPECT_NEAR(mixed_norm(f, p1, p2, &w1, &w2), std::pow(outer, 1 / p1), 1e-12);
    }
}

TEST(Norms, CsvRowCarriesSeed) {
    auto r = lp_norm_report(DiscreteFunction(2, 1.0), 2.0, nullptr, 77);
    EXPECT_EQ(NormReport::csv_header(), "kind,exponents,value,grid-id,weight-id,seed");
    EXPECT_EQ(r.csv_row(), "Lp,2,1,L2,one,77");
}

TEST(Bmo, ConstantHasZeroNorm) {
    DiscreteFunction b(3, 2.5);
    ShiftedGrid g(3, GridShift(3, 3, 5));
    EXPECT_NEAR(bmo_little(b), 0.0, 1e-14);
    EXPECT_NEAR(bmo_dyadic_slices(b, 0, std::nullopt), 0.0, 1e-14);
    EXPECT_NEAR(bmo_product(b, g).value, 0.0, 1e-14);
}

TEST(Bmo, ProductSingleRectangleValue) {
    ShiftedGrid g(3, GridShift(3, 6, 1));
    auto K = g.lattice(0).cube(1, 1), V = g.lattice(1).cube(2, 3);
    auto b = DiscreteFunction::tensor(haar_evaluate({K, 1}, 3), haar_evaluate({V, 1}, 3));
    auto rep = bmo_product(b, g);
    EXPECT_NEAR(rep.single_rectangle, 1.0 / std::sqrt(K.side() * V.side()), 1e-12);
    EXPECT_GE(rep.value, rep.single_rectangle);
}

TEST(Bmo, LittleBmoComparableToSlices) {
    // slices <= bmo (single-cell arcs are in the family) and bmo <= slice1 + slice2
    std::mt19937_64 rng(6);
    for (int t = 0; t < 10; ++t) {
        auto b = rnd(3, rng);
        double s1 = bmo_dyadic_slices(b, 0, std::nullopt), s2 = bmo_dyadic_slices(b, 1, std::nullopt);
        double bm = bmo_little(b);
        EXPECT_LE(std::max(s1, s2), bm + 1e-12);
        EXPECT_LE(bm, s1 + s2 + 1e-12);
    }
}

TEST(Bmo, ProductLowerBoundBelowLittleBmo) {
    std::mt19937_64 rng(7);
    double worst = 0;
    for (int t = 0; t < 10; ++t) {
        auto b = rnd(3, rng);
        ShiftedGrid g(3, sample_shift(3, rng));
        worst = std::max(worst, bmo_product(b, g).value / bmo_little(b));
    }
    EXPECT_LT(worst, 8.0);
}

TEST(Bmo, CarlesonFormOfSingleHaar) {
    AxisLattice lat(TorusGrid(4), AxisShift(4, 9));
    auto V = lat.cube(2, 1);
    EXPECT_NEAR(bmo_carleson_axis(haar_evaluate({V, 1}, 4), lat), 1.0 / std::sqrt(V.side()), 1e-12);
}

TEST(Maximal, BoundsAndConstants) {
    std::mt19937_64 rng(8);
    auto f = rnd(3, rng);
    GridShift w(3, 2, 7);
    for (auto k : {MaximalKind::Dyadic, MaximalKind::Strong, MaximalKind::Axis1, MaximalKind::Axis2}) {
        auto M = maximal_function(f, k, w);
        EXPECT_TRUE((M.values().array() >= f.values().cwiseAbs().array() - 1e-14).all());
        auto Mc = maximal_function(DiscreteFunction(3, -2.0), k, w);
        EXPECT_NEAR((Mc.values().array() - 2.0).abs().maxCoeff(), 0.0, 1e-14);
    }
    auto M1 = maximal_function(f, MaximalKind::Strong), M3 = maximal_function_s(f, 3.0, MaximalKind::Strong);
    EXPECT_TRUE((M3.values().array() >= M1.values().array() - 1e-12).all());
    auto MM = maximal_function(M1, MaximalKind::Strong);
    EXPECT_TRUE((MM.values().array() >= M1.values().array() - 1e-12).all());
}

TEST(Maximal, DyadicOfIndicatorMatchesBruteForce) {
    ShiftedGrid g(3, GridShift(3, 5, 3));
    DyadicRectangle R{g.lattice(0).cube(2, 1), g.lattice(1).cube(1, 0)};
    auto f = rectangle_indicator(R, 3);
    auto M = maximal_function(f, MaximalKind::Dyadic, g.shift());
    for (int x = 0; x < 8; ++x)
        for (int y = 0; y < 8; ++y) {
            double best = 0;
            for (int l1 = 0; l1 <= 3; ++l1)
                for (int l2 = 0; l2 <= 3; ++l2) {
                    DyadicRectangle Q{g.lattice(0).cube_of_cell(l1, x), g.lattice(1).cube_of_cell(l2, y)};
                    best = std::max(best, f.average(Q));
                }
            EXPECT_NEAR(M(x, y), best, 1e-14);
            if (R.I.contains_cell(x, 8) && R.J.contains_cell(y, 8)) EXPECT_NEAR(M(x, y), 1.0, 1e-14);
        }
}

TEST(Maximal, FeffermanSteinRatioFinite) {
    std::mt19937_64 rng(9);
    std::vector<DiscreteFunction> fs;
    for (int j = 0; j < 4; ++j) fs.push_back(rnd(3, rng));
    double r = fefferman_stein_ratio(fs, 2.0, 2.0);
    EXPECT_GE(r, 1.0);
    EXPECT_LT(r, 10.0);
}

TEST(Square, SingleTermIsAbsoluteValue) {
    ShiftedGrid g(3, GridShift(3, 1, 4));
    auto I = g.lattice(0).cube(1, 0), J = g.lattice(1).cube(2, 2);
    auto f = DiscreteFunction::tensor(haar_evaluate({I, 1}, 3), haar_evaluate({J, 1}, 3));
    for (auto k : {SquareKind::Biparameter, SquareKind::Axis1, SquareKind::Axis2})
        EXPECT_LT((square_function(f, g, k).values() - f.values().cwiseAbs()).norm(), 1e-13);
    // S^{0,0}: only K x V = I x J contributes, with the strong maximal function of f itself
    auto S00 = square_function_ij(f, g, 0, 0);
    EXPECT_LT((S00.values() - maximal_function(f, MaximalKind::Strong).values()).norm(), 1e-13);
    EXPECT_THROW(square_function_ij(f, g, 3, 0), ResolutionError);
}

TEST(Square, ParsevalForBiparameterAndAxisForms) {
    std::mt19937_64 rng(10);
    for (int t = 0; t < 20; ++t) {
        ShiftedGrid g(3, sample_shift(3, rng));
        auto f = rnd(3, rng);
        for (auto k : {SquareKind::Biparameter, SquareKind::Axis1, SquareKind::Axis2})
            EXPECT_NEAR(square_function(f, g, k).l2_norm(), f.l2_norm(), 1e-12 * f.l2_norm());
        // phi dominates the axis square function pointwise
        auto phi = square_function(f, g, SquareKind::Phi1), s1 = square_function(f, g, SquareKind::Axis1);
        EXPECT_GE(phi.l2_norm() + 1e-12, s1.l2_norm());
    }
}

TEST(Square, LowerRatioUnweightedIsOne) {
    std::mt19937_64 rng(11);
    ShiftedGrid g(3, sample_shift(3, rng));
    auto f = rnd(3, rng);
    auto r = lower_sf_ainfty_check(f, Weight::unit(3), 2.0, g);
    EXPECT_NEAR(r.ratio_bipar, 1.0, 1e-12);
    EXPECT_NEAR(r.ratio_axis1, 1.0, 1e-12);
    EXPECT_NEAR(r.ratio_axis2, 1.0, 1e-12);
}

TEST(Square, LowerRatioOfSingleHaarIsOneForAnyWeight) {
    ShiftedGrid g(3, GridShift(3, 2, 2));
    auto f = DiscreteFunction::tensor(haar_evaluate({g.lattice(0).cube(2, 3), 1}, 3),
                                      haar_evaluate({g.lattice(1).cube(0, 0), 1}, 3));
    auto r = lower_sf_ainfty_check(f, Weight::lacunary(3, 30.0, 5.0), 1.5, g);
    EXPECT_NEAR(r.ratio_bipar, 1.0, 1e-12);
    EXPECT_NEAR(r.ratio_axis1, 1.0, 1e-12);
}

TEST(Square, AveragedReducesToSingleShift) {
    std::mt19937_64 rng(12);
    auto f = rnd(3, rng);
    GridShift w(3, 3, 6);
    auto id = [](const ShiftedGrid&, const DiscreteFunction& x) { return x; };
    auto a = square_function_averaged(f, {w}, 1, 0, id);
    auto b = square_function_ij(f, ShiftedGrid(3, w), 1, 0);
    EXPECT_LT((a - b).values().norm(), 1e-13);
}
