#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "dyad/kernel.hpp"
#include "dyad/model_ops.hpp"

using namespace dyad;

namespace {

// sum K[x,y,z] f1(y) f2(z) f3(x) vol^3 with every cell index written out
double eval_naive(const KernelTensor& K, const DiscreteFunction& f1, const DiscreteFunction& f2,
                  const DiscreteFunction& f3) {
    int L = K.L(), N = 1 << L;
    Mat W = K.weights();
    auto t = [N](int x, int y, int z) { return (x * N + y) * N + z; };
    double s = 0;
    for (int x1 = 0; x1 < N; ++x1)
        for (int x2 = 0; x2 < N; ++x2)
            for (int y1 = 0; y1 < N; ++y1)
                for (int y2 = 0; y2 < N; ++y2)
                    for (int z1 = 0; z1 < N; ++z1)
                        for (int z2 = 0; z2 < N; ++z2)
                            s += W(t(x1, y1, z1), t(x2, y2, z2)) * f1(y1, y2) * f2(z1, z2) * f3(x1, x2);
    return s;
}

}  // namespace

TEST(Kernel, EvaluationMatchesCellSum) {
    std::mt19937_64 rng(11);
    int L = 2;
    auto K = KernelTensor::random(L, rng);
    auto f1 = DiscreteFunction::random_normal(L, rng), f2 = DiscreteFunction::random_normal(L, rng),
         f3 = DiscreteFunction::random_normal(L, rng);
    double v = eval_naive(K, f1, f2, f3);
    EXPECT_NEAR(K.eval(f1, f2, f3), v, 1e-12 * std::max(1.0, std::fabs(v)));
    auto R = KernelTensor::riesz(L, 0, 1);
    double r = eval_naive(R, f1, f2, f3);
    EXPECT_NEAR(R.eval(f1, f2, f3), r, 1e-12 * std::max(1.0, std::fabs(r)));
}

TEST(Kernel, PairOnTensorProductsMatchesEval) {
    std::mt19937_64 rng(12);
    int L = 2, N = 4;
    auto K = KernelTensor::random(L, rng);
    std::normal_distribution<double> nd;
    Vec a[3], b[3];
    for (int i = 0; i < 3; ++i) {
        a[i] = Vec(N);
        b[i] = Vec(N);
        for (int c = 0; c < N; ++c) {
            a[i][c] = nd(rng);
            b[i][c] = nd(rng);
        }
    }
    double v = K.eval(DiscreteFunction::tensor(a[0], b[0]), DiscreteFunction::tensor(a[1], b[1]),
                      DiscreteFunction::tensor(a[2], b[2]));
    double p = K.pair(axis_triple(a[0], a[1], a[2]), axis_triple(b[0], b[1], b[2]));
    EXPECT_NEAR(p, v, 1e-12 * std::max(1.0, std::fabs(v)));
}

TEST(Kernel, RieszAxisKernelIsOddAndVanishesOnDiagonal) {
    int L = 3, N = 8;
    auto k0 = riesz_axis_kernel(L, 0), k1 = riesz_axis_kernel(L, 1);
    for (int x = 0; x < N; ++x) {
        EXPECT_EQ(k0(x, x, x), 0.0);
        for (int y = 0; y < N; ++y)
            for (int z = 0; z < N; ++z) {
                EXPECT_DOUBLE_EQ(k0(x, y, z), k1(x, z, y));
                // reflection x -> -x of the circle flips the sign away from the half-period
                int mx = (N - x) % N, my = (N - y) % N, mz = (N - z) % N;
                if ((x - y + N) % N != N / 2 && (x - z + N) % N != N / 2)
                    EXPECT_NEAR(k0(mx, my, mz), -k0(x, y, z), 1e-9);
            }
    }
    // adjacent cells: |x-y| = 1/N, x = z
    EXPECT_NEAR(k0(1, 0, 1), double(N) * N, 1e-9);
}

TEST(Kernel, FromFormReproducesTheForm) {
    std::mt19937_64 rng(13);
    int L = 2;
    GridShift w(L, 1, 2);
    auto S = ShiftOperator::random(L, w, {0, 1, 1}, {1, 0, 1}, 2, 1, rng);
    auto K = KernelTensor::from_form(S.lower());
    for (int r = 0; r < 3; ++r) {
        auto f1 = DiscreteFunction::random_normal(L, rng), f2 = DiscreteFunction::random_normal(L, rng),
             f3 = DiscreteFunction::random_normal(L, rng);
        double v = S.lower().form(f1, f2, f3);
        EXPECT_NEAR(K.eval(f1, f2, f3), v, 1e-12 * std::max(1.0, std::fabs(v)));
    }
}

TEST(Kernel, FileRoundTrip) {
    std::mt19937_64 rng(14);
    auto K = KernelTensor::random(1, rng);
    K.tag = "roundtrip";
    std::stringstream ss;
    K.write(ss);
    auto R = KernelTensor::read(ss);
    EXPECT_EQ(R.L(), 1);
    EXPECT_EQ(R.tag, "roundtrip");
    EXPECT_LE((R.weights() - K.weights()).cwiseAbs().maxCoeff(), 1e-15 * K.weights().cwiseAbs().maxCoeff());
    std::stringstream bad("dyad-kernel L 1 rows 8 cols 8\n1 2 3\n");
    EXPECT_THROW(KernelTensor::read(bad), std::runtime_error);
}

TEST(Kernel, ProbeSeparatesParaproductFreeForms) {
    std::mt19937_64 rng(15);
    int L = 2;
    GridShift w(L, 2, 1);
    auto S = ShiftOperator::random(L, w, {1, 0, 1}, {0, 1, 0}, 0, 2, rng);
    auto KS = KernelTensor::from_form(S.lower());
    EXPECT_LE(KS.probe(w).value(), 1e-12);
    auto P = FullParaproduct::from_symbol(DiscreteFunction::random_normal(L, rng), w, 2, 0);
    auto KP = KernelTensor::from_form(P.lower());
    EXPECT_GT(KP.probe(w).full, 1e-3);
    EXPECT_GT(KernelTensor::random(L, rng).probe(w).value(), 1e-3);
}

TEST(Kernel, SeparableSumAndScale) {
    int L = 2;
    auto A = KernelTensor::riesz(L, 0, 0), B = KernelTensor::riesz(L, 1, 0);
    auto C = (A + B).scaled(2.0);
    EXPECT_TRUE(C.is_separable());
    EXPECT_LE((C.weights() - 2.0 * (A.weights() + B.weights())).norm(), 1e-12 * C.weights().norm());
}

TEST(Kernel, ModulationBreaksParaproductFreeness) {
    int L = 3, N = 8;
    GridShift w(L, 5, 2);
    auto R = KernelTensor::riesz(L, 0, 1), M = KernelTensor::modulated_riesz(L, 0, 1);
    EXPECT_LE(R.probe(w).value(), 1e-12 * R.weights().cwiseAbs().maxCoeff());
    EXPECT_GT(M.probe(w).value(), 1e-6);
    // weight at x = (3, 6): Riesz weight times a(x1) a(x2)
    auto a = [&](int x) { return 1.0 + 0.5 * std::cos(2.0 * M_PI * (x + 0.5) / N); };
    int t1 = (3 * N + 1) * N + 4, t2 = (6 * N + 0) * N + 2;
    EXPECT_NEAR(M.weights()(t1, t2), R.weights()(t1, t2) * a(3) * a(6), 1e-15);
}
