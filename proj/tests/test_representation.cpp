#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>

#include "dyad/representation.hpp"

using namespace dyad;

namespace {

AxisLattice lattice1(int L, std::uint32_t code) { return AxisLattice(TorusGrid(L), AxisShift(L, code), 0); }

Vec random_vec(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    Vec v(n);
    for (int i = 0; i < n; ++i) v[i] = nd(rng);
    return v;
}

double rel(double a, double b) { return std::fabs(a - b) / std::max(1.0, std::fabs(b)); }

}  // namespace

// sum_i test_i (x) analysis_i is the identity on per-axis triple space
TEST(Catalog, TestAndAnalysisVectorsResolveTheIdentity) {
    for (int L : {1, 2, 3})
        for (std::uint32_t code = 0; code < (1u << L); code += (L == 3 ? 3 : 1)) {
            AxisCatalog cat(lattice1(L, code));
            int N = 1 << L;
            Mat I = cat.test_matrix() * cat.analysis_matrix().transpose() / double(N * N * N);
            EXPECT_LE((I - Mat::Identity(I.rows(), I.cols())).cwiseAbs().maxCoeff(), 1e-12) << "L=" << L << " code=" << code;
        }
}

TEST(Catalog, DictionaryCoefficientsMatchCellPairings) {
    std::mt19937_64 rng(21);
    int L = 3, N = 8;
    AxisCatalog cat(lattice1(L, 5));
    Vec w = random_vec(N * N * N, rng);
    Vec c = cat.coefficients(w);
    for (std::size_t i = 0; i < cat.size(); i += 7) EXPECT_NEAR(c[i], w.dot(cat.test_vector(i)), 1e-11);
}

TEST(Catalog, AxisDecompositionReconstructsUngated) {
    std::mt19937_64 rng(22);
    for (int L : {3, 4}) {
        int N = 1 << L;
        Vec w = random_vec(N * N * N, rng);
        AxisCatalog cat(lattice1(L, 6));
        Vec r = decompose_axis(w, cat, false);
        EXPECT_LE((r - w).norm() / w.norm(), 1e-12);
    }
}

TEST(Catalog, PiecesAndRolesAreConsistent) {
    int L = 3;
    auto lat = lattice1(L, 2);
    AxisCatalog cat(lat);
    std::map<Piece, int> count;
    for (const auto& it : cat.items()) {
        ++count[it.piece];
        for (int x = 0; x < 3; ++x) {
            EXPECT_TRUE(lat.is_ancestor_or_self(it.K, it.cube[x]));
            EXPECT_EQ(it.k[x], it.cube[x].level - it.K.level);
        }
        if (it.piece == Piece::Para) continue;
        EXPECT_EQ(it.eta[it.u()], 0);
        EXPECT_EQ(it.winner.level, it.cube[it.role[0]].level);
        if (it.piece == Piece::Nested) {
            EXPECT_TRUE(lat.is_ancestor_or_self(it.cube[it.u()], it.winner));
            EXPECT_TRUE(lat.is_ancestor_or_self(it.cube[it.role[1]], it.cube[it.u()]));
            EXPECT_EQ(it.test.size(), 2u);
        }
    }
    EXPECT_GT(count[Piece::Separated], 0);
    EXPECT_GT(count[Piece::Diagonal], 0);
    EXPECT_GT(count[Piece::Nested], 0);
    EXPECT_EQ(count[Piece::Para], 3 * ((1 << L) - 1));
}

// The leftover of the nested rewriting, summed over both orderings with a fixed
// I_s, collapses to the product of averages over I_s.
TEST(Catalog, NestedLeftoverTelescopesToAverages) {
    std::mt19937_64 rng(23);
    int L = 4, N = 16;
    auto lat = lattice1(L, 9);
    AxisCatalog cat(lat);
    const auto& d = cat.dict();
    Vec f[3] = {random_vec(N, rng), random_vec(N, rng), random_vec(N, rng)};
    auto pairing = [&](const Vec& g, int idx) { return g.dot(d.function(idx)) / N; };
    auto avg = [&](const Vec& g, const DyadicCube& I) { return g.dot(cube_indicator(I, N)) / I.len; };
    for (int sigma = 0; sigma < 3; ++sigma)
        for (int l = 1; l < L; ++l)
            for (const auto& Is : lat.level_cubes(l)) {
                double sum = 0;
                for (const auto& it : cat.items()) {
                    if (it.piece != Piece::Nested || it.role[0] != sigma || !(it.winner == Is)) continue;
                    int t = it.role[1], u = it.role[2];
                    const auto &It = it.cube[t], &Iu = it.cube[u];
                    DyadicCube C = Iu.level > It.level ? Iu : lat.ancestor(Is, l - It.level - 1);
                    double hC = d.function(it.d[t])[C.start % N];
                    sum += hC / std::sqrt(Iu.side()) * pairing(f[t], it.d[t]) * pairing(f[u], it.d[u]);
                }
                int a = (sigma + 1) % 3, b = (sigma + 2) % 3;
                EXPECT_NEAR(sum, avg(f[a], Is) * avg(f[b], Is), 1e-12);
            }
}

TEST(Catalog, OrderingsPartitionLevelTriples) {
    for (int a = 0; a < 5; ++a)
        for (int b = 0; b < 5; ++b)
            for (int c = 0; c < 5; ++c) EXPECT_EQ(ordering_matches({a, b, c}), 1);
    // bi-parameter: the nine symmetries (s1, s2) consume every 6-tuple of levels once
    std::map<std::pair<int, int>, int> sym;
    int total = 0;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
            for (int c = 0; c < 3; ++c)
                for (int x = 0; x < 3; ++x)
                    for (int y = 0; y < 3; ++y)
                        for (int z = 0; z < 3; ++z) {
                            EXPECT_EQ(ordering_matches({a, b, c}) * ordering_matches({x, y, z}), 1);
                            ++total;
                        }
    EXPECT_EQ(total, 729);
}

TEST(Ancestor, TrivialCases) {
    auto lat = lattice1(3, 3);
    GoodnessParams gp;
    auto I = lat.cube(2, 1);
    EXPECT_TRUE(common_ancestor(lat, I, I, I, gp).K == I);
    auto a = lat.left_child(lat.cube(1, 0)), b = lat.right_child(lat.cube(1, 0));
    EXPECT_TRUE(lat.common_ancestor(a, b) == lat.cube(1, 0));
    EXPECT_TRUE(common_ancestor(lat, a, b, a, gp).K == lat.cube(1, 0));
}

// every good I3 triple in the separated and diagonal classes satisfies the lemma bounds
TEST(Ancestor, ExhaustiveScanAtLevelFour) {
    int L = 4;
    for (GoodnessParams gp : {GoodnessParams{2, 1.0 / 6.0}, GoodnessParams{1, 0.5}})
        for (std::uint32_t code : {0u, 5u, 10u, 15u}) {
            auto lat = lattice1(L, code);
            int checked = 0;
            for (int l3 = 0; l3 <= L; ++l3)
                for (int l1 = 0; l1 <= l3; ++l1) {
                    if (l1 + 1 > L) continue;
                    for (const auto& I3 : lat.level_cubes(l3)) {
                        if (!is_good(lat, I3, gp)) continue;
                        for (const auto& I1 : lat.level_cubes(l1))
                            for (const auto& I2 : lat.level_cubes(l1 + 1)) {
                                auto r = common_ancestor(lat, I1, I2, I3, gp);
                                EXPECT_TRUE(r.holds) << piece_name(r.piece) << " lhs=" << r.lhs << " rhs=" << r.rhs;
                                ++checked;
                            }
                    }
                }
            EXPECT_GT(checked, 10);
        }
}

TEST(Decompose, ZeroFormIsEmpty) {
    auto r = decompose(KernelTensor(2), GridShift(2, 1, 3));
    EXPECT_TRUE(r.terms.empty());
    EXPECT_EQ(r.residual, 0.0);
}

TEST(Decompose, RandomAndRieszReconstruct) {
    std::mt19937_64 rng(24);
    for (int L : {2, 3}) {
        GridShift w(L, 3 % (1u << L), 1);
        auto r = decompose(KernelTensor::random(L, rng), w);
        EXPECT_LE(r.residual, 1e-10);
        EXPECT_GT(r.reference, 0);
        auto q = decompose(KernelTensor::riesz(L, 0, 1), w);
        EXPECT_LE(q.residual, 1e-10);
    }
}

TEST(Decompose, SingleShiftRoundTrip) {
    std::mt19937_64 rng(25);
    int L = 2;
    GridShift w(L, 2, 3);
    auto S = ShiftOperator::random(L, w, {1, 0, 1}, {0, 1, 1}, 1, 2, rng);
    auto K = KernelTensor::from_form(S.lower());
    DecomposeOptions opt;
    opt.keep_terms = true;
    auto r = decompose(K, w, opt);
    EXPECT_LE(r.residual, 1e-10);
    HaarForm total = r.total_form();
    for (int i = 0; i < 3; ++i) {
        auto f1 = DiscreteFunction::random_normal(L, rng), f2 = DiscreteFunction::random_normal(L, rng),
             f3 = DiscreteFunction::random_normal(L, rng);
        double v = S.lower().form(f1, f2, f3);
        EXPECT_LE(rel(total.form(f1, f2, f3), v), 1e-10);
    }
    // a pure shift is paraproduct free: extracted symbols vanish up to roundoff
    double scale = 0;
    for (const auto& t : r.terms) scale = std::max(scale, t.constant * t.alpha_weight);
    for (const auto& t : r.terms)
        if (t.family != "shift") EXPECT_LE(t.constant * t.alpha_weight, 1e-12 * scale) << t.tag();
    // every kept operator passes its builder validation
    for (const auto& t : r.terms)
        std::visit([](const auto& o) {
            if constexpr (!std::is_same_v<std::decay_t<decltype(o)>, FullParaproduct>) o.validate();
        }, t.op.front());
}

TEST(Decompose, FullParaproductRoundTrip) {
    std::mt19937_64 rng(26);
    int L = 2;
    GridShift w(L, 1, 2);
    auto b = DiscreteFunction::random_normal(L, rng);
    for (int s1 = 0; s1 < 3; ++s1)
        for (int s2 = 0; s2 < 3; ++s2) {
            auto P = FullParaproduct::from_symbol(b, w, s1, s2);
            DecomposeOptions opt;
            opt.keep_terms = true;
            auto r = decompose(KernelTensor::from_form(P.lower()), w, opt);
            EXPECT_LE(r.residual, 1e-10);
            double lam_err = 1.0;
            for (const auto& t : r.terms) {
                if (t.family == "full" && t.s[0] == s1 && t.s[1] == s2) {
                    const auto& F = std::get<FullParaproduct>(t.op.front());
                    lam_err = (F.lambda() * t.constant - P.lambda()).cwiseAbs().maxCoeff();
                } else {
                    EXPECT_LE(t.constant * t.alpha_weight, 1e-12) << t.tag();
                }
            }
            EXPECT_LE(lam_err, 1e-12);
        }
    // constant symbol: no paraproduct at all
    auto P0 = FullParaproduct::from_symbol(DiscreteFunction::constant(L, 3.0), w, 2, 2);
    EXPECT_EQ(P0.lambda().cwiseAbs().maxCoeff(), 0.0);
    EXPECT_TRUE(decompose(KernelTensor::from_form(P0.lower()), w).terms.empty());
}

TEST(Decompose, PartialParaproductRoundTrip) {
    std::mt19937_64 rng(27);
    int L = 2;
    GridShift w(L, 3, 0);
    auto P = PartialParaproduct::random(L, w, 0, {0, 1, 1}, 0, 2, rng);
    auto r = decompose(KernelTensor::from_form(P.lower()), w);
    EXPECT_LE(r.residual, 1e-10);
    bool found = false;
    for (const auto& t : r.terms)
        if (t.family == "partial" && t.s[0] == 2 && t.constant > 1e-6) found = true;
    EXPECT_TRUE(found);
}

TEST(Decompose, ProfileMatchesExtractedConstants) {
    int L = 3;
    GridShift w(L, 6, 3);
    auto K = KernelTensor::riesz(L, 1, 0);
    auto r = decompose(K, w);
    auto p = coefficient_profile(K, w);
    std::map<std::pair<std::string, int>, double> a, b;
    for (const auto& t : r.terms) {
        auto key = std::make_pair(t.family, t.max_complexity());
        a[key] = std::max(a[key], t.constant);
    }
    for (const auto& e : p) {
        auto key = std::make_pair(e.family, e.max_complexity);
        b[key] = std::max(b[key], e.constant);
    }
    ASSERT_EQ(a.size(), b.size());
    for (const auto& [k, v] : a) EXPECT_LE(rel(b[k], v), 1e-9) << k.first << " " << k.second;
}

TEST(Decompose, TruncationAndResolution) {
    int L = 2;
    GridShift w(L, 0, 0);
    DecomposeOptions opt;
    opt.max_complexity = L + 1;
    EXPECT_THROW(decompose(KernelTensor::riesz(L, 0, 0), w, opt), ResolutionError);
    opt.max_complexity = 0;
    std::mt19937_64 rng(28);
    EXPECT_GT(decompose(KernelTensor::random(L, rng), w, opt).residual, 1e-6);
}

TEST(Decompose, ManifestAndTermFiles) {
    std::mt19937_64 rng(29);
    int L = 2;
    GridShift w(L, 1, 1);
    DecomposeOptions opt;
    opt.keep_terms = true;
    auto r = decompose(KernelTensor::random(L, rng), w, opt);
    auto dir = std::filesystem::temp_directory_path() / "dyad_manifest_test";
    std::filesystem::remove_all(dir);
    r.write(dir);
    std::ifstream in(dir / "manifest.json");
    auto m = nlohmann::json::parse(in);
    EXPECT_EQ(m["terms"].size(), r.terms.size());
    auto f0 = m["terms"][0]["file"].get<std::string>();
    std::ifstream t(dir / f0);
    auto j = nlohmann::json::parse(t);
    EXPECT_TRUE(j.contains("family"));
    std::filesystem::remove_all(dir);
}

TEST(Averaged, FullEnumerationAtLevelTwoIsExact) {
    std::mt19937_64 rng(30);
    auto K = KernelTensor::random(2, rng);
    DecomposeOptions opt;
    EXPECT_LE(averaged_decompose(K, opt).residual, 1e-10);
    opt.gated = true;
    EXPECT_LE(averaged_decompose(K, opt).residual, 1e-10);
}

TEST(Averaged, SingleSampleEqualsDecompose) {
    std::mt19937_64 rng(31);
    auto K = KernelTensor::random(2, rng);
    std::mt19937_64 s(77);
    GridShift w = sample_shift(2, s);
    DecomposeOptions opt;
    auto one = averaged_decompose(K, opt, 1, 77);
    EXPECT_NEAR(one.residual, decompose(K, w).residual, 1e-12);
}

// Non-trivial goodness: at L=5 with gamma=1/2, r=3 deep cubes are good with
// probability below one. Single shifts are biased, the enumeration is exact.
TEST(Averaged, GatedAxisIdentityNeedsTheAverage) {
    std::mt19937_64 rng(32);
    int L = 5, N = 32;
    GoodnessParams gp{3, 0.5};
    ASSERT_GT(good_probability(L, 4, gp), 0.0);
    ASSERT_LT(good_probability(L, 4, gp), 1.0);
    Vec w = random_vec(N * N * N, rng);
    AxisCatalog cat(lattice1(L, 13), gp);
    EXPECT_GT((decompose_axis(w, cat, true) - w).norm() / w.norm(), 1e-3);
    EXPECT_LE((decompose_axis(w, cat, false) - w).norm() / w.norm(), 1e-12);
    EXPECT_LE(averaged_decompose_axis(w, L, gp, true).residual, 1e-11);
}

TEST(Averaged, MonteCarloErrorHalvesWhenSamplesQuadruple) {
    std::mt19937_64 rng(33);
    int L = 5, N = 32;
    GoodnessParams gp{3, 0.5};
    Vec w = random_vec(N * N * N, rng);
    auto a = averaged_decompose_axis(w, L, gp, true, 16, 1);
    auto b = averaged_decompose_axis(w, L, gp, true, 64, 2);
    double ratio = b.stderr_ / a.stderr_;
    EXPECT_GT(ratio, 0.35);
    EXPECT_LT(ratio, 0.65);
}
