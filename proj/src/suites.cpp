#include "suites.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "dyad/commutators.hpp"
#include "dyad/kernel.hpp"
#include "dyad/lower_bounds.hpp"
#include "dyad/measures.hpp"
#include "dyad/model_ops.hpp"
#include "dyad/representation.hpp"

namespace dyad::suites {

namespace {

std::string seed_range(const ExperimentConfig& c) {
    if (c.samples == 0) return "none";
    return std::to_string(c.seed) + ".." + std::to_string(c.seed + c.samples - 1);
}

Row make_row(const std::string& id, std::uint64_t seed, const std::string& inputs) {
    Row r;
    r.experiment = id;
    r.seed = seed;
    r.digest = fnv1a_hex(inputs);
    return r;
}

// max with the seed that produced it; NaN sticks
struct MaxTracker {
    double max = 0.0;
    std::uint64_t seed = 0;
    std::size_t n = 0;
    void add(double v, std::uint64_t s) {
        ++n;
        if (std::isnan(max)) return;
        if (std::isnan(v) || v > max) {
            max = v;
            seed = s;
        }
    }
};

// ordered accumulation of per-key maxima
struct MaxTable {
    std::vector<std::string> order;
    std::map<std::string, MaxTracker> t;
    void add(const std::string& k, double v, std::uint64_t s) {
        if (!t.count(k)) order.push_back(k);
        t[k].add(v, s);
    }
};

struct Samples {
    std::vector<double> v;
    double quantile(double q) const {
        if (v.empty()) return 0.0;
        auto s = v;
        std::sort(s.begin(), s.end());
        return s[static_cast<std::size_t>(std::floor(q * (s.size() - 1)))];
    }
    double max() const {
        double m = 0.0;
        for (double x : v) {
            if (std::isnan(x)) return x;
            m = std::max(m, x);
        }
        return m;
    }
};

void add_quantiles(Row& r, const Samples& s) {
    r.value("n", static_cast<double>(s.v.size()))
        .value("q50", s.quantile(0.5))
        .value("q90", s.quantile(0.9))
        .value("q99", s.quantile(0.99))
        .value("max", s.max());
}

double frob_rel(const Mat& a, const Mat& b) {
    double n = b.norm();
    return (a - b).norm() / (n > 0 ? n : 1.0);
}

int uniform(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

std::array<int, 3> random_levels(std::mt19937_64& rng, int hi) {
    return {uniform(rng, 0, hi), uniform(rng, 0, hi), uniform(rng, 0, hi)};
}

// kind 0: normal; 1: indicator of an arc rectangle shorter than the torus; 2: |normal|^3
DiscreteFunction sample_input(int L, std::mt19937_64& rng, int kind) {
    int N = 1 << L;
    switch (kind % 3) {
        case 1: {
            Mat v = Mat::Zero(N, N);
            int l1 = N >> uniform(rng, 1, L), l2 = N >> uniform(rng, 1, L);
            int s1 = uniform(rng, 0, N - 1), s2 = uniform(rng, 0, N - 1);
            for (int i = 0; i < l1; ++i)
                for (int j = 0; j < l2; ++j) v((s1 + i) % N, (s2 + j) % N) = 1.0;
            return {L, v};
        }
        case 2: {
            auto f = DiscreteFunction::random_normal(L, rng);
            return {L, f.values().array().abs().cube().matrix()};
        }
        default:
            return DiscreteFunction::random_normal(L, rng);
    }
}

DiscreteFunction normalized_symbol(int L, std::mt19937_64& rng) {
    auto b = DiscreteFunction::random_normal(L, rng);
    return b * (1.0 / bmo_little(b));
}

Weight make_weight(const std::string& spec, int L) {
    if (spec == "unit") return Weight::unit(L);
    std::istringstream is(spec);
    std::string kind, a, b;
    std::getline(is, kind, ':');
    std::getline(is, a, ':');
    std::getline(is, b, ':');
    if (kind == "power") return Weight::power(L, std::stod(a), std::stod(b));
    return Weight::lacunary(L, std::stod(a), std::stod(b));
}

double ratio(double num, double den) { return den > 0 ? num / den : 0.0; }

// mean-zero in both variables
DiscreteFunction bi_mean_zero(const DiscreteFunction& f) {
    const Mat& v = f.values();
    Vec r = v.rowwise().mean(), c = v.colwise().mean().transpose();
    Mat out = v;
    out.colwise() -= r;
    out.rowwise() -= c.transpose();
    out.array() += v.mean();
    return {f.L(), out};
}

// Delta_I on one axis with the top convention Delta + E at level 0
DiscreteFunction axis_difference(const DiscreteFunction& f, const AxisLattice& lat, const DyadicCube& I) {
    auto d = martingale_difference(f, lat, I);
    if (I.level > 0) return d;
    Mat v = f.values();
    if (lat.axis() == 0) v.rowwise() = v.colwise().mean();
    else v.colwise() = v.rowwise().mean();
    return d + DiscreteFunction(f.L(), v);
}

// E_{2^-M1, 2^-M2} by direct block averaging
Mat block_average(const DiscreteFunction& f, const ShiftedGrid& g, int M1, int M2) {
    int N = g.N();
    Mat out(N, N);
    for (int x1 = 0; x1 < N; ++x1)
        for (int x2 = 0; x2 < N; ++x2) {
            auto I = g.lattice(0).cube_of_cell(M1, x1), J = g.lattice(1).cube_of_cell(M2, x2);
            double s = 0.0;
            for (int a = 0; a < I.len; ++a)
                for (int b = 0; b < J.len; ++b) s += f((I.start + a) % N, (J.start + b) % N);
            out(x1, x2) = s / (double(I.len) * J.len);
        }
    return out;
}

std::string pattern_name(int u1, int u2) { return "u" + std::to_string(u1) + std::to_string(u2); }

}  // namespace

// ---- identities ----

std::vector<Row> identity(const ExperimentConfig& c) {
    const int L = c.grid_level, N = 1 << L;
    const double tol = c.tol("exact");
    MaxTable acc;
    for (int i = 0; i < c.samples; ++i) {
        const std::uint64_t s = c.seed + i;
        std::mt19937_64 rng(s);
        GridShift w = sample_shift(L, rng);
        ShiftedGrid g(L, w);
        auto f = DiscreteFunction::random_normal(L, rng), b = DiscreteFunction::random_normal(L, rng);

        Mat C = g.coefficients(f);
        double sum = 0.0;
        for (int a : g.dict(0).orthonormal_indices())
            for (int d : g.dict(1).orthonormal_indices()) sum += C(a, d) * C(a, d);
        acc.add("parseval", std::fabs(sum - f.pair(f)) / f.pair(f), s);

        Mat T = Mat::Zero(N, N);
        for (int l1 = 0; l1 < L; ++l1)
            for (int l2 = 0; l2 < L; ++l2)
                T += g.dict(0).difference_le(l1) * f.values() * g.dict(1).difference_le(l2).transpose();
        acc.add("telescoping", frob_rel(T, f.values()), s);

        // per-level blocks of rectangle differences, then partial sums
        std::vector<std::vector<Mat>> B(L, std::vector<Mat>(L, Mat::Zero(N, N)));
        for (int l1 = 0; l1 < L; ++l1)
            for (const auto& I : g.lattice(0).level_cubes(l1)) {
                auto fi = axis_difference(f, g.lattice(0), I);
                for (int l2 = 0; l2 < L; ++l2)
                    for (const auto& J : g.lattice(1).level_cubes(l2))
                        B[l1][l2] += axis_difference(fi, g.lattice(1), J).values();
            }
        double collapse = 0.0;
        for (int M1 = 1; M1 <= L; ++M1)
            for (int M2 = 1; M2 <= L; ++M2) {
                Mat rhs = Mat::Zero(N, N);
                for (int l1 = 0; l1 < M1; ++l1)
                    for (int l2 = 0; l2 < M2; ++l2) rhs += B[l1][l2];
                collapse = std::max(collapse, frob_rel(rhs, block_average(f, g, M1, M2)));
            }
        acc.add("collapse", collapse, s);

        ProductExpansion P(b, f, g);
        const auto& D1 = g.dict(0);
        const auto& D2 = g.dict(1);
        double e_bi = 0.0, e_one = 0.0, e_none = 0.0;
        for (int d1 = 0; d1 < D1.size(); ++d1)
            for (int d2 = 0; d2 < D2.size(); ++d2) {
                double e = P.pairing(d1, d2).error();
                bool c1 = D1.cancellative(d1), c2 = D2.cancellative(d2);
                double& slot = c1 && c2 ? e_bi : (c1 || c2 ? e_one : e_none);
                slot = std::max(slot, e);
            }
        acc.add("expansion:biparameter", e_bi, s);
        acc.add("expansion:one-parameter", e_one, s);
        acc.add("expansion:none", e_none, s);
        {
            int l1 = uniform(rng, 0, L - 1), l2 = uniform(rng, 0, L - 1);
            auto I = g.lattice(0).cube(l1, uniform(rng, 0, (1 << l1) - 1));
            auto J = g.lattice(1).cube(l2, uniform(rng, 0, (1 << l2) - 1));
            double e = expand_bipar(b, f, I, J, g).error();
            e = std::max(e, expand_onepar(b, f, I, J, 0, g).error());
            e = std::max(e, expand_onepar(b, f, I, J, 1, g).error());
            e = std::max(e, expand_none(b, f, I, J, g).error());
            acc.add("expansion:single-rectangle", e, s);
        }

        auto f1 = DiscreteFunction::random_normal(L, rng), f2 = DiscreteFunction::random_normal(L, rng),
             f3 = DiscreteFunction::random_normal(L, rng);
        const int kmax = std::min(1, L - 1);
        std::vector<HaarForm> forms;
        for (int u1 = 0; u1 < 3; ++u1)
            for (int u2 = 0; u2 < 3; ++u2) {
                auto H = ShiftOperator::random(L, w, random_levels(rng, kmax), random_levels(rng, kmax), u1, u2, rng)
                             .lower();
                for (int slot : {1, 2})
                    acc.add("commutator:shift:" + pattern_name(u1, u2),
                            commutator_decompose(b, H, slot, f1, f2, f3).error(), s);
                forms.push_back(std::move(H));
            }
        {
            auto H = PartialParaproduct::random(L, w, uniform(rng, 0, 1), random_levels(rng, kmax), uniform(rng, 0, 2),
                                                uniform(rng, 0, 2), rng)
                         .lower();
            for (int slot : {1, 2})
                acc.add("commutator:partial", commutator_decompose(b, H, slot, f1, f2, f3).error(), s);
            forms.push_back(std::move(H));
        }
        {
            auto F = FullParaproduct::from_symbol(DiscreteFunction::random_normal(L, rng), w, uniform(rng, 0, 2),
                                                  uniform(rng, 0, 2));
            F.normalize();
            auto H = F.lower();
            for (int slot : {1, 2}) acc.add("commutator:full", commutator_decompose(b, H, slot, f1, f2, f3).error(), s);
            forms.push_back(std::move(H));
        }
        {
            // round robin over the sources built above
            const auto& H = forms[s % forms.size()];
            auto b2 = DiscreteFunction::random_normal(L, rng);
            std::array<int, 2> slots{uniform(rng, 1, 2), uniform(rng, 1, 2)};
            acc.add("commutator:iterated", iterated_commutator_decompose(b2, b, H, slots, f1, f2, f3).error(), s);
        }
    }
    std::vector<Row> rows;
    for (const auto& k : acc.order) {
        const auto& t = acc.t.at(k);
        auto row = make_row("identity:" + k, c.seed, "identity|L=" + std::to_string(L) + "|" + seed_range(c) + "|" + k);
        row.label("identity", k).label("seeds", seed_range(c));
        row.value("level", L).value("n", t.n).value("max_error", t.max).value("worst_seed", t.seed).value("tol", tol);
        row.pass = t.max <= tol;
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---- representation ----

namespace {

// "riesz" / "modulated": the four components; "rieszIJ" / "modulatedIJ": one; "file:PATH": dense file
std::vector<std::pair<std::string, KernelTensor>> tensor_kernels(const std::string& name, int L) {
    for (std::string fam : {"riesz", "modulated"}) {
        auto make = [&](int i1, int i2) {
            return fam == "riesz" ? KernelTensor::riesz(L, i1, i2) : KernelTensor::modulated_riesz(L, i1, i2);
        };
        if (name == fam) {
            std::vector<std::pair<std::string, KernelTensor>> out;
            for (int i1 = 0; i1 < 2; ++i1)
                for (int i2 = 0; i2 < 2; ++i2)
                    out.emplace_back(fam + std::to_string(i1 + 1) + std::to_string(i2 + 1), make(i1, i2));
            return out;
        }
        if (name.size() == fam.size() + 2 && name.rfind(fam, 0) == 0) {
            int i1 = name[fam.size()] - '1', i2 = name[fam.size() + 1] - '1';
            if (i1 >= 0 && i1 < 2 && i2 >= 0 && i2 < 2) return {{name, make(i1, i2)}};
        }
    }
    if (name.rfind("file:", 0) == 0) {
        std::ifstream in(name.substr(5));
        if (!in) throw UnknownKernel("missing kernel plug-in '" + name + "'");
        auto K = KernelTensor::read(in);
        if (K.L() != L) throw ConfigError("kernel file level differs from grid_level");
        return {{name, K}};
    }
    throw UnknownKernel("missing kernel plug-in '" + name + "'");
}

const std::vector<std::pair<std::uint32_t, std::uint32_t>> kProfileShifts{{0, 0}, {1, 3}, {5, 2}, {7, 7}};

}  // namespace

void check_tensor_kernel(const std::string& name) {
    if (name.rfind("file:", 0) == 0) {
        if (!std::ifstream(name.substr(5))) throw UnknownKernel("missing kernel plug-in '" + name + "'");
        return;
    }
    tensor_kernels(name, 1);
}

std::vector<Row> representation(const ExperimentConfig& c) {
    const int L = c.grid_level;
    const double tol = c.tol("exact"), tol_x = c.tol("extraction");
    std::vector<Row> rows;
    auto lvl = "|L=" + std::to_string(L);

    if (c.wants("reconstruction")) {
        if (L > 3) throw ResolutionError("dense reconstruction needs grid_level <= 3");
        for (int i = 0; i < c.samples; ++i) {
            const std::uint64_t s = c.seed + i;
            std::mt19937_64 rng(s);
            auto K = KernelTensor::random(L, rng);
            GridShift w = sample_shift(L, rng);
            auto r = decompose(K, w);
            auto row = make_row("reconstruction:random", s, "reconstruction|random" + lvl + "|seed=" + std::to_string(s));
            row.label("kernel", "random").label("shift", w.id());
            row.value("level", L).value("residual", r.residual).value("terms", r.terms.size()).value("tol", tol);
            row.pass = r.residual <= tol;
            rows.push_back(std::move(row));
        }
        std::mt19937_64 rng(c.seed);
        GridShift w = sample_shift(L, rng);
        for (const auto& name : c.kernels)
            for (const auto& [id, K] : tensor_kernels(name, L)) {
                auto r = decompose(K, w);
                auto row = make_row("reconstruction:" + id, c.seed, "reconstruction|" + id + lvl + "|" + w.id());
                row.label("kernel", id).label("shift", w.id());
                row.value("level", L).value("residual", r.residual).value("terms", r.terms.size()).value("tol", tol);
                row.pass = r.residual <= tol;
                rows.push_back(std::move(row));
            }
    }

    if (c.wants("averaged")) {
        const int La = 2;
        std::mt19937_64 rng(c.seed);
        std::vector<std::pair<std::string, KernelTensor>> ks{{"random", KernelTensor::random(La, rng)},
                                                             {"riesz12", KernelTensor::riesz(La, 0, 1)}};
        for (const auto& [id, K] : ks)
            for (bool gated : {false, true}) {
                DecomposeOptions opt;
                opt.gated = gated;
                auto a = averaged_decompose(K, opt);
                std::string g = gated ? "gated" : "plain";
                auto row = make_row("averaged:" + id + ":" + g, c.seed, "averaged|" + id + "|" + g + "|L=2");
                row.label("kernel", id).label("mode", g);
                row.value("level", La).value("shifts", a.samples).value("residual", a.residual).value("tol", tol);
                row.pass = a.residual <= tol;
                rows.push_back(std::move(row));
            }
    }

    if (c.wants("roundtrip")) {
        const int Lr = 2;
        std::mt19937_64 rng(c.seed + 1);
        GridShift w = sample_shift(Lr, rng);
        struct Source {
            std::string id;
            HaarForm H;
            bool paraproduct_free;
        };
        std::vector<Source> src;
        for (int u1 = 0; u1 < 3; ++u1)
            for (int u2 = 0; u2 < 3; ++u2)
                src.push_back({"shift:" + pattern_name(u1, u2),
                               ShiftOperator::random(Lr, w, random_levels(rng, 1), random_levels(rng, 1), u1, u2, rng)
                                   .lower(),
                               true});
        for (int axis = 0; axis < 2; ++axis)
            for (int pt = 0; pt < 3; ++pt)
                src.push_back({"partial:axis" + std::to_string(axis + 1) + ":type" + std::to_string(pt),
                               PartialParaproduct::random(Lr, w, axis, random_levels(rng, 1), uniform(rng, 0, 2), pt, rng)
                                   .lower(),
                               false});
        for (int s1 = 0; s1 < 3; ++s1)
            for (int s2 = 0; s2 < 3; ++s2) {
                auto F = FullParaproduct::from_symbol(DiscreteFunction::random_normal(Lr, rng), w, s1, s2);
                F.normalize();
                src.push_back({"full:s" + std::to_string(s1) + std::to_string(s2), F.lower(), false});
            }
        for (const auto& [id, H, free] : src) {
            auto K = KernelTensor::from_form(H);
            DecomposeOptions opt;
            opt.keep_terms = true;
            auto r = decompose(K, w, opt);
            double err = frob_rel(KernelTensor::from_form(r.total_form()).weights(), K.weights());
            double cmax = 0.0;
            for (const auto& e : H.entries()) cmax = std::max(cmax, std::fabs(e.c));
            auto pr = K.probe(w);
            bool certified = pr.full <= tol_x * std::max(cmax, pr.value());
            double scale = 0.0, full = 0.0;
            for (const auto& t : r.terms) {
                scale = std::max(scale, t.constant * t.alpha_weight);
                if (t.family == "full") full = std::max(full, t.constant * t.alpha_weight);
            }
            double full_rel = scale > 0 ? full / scale : 0.0;
            auto row = make_row("roundtrip:" + id, c.seed, "roundtrip|" + id + "|L=2|" + w.id());
            row.label("source", id).label("shift", w.id());
            row.value("level", Lr)
                .value("form_error", err)
                .value("probe_full", pr.full)
                .value("certified", certified ? 1 : 0)
                .value("full_extracted", full_rel)
                .value("tol", tol);
            row.pass = err <= tol && (!certified || full_rel <= tol_x) && (!free || certified);
            rows.push_back(std::move(row));
        }
    }

    if (c.wants("coefficients")) {
        DecomposeOptions opt;
        opt.gated = true;
        for (int Lc : c.levels) {
            std::map<std::pair<std::string, int>, double> mx;
            std::vector<std::string> used;
            for (const auto& name : c.kernels)
                for (const auto& [id, K] : tensor_kernels(name, Lc)) {
                    used.push_back(id);
                    for (auto [c1, c2] : kProfileShifts) {
                        std::uint32_t m = (1u << Lc) - 1;
                        for (const auto& e : coefficient_profile(K, GridShift(Lc, c1 & m, c2 & m), opt)) {
                            auto& v = mx[{e.family, e.max_complexity}];
                            v = std::max(v, e.constant);
                        }
                    }
                }
            std::string ks;
            for (const auto& u : used) ks += (ks.empty() ? "" : "+") + u;
            for (const auto& [key, v] : mx) {
                std::string cell = key.first + ":k" + std::to_string(key.second);
                auto row = make_row("coefficients:" + cell + ":L" + std::to_string(Lc), c.seed,
                                    "coefficients|" + ks + "|" + cell + "|L=" + std::to_string(Lc));
                row.label("family", key.first).label("kernels", ks).label("golden_key", cell);
                row.value("level", Lc).value("complexity", key.second).value("stat", v);
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

// ---- weighted sweeps ----

std::vector<Row> weighted(const ExperimentConfig& c) {
    const int L = c.grid_level;
    auto has = [&](const std::string& f) { return std::find(c.families.begin(), c.families.end(), f) != c.families.end(); };
    std::vector<Weight> W;
    for (const auto& s : c.weights) W.push_back(make_weight(s, L));

    struct BiCell {
        std::string family;
        std::size_t e, w;
        Weight v3;
        Samples s;
    };
    struct LinCell {
        std::string family;
        double p;
        std::size_t w;
        Samples s;
    };
    std::vector<BiCell> bi;
    std::vector<LinCell> lin;
    for (const char* fam : {"shift", "partial", "full"})
        if (has(fam))
            for (std::size_t e = 0; e < c.exponents.size(); ++e)
                for (std::size_t w = 0; w < W.size(); ++w) {
                    const auto& x = c.exponents[e];
                    bi.push_back({fam, e, w, W[w].pow(x.r / x.p) * W[w].pow(x.r / x.q), {}});
                }
    for (const char* fam : {"aux", "adapted", "lower-sf"})
        if (has(fam))
            for (double p : c.linear_exponents)
                for (std::size_t w = 0; w < W.size(); ++w) lin.push_back({fam, p, w, {}});

    const int kmax = std::min(1, L - 1);
    for (int i = 0; i < c.samples; ++i) {
        const std::uint64_t s = c.seed + i;
        std::mt19937_64 rng(s);
        GridShift w = sample_shift(L, rng);
        ShiftedGrid g(L, w);
        auto f1 = sample_input(L, rng, s % 3), f2 = sample_input(L, rng, s % 3 + 1);
        std::map<std::string, DiscreteFunction> out;
        if (has("shift"))
            out["shift"] = ShiftOperator::random(L, w, random_levels(rng, kmax), random_levels(rng, kmax),
                                                 uniform(rng, 0, 2), uniform(rng, 0, 2), rng)
                               .lower()
                               .apply(f1, f2);
        if (has("partial"))
            out["partial"] = PartialParaproduct::random(L, w, uniform(rng, 0, 1), random_levels(rng, kmax),
                                                        uniform(rng, 0, 2), uniform(rng, 0, 2), rng)
                                 .lower()
                                 .apply(f1, f2);
        if (has("full")) {
            int s1 = uniform(rng, 0, 2), s2 = uniform(rng, 0, 2);
            auto F = FullParaproduct::from_symbol(DiscreteFunction::random_normal(L, rng), w, s1, s2);
            F.normalize();
            out["full"] = F.lower().apply(f1, f2);
            // weighted cells use tensor symbols
            int N = 1 << L;
            std::normal_distribution<double> nd;
            Vec a(N), b(N);
            for (int k = 0; k < N; ++k) a[k] = nd(rng), b[k] = nd(rng);
            auto T = FullParaproduct::from_symbol(DiscreteFunction::tensor(a, b), w, s1, s2);
            T.normalize();
            out["full-tensor"] = T.lower().apply(f1, f2);
        }
        ExpansionTag tag = static_cast<ExpansionTag>(s % 12);
        auto kind = static_cast<AdaptedKind>(s % 5);
        DiscreteFunction bsym = normalized_symbol(L, rng);
        if (has("aux")) out["aux"] = paraproduct_aux(tag, bsym, f1, g);
        if (has("adapted")) out["adapted"] = adapted_maximal_apply({bsym, kind, w}, f1);
        auto fz = bi_mean_zero(f1);

        for (auto& cell : bi) {
            const auto& x = c.exponents[cell.e];
            const auto& wt = W[cell.w];
            bool unit = c.weights[cell.w] == "unit";
            const auto& o = out.at(cell.family == "full" && !unit ? "full-tensor" : cell.family);
            cell.s.v.push_back(ratio(lp_norm(o, x.r, &cell.v3), lp_norm(f1, x.p, &wt) * lp_norm(f2, x.q, &wt)));
        }
        for (auto& cell : lin) {
            const auto& wt = W[cell.w];
            if (cell.family == "lower-sf") {
                auto rep = lower_sf_ainfty_check(fz, wt, cell.p, g);
                double m = std::max({rep.ratio_axis1, rep.ratio_axis2, rep.ratio_bipar});
                cell.s.v.push_back(std::pow(m, 1.0 / cell.p));
            } else {
                cell.s.v.push_back(ratio(lp_norm(out.at(cell.family), cell.p, &wt), lp_norm(f1, cell.p, &wt)));
            }
        }
    }

    std::vector<Row> rows;
    auto base = "weighted|L=" + std::to_string(L) + "|" + seed_range(c) + "|";
    for (const auto& cell : bi) {
        const auto& x = c.exponents[cell.e];
        std::string id = "weighted:" + cell.family + ":" + x.label() + ":" + c.weights[cell.w];
        auto row = make_row(id, c.seed, base + id);
        row.label("family", cell.family).label("exponents", x.label()).label("weight", c.weights[cell.w]);
        row.label("seeds", seed_range(c)).label("golden_key", id);
        row.value("p", x.p).value("q", x.q).value("r", x.r);
        row.value("ap_w1", ap_characteristic(W[cell.w], x.p)).value("ap_w2", ap_characteristic(W[cell.w], x.q));
        add_quantiles(row, cell.s);
        row.value("stat", cell.s.max());
        rows.push_back(std::move(row));
    }
    for (const auto& cell : lin) {
        std::ostringstream pl;
        pl << cell.p;
        std::string id = "weighted:" + cell.family + ":" + pl.str() + ":" + c.weights[cell.w];
        auto row = make_row(id, c.seed, base + id);
        row.label("family", cell.family).label("exponents", pl.str()).label("weight", c.weights[cell.w]);
        row.label("seeds", seed_range(c)).label("golden_key", id);
        row.value("p", cell.p).value("ap_w1", ap_characteristic(W[cell.w], cell.p));
        if (cell.family == "lower-sf") row.value("ainfty", ainfty_characteristic(W[cell.w]));
        add_quantiles(row, cell.s);
        row.value("stat", cell.s.max());
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---- commutators ----

namespace {

// random complexities in [0, k] with at least one entry equal to k
std::array<int, 3> levels_with_max(std::mt19937_64& rng, int k) {
    auto a = random_levels(rng, k);
    a[uniform(rng, 0, 2)] = k;
    return a;
}

}  // namespace

std::vector<Row> commutator(const ExperimentConfig& c) {
    const int L = c.grid_level, N = 1 << L;
    std::vector<Row> rows;
    if (c.wants("growth")) {
        // samples[family][order][exponent][k]
        std::map<std::string, std::vector<std::vector<std::vector<Samples>>>> S;
        for (const auto& fam : c.families)
            S[fam] = std::vector<std::vector<std::vector<Samples>>>(
                2, std::vector<std::vector<Samples>>(c.exponents.size(), std::vector<Samples>(L)));
        for (int i = 0; i < c.samples; ++i) {
            const std::uint64_t s = c.seed + i;
            std::mt19937_64 rng(s);
            GridShift w = sample_shift(L, rng);
            auto f1 = DiscreteFunction::random_normal(L, rng), f2 = DiscreteFunction::random_normal(L, rng);
            auto b1 = normalized_symbol(L, rng), b2 = normalized_symbol(L, rng);
            const int slot = 1 + s % 2;
            const std::array<int, 2> slots{1 + int(s % 2), 1 + int((s / 2) % 2)};
            for (int k = 0; k < L; ++k)
                for (const auto& fam : c.families) {
                    HaarForm H;
                    if (fam == "shift") {
                        bool first = uniform(rng, 0, 1) == 0;
                        auto kk = first ? levels_with_max(rng, k) : random_levels(rng, k);
                        auto vv = first ? random_levels(rng, k) : levels_with_max(rng, k);
                        H = ShiftOperator::random(L, w, kk, vv, uniform(rng, 0, 2), uniform(rng, 0, 2), rng).lower();
                    } else if (fam == "partial") {
                        H = PartialParaproduct::random(L, w, uniform(rng, 0, 1), levels_with_max(rng, k),
                                                       uniform(rng, 0, 2), uniform(rng, 0, 2), rng)
                                .lower();
                    } else if (fam == "full") {
                        if (k > 0) continue;
                        auto F = FullParaproduct::from_symbol(DiscreteFunction::random_normal(L, rng), w,
                                                              uniform(rng, 0, 2), uniform(rng, 0, 2));
                        F.normalize();
                        H = F.lower();
                    } else {
                        throw ConfigError("unknown commutator family '" + fam + "'");
                    }
                    auto o1 = commutator_apply(b1, H, slot, f1, f2);
                    auto o2 = iterated_commutator_apply(b2, b1, H, slots, f1, f2);
                    for (std::size_t e = 0; e < c.exponents.size(); ++e) {
                        const auto& x = c.exponents[e];
                        double den = lp_norm(f1, x.p) * lp_norm(f2, x.q);
                        S[fam][0][e][k].v.push_back(ratio(lp_norm(o1, x.r), den));
                        S[fam][1][e][k].v.push_back(ratio(lp_norm(o2, x.r), den));
                    }
                }
        }
        for (const auto& fam : c.families)
            for (int order = 0; order < 2; ++order)
                for (std::size_t e = 0; e < c.exponents.size(); ++e)
                    for (int k = 0; k < L; ++k) {
                        const auto& smp = S[fam][order][e][k];
                        if (smp.v.empty()) continue;
                        std::string ord = order ? "iterated" : "first";
                        std::string key = "growth:" + fam + ":" + ord + ":" + c.exponents[e].label();
                        std::string id = key + ":k" + std::to_string(k);
                        auto row = make_row(id, c.seed,
                                            "commutator|L=" + std::to_string(L) + "|" + seed_range(c) + "|" + id);
                        row.label("family", fam).label("order", ord).label("exponents", c.exponents[e].label());
                        row.label("seeds", seed_range(c)).label("golden_key", key);
                        row.value("complexity", k);
                        add_quantiles(row, smp);
                        row.value("stat", smp.max() / std::pow(1.0 + k, order + 1));
                        rows.push_back(std::move(row));
                    }
    }

    if (c.wants("duality")) {
        AxisLattice l1(TorusGrid(L), AxisShift(L, 0), 0), l2(TorusGrid(L), AxisShift(L, 0), 1);
        auto inside = [&](const Mat& F, const DyadicCube& I, const DyadicCube& J) {
            double m = 0.0;
            for (int a = 0; a < I.len; ++a)
                for (int b = 0; b < J.len; ++b) m += F((I.start + a) % N, (J.start + b) % N);
            return m >= 0.99 * I.len * J.len;
        };
        std::vector<DyadicCube> cubes1, cubes2;
        for (int l = 0; l <= L; ++l) {
            for (const auto& I : l1.level_cubes(l)) cubes1.push_back(I);
            for (const auto& J : l2.level_cubes(l)) cubes2.push_back(J);
        }
        Samples bip, one;
        std::normal_distribution<double> nd;
        for (int i = 0; i < c.samples; ++i) {
            const std::uint64_t s = c.seed + i;
            std::mt19937_64 rng(s);
            Mat F = Mat::Ones(N, N);
            std::bernoulli_distribution hole(0.03);
            for (int a = 0; a < N; ++a)
                for (int b = 0; b < N; ++b)
                    if (hole(rng)) F(a, b) = 0.0;
            GridShift w = sample_shift(L, rng);
            std::vector<DyadicRectangle> adm;
            for (const auto& I : cubes1)
                for (const auto& J : cubes2)
                    if (inside(F, I, J)) adm.push_back({I, J});
            std::shuffle(adm.begin(), adm.end(), rng);
            adm.resize(std::min<std::size_t>(adm.size(), uniform(rng, 1, 8)));
            std::vector<double> a(adm.size()), b(adm.size());
            for (std::size_t j = 0; j < adm.size(); ++j) a[j] = nd(rng), b[j] = nd(rng);
            bip.v.push_back(adm.empty() ? 0.0 : duality_lemma_check(F, adm, a, b, w).ratio);

            const auto& K0 = cubes1[uniform(rng, 0, int(cubes1.size()) - 1)];
            std::vector<DyadicCube> C1;
            for (const auto& J : cubes2)
                if (inside(F, K0, J)) C1.push_back(J);
            std::shuffle(C1.begin(), C1.end(), rng);
            C1.resize(std::min<std::size_t>(C1.size(), uniform(rng, 1, 8)));
            std::vector<double> a1(C1.size()), b1(C1.size());
            for (std::size_t j = 0; j < C1.size(); ++j) a1[j] = nd(rng), b1[j] = nd(rng);
            one.v.push_back(C1.empty() ? 0.0 : duality_lemma_check_1par(F, K0, C1, a1, b1, w).ratio);
        }
        for (auto [id, smp] : {std::pair<std::string, const Samples*>{"duality:biparameter", &bip},
                               {"duality:one-parameter", &one}}) {
            auto row = make_row(id, c.seed, "duality|L=" + std::to_string(L) + "|" + seed_range(c) + "|" + id);
            row.label("seeds", seed_range(c)).label("golden_key", id);
            add_quantiles(row, *smp);
            row.value("stat", smp->max());
            rows.push_back(std::move(row));
        }
        // a rectangle with a hole must be refused
        Mat F = Mat::Ones(N, N);
        F(0, 0) = 0.0;
        bool refused = false;
        try {
            duality_lemma_check(F, {{l1.cube(0, 0), l2.cube(0, 0)}}, {1.0}, {1.0}, GridShift(L, 0, 0));
        } catch (const PreconditionError&) {
            refused = true;
        }
        auto row = make_row("duality:precondition", c.seed, "duality|precondition|L=" + std::to_string(L));
        row.value("refused", refused ? 1 : 0);
        row.pass = refused;
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---- lower bounds ----

std::vector<Row> lower_bound(const ExperimentConfig& c) {
    const double tol = c.tol("chain");
    std::vector<Row> rows;
    for (int L : c.levels)
        for (const auto& kname : c.kernels) {
            auto K = make_kernel(kname, L);
            for (const auto& sym : c.symbols) {
                auto b = bmo_test_symbol(sym, L);
                for (const auto& gm : c.gamma) {
                    GammaParams p;
                    p.k = gm[0];
                    p.gamma1 = gm[1];
                    p.gamma2 = gm[2];
                    GammaSearch srch;
                    srch.seed = c.seed;
                    auto rep = bmo_lower_bound(K, b, p, srch);
                    std::string g = "k" + std::to_string(p.k) + "g" + std::to_string(p.gamma1) + std::to_string(p.gamma2);
                    std::string key = kname + ":" + sym + ":" + g;
                    std::string id = "lower:" + key + ":L" + std::to_string(L);
                    auto row = make_row(id, c.seed, "lower|" + id + "|seed=" + std::to_string(c.seed));
                    row.label("kernel", kname).label("symbol", sym).label("params", g).label("golden_key", key);
                    row.value("level", L)
                        .value("gamma", rep.gamma.value)
                        .value("bmo", rep.bmo_all)
                        .value("ratio", rep.ratio)
                        .value("witnesses", rep.records.size())
                        .value("literal_worst", rep.literal_worst)
                        .value("corrected_worst", rep.corrected_worst)
                        .value("kernel_worst", rep.kernel_worst)
                        .value("weak_worst", rep.weak_worst)
                        .value("bound_worst", rep.bound_worst)
                        .value("medians_ok", rep.medians_ok ? 1 : 0)
                        .value("stat", rep.ratio);
                    bool literal = rep.literal_worst <= 1 + tol;
                    bool rest = rep.corrected_worst <= 1 + tol && rep.kernel_worst <= 1 + tol &&
                                rep.weak_worst <= 1 + tol && rep.bound_worst <= 1 + tol && rep.medians_ok;
                    row.label("literal_chain", literal ? "holds" : "fails");
                    row.label("corrected_chain", rest ? "holds" : "fails");
                    row.pass = literal && rest;
                    rows.push_back(std::move(row));
                }
            }
        }
    return rows;
}

// ---- mixed norms ----

std::vector<Row> mixed_norm(const ExperimentConfig& c) {
    const int L = c.grid_level;
    std::vector<Row> rows;
    if (c.wants("equal")) {
        const double tol = c.tol("mixed_equal");
        std::vector<MaxTracker> t(c.linear_exponents.size());
        for (int i = 0; i < c.samples; ++i) {
            const std::uint64_t s = c.seed + i;
            std::mt19937_64 rng(s);
            auto f = sample_input(L, rng, s % 3);
            for (std::size_t e = 0; e < c.linear_exponents.size(); ++e) {
                double p = c.linear_exponents[e];
                double a = mixed_norm(f, p, p), b = lp_norm(f, p);
                t[e].add(std::fabs(a - b) / b, s);
            }
        }
        for (std::size_t e = 0; e < t.size(); ++e) {
            std::ostringstream pl;
            pl << c.linear_exponents[e];
            std::string id = "mixed:equal:" + pl.str();
            auto row = make_row(id, c.seed, "mixed|equal|L=" + std::to_string(L) + "|" + seed_range(c) + "|" + pl.str());
            row.label("exponents", pl.str()).label("seeds", seed_range(c));
            row.value("p", c.linear_exponents[e]).value("n", t[e].n).value("max_error", t[e].max);
            row.value("worst_seed", t[e].seed).value("tol", tol);
            row.pass = t[e].max <= tol;
            rows.push_back(std::move(row));
        }
    }
    if (c.wants("sweep")) {
        std::vector<Samples> S(c.mixed.size());
        const int kmax = std::min(1, L - 1);
        for (int i = 0; i < c.samples; ++i) {
            const std::uint64_t s = c.seed + i;
            std::mt19937_64 rng(s);
            GridShift w = sample_shift(L, rng);
            HaarForm U(L, w);
            for (int j = 0; j < 3; ++j)
                U.append(ShiftOperator::random(L, w, random_levels(rng, kmax), random_levels(rng, kmax),
                                               uniform(rng, 0, 2), uniform(rng, 0, 2), rng)
                             .lower());
            auto f1 = sample_input(L, rng, s % 3), f2 = sample_input(L, rng, s % 3 + 1);
            auto o = U.apply(f1, f2);
            for (std::size_t m = 0; m < c.mixed.size(); ++m) {
                const auto& x = c.mixed[m];
                double den = mixed_norm(f1, x.outer.p, x.inner.p) * mixed_norm(f2, x.outer.q, x.inner.q);
                S[m].v.push_back(ratio(mixed_norm(o, x.outer.r, x.inner.r), den));
            }
        }
        for (std::size_t m = 0; m < c.mixed.size(); ++m) {
            std::string id = "mixed:" + c.mixed[m].label();
            auto row = make_row(id, c.seed, "mixed|sweep|L=" + std::to_string(L) + "|" + seed_range(c) + "|" + id);
            row.label("exponents", c.mixed[m].label()).label("seeds", seed_range(c)).label("golden_key", id);
            row.value("r_outer", c.mixed[m].outer.r).value("r_inner", c.mixed[m].inner.r);
            add_quantiles(row, S[m]);
            row.value("stat", S[m].max());
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace dyad::suites
