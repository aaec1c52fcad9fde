#include "dyad/lower_bounds.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>
#include <random>

#include "dyad/kernel.hpp"

namespace dyad {

namespace {

// periodic distance between cell centres in units of the side length
double cell_dist(int a, int b, int N) {
    int d = std::abs(a - b) % N;
    return double(std::min(d, N - d)) / N;
}

double ipow(double x, int e) {
    double r = 1.0;
    for (int i = 0; i < e; ++i) r *= x;
    return r;
}

std::map<std::string, KernelFactory>& registry() {
    static std::map<std::string, KernelFactory> m;
    return m;
}
std::mutex& registry_mutex() {
    static std::mutex m;
    return m;
}

std::vector<int> cells_of(const CellRect& R, int N) {
    std::vector<int> out;
    out.reserve(R.cells());
    for (int i = 0; i < R.a1.len; ++i)
        for (int j = 0; j < R.a2.len; ++j) out.push_back(((R.a1.start + i) % N) * N + (R.a2.start + j) % N);
    return out;
}

// every admissible partner rectangle of R: same side lengths, separated by C0 l per axis
std::vector<CellRect> partner_candidates(const CellRect& R, double C0, int N) {
    auto axis = [&](const Arc& a) {
        std::vector<Arc> v;
        for (int s = 0; s < N; ++s) {
            Arc b{s, a.len};
            if (arc_distance(a, b, N) >= C0 * a.len / N - 1e-12) v.push_back(b);
        }
        return v;
    };
    std::vector<CellRect> out;
    auto A1 = axis(R.a1), A2 = axis(R.a2);
    for (const auto& a : A1)
        for (const auto& b : A2) out.push_back({a, b});
    return out;
}

}  // namespace

BilinearBiparKernel riesz_kernel(int L, int i, int j) {
    if (i < 1 || i > 2 || j < 1 || j > 2) throw UnknownKernel("Riesz indices must lie in {1,2}");
    auto k1 = std::make_shared<AxisKernel>(riesz_axis_kernel(L, i - 1));
    auto k2 = std::make_shared<AxisKernel>(riesz_axis_kernel(L, j - 1));
    BilinearBiparKernel K;
    K.name = "riesz" + std::to_string(i) + std::to_string(j);
    K.L = L;
    K.K = [k1, k2](int x1, int x2, int y1, int y2, int z1, int z2) { return (*k1)(x1, y1, z1) * (*k2)(x2, y2, z2); };
    return K;
}

BilinearBiparKernel sign_kernel(int L) {
    const int N = 1 << L;
    BilinearBiparKernel K;
    K.name = "sign";
    K.L = L;
    K.K = [N](int x1, int x2, int y1, int y2, int z1, int z2) {
        double a = cell_dist(x1, y1, N) + cell_dist(x1, z1, N), b = cell_dist(x2, y2, N) + cell_dist(x2, z2, N);
        if (a == 0.0 || b == 0.0) return 0.0;
        return 1.0 / (a * a * b * b);
    };
    return K;
}

BilinearBiparKernel tensor_file_kernel(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UnknownKernel("cannot open kernel file " + path);
    auto T = std::make_shared<KernelTensor>(KernelTensor::read(in));
    const int L = T->L(), N = T->N();
    auto W = std::make_shared<Mat>(T->weights() / std::pow(double(N), -6.0));
    BilinearBiparKernel K;
    K.name = "file:" + path;
    K.L = L;
    K.alpha = T->alpha;
    K.K = [W, N](int x1, int x2, int y1, int y2, int z1, int z2) {
        return (*W)((x1 * N + y1) * N + z1, (x2 * N + y2) * N + z2);
    };
    return K;
}

void register_kernel(const std::string& name, KernelFactory f) {
    std::lock_guard<std::mutex> g(registry_mutex());
    registry()[name] = std::move(f);
}

BilinearBiparKernel make_kernel(const std::string& spec, int L) {
    if (spec.size() == 7 && spec.rfind("riesz", 0) == 0) return riesz_kernel(L, spec[5] - '0', spec[6] - '0');
    if (spec == "sign") return sign_kernel(L);
    if (spec.rfind("file:", 0) == 0) {
        auto K = tensor_file_kernel(spec.substr(5));
        if (K.L != L) throw UnknownKernel("kernel file level differs from the grid level");
        return K;
    }
    std::lock_guard<std::mutex> g(registry_mutex());
    auto it = registry().find(spec);
    if (it == registry().end()) throw UnknownKernel("unknown kernel '" + spec + "'");
    return it->second(L);
}

std::vector<std::string> kernel_names() {
    std::vector<std::string> v{"riesz11", "riesz12", "riesz21", "riesz22", "sign", "file:PATH"};
    std::lock_guard<std::mutex> g(registry_mutex());
    for (const auto& [k, f] : registry()) v.push_back(k);
    return v;
}

double size_bound_constant(const BilinearBiparKernel& K, int samples, std::uint64_t seed) {
    const int N = K.N();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> u(0, N - 1);
    double worst = 0.0;
    for (int s = 0; s < samples; ++s) {
        int x1 = u(rng), x2 = u(rng), y1 = u(rng), y2 = u(rng), z1 = u(rng), z2 = u(rng);
        double a = cell_dist(x1, y1, N) + cell_dist(x1, z1, N), b = cell_dist(x2, y2, N) + cell_dist(x2, z2, N);
        if (a == 0.0 || b == 0.0) continue;
        worst = std::max(worst, std::fabs(K.K(x1, x2, y1, y2, z1, z2)) * a * a * b * b);
    }
    return worst;
}

bool CellRect::contains(int x1, int x2, int N) const {
    return ((x1 - a1.start) % N + N) % N < a1.len && ((x2 - a2.start) % N + N) % N < a2.len;
}

double arc_distance(const Arc& a, const Arc& b, int N) {
    int fwd = ((b.start - a.start) % N + N) % N, bwd = ((a.start - b.start) % N + N) % N;
    if (fwd < a.len || bwd < b.len) return 0.0;  // overlap
    return double(std::min(fwd - a.len, bwd - b.len)) / N;
}

PartnerReport find_nondegenerate_partner(const BilinearBiparKernel& K, const CellRect& R, double C0) {
    const int N = K.N();
    auto cands = partner_candidates(R, C0, N);
    if (cands.empty()) throw ScaleError("no separated partner rectangle at this scale");
    auto rc = cells_of(R, N);
    const double m2 = R.measure(N) * R.measure(N);
    PartnerReport best;
    best.constant = -kInf;
    best.candidates = cands.size();
    for (const auto& Rt : cands) {
        double lo = kInf, hi = -kInf;
        for (int x : cells_of(Rt, N))
            for (int y : rc)
                for (int z : rc) {
                    double v = K.K(x / N, x % N, y / N, y % N, z / N, z % N);
                    lo = std::min(lo, v);
                    hi = std::max(hi, v);
                }
        int sigma = lo >= -hi ? 1 : -1;
        double c = (sigma == 1 ? lo : -hi) * m2;
        if (c > best.constant) {
            best.constant = c;
            best.sigma = sigma;
            best.Rt = Rt;
        }
    }
    // on the torus a sign change of the kernel across the antipode can leave no usable partner
    if (!(best.constant > 0.0)) throw ScaleError("no separated partner with a positive kernel bound at this scale");
    return best;
}

std::vector<double> nondegeneracy_profile(const BilinearBiparKernel& K, double C0) {
    const int N = K.N();
    std::vector<double> out;
    for (int l = 1; l < K.L; ++l) {
        int len = N >> l;
        try {
            out.push_back(find_nondegenerate_partner(K, {{0, len}, {0, len}}, C0).constant);
        } catch (const ScaleError&) {
            out.push_back(std::nan(""));
        }
    }
    return out;
}

double weak_lr_norm(std::vector<double> values, double vol, double r) {
    for (auto& v : values) v = std::fabs(v);
    std::sort(values.begin(), values.end(), std::greater<>());
    double best = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i)
        best = std::max(best, values[i] * std::pow((i + 1) * vol, 1.0 / r));
    return best;
}

double median(const DiscreteFunction& b, const CellRect& R) {
    const int N = b.N();
    std::vector<double> v;
    for (int c : cells_of(R, N)) v.push_back(b(c / N, c % N));
    std::sort(v.begin(), v.end());
    return v[(v.size() - 1) / 2];
}

namespace {

double integrand_at(const BilinearBiparKernel& K, const DiscreteFunction& b, int x, const std::vector<int>& A, int g1,
                    int g2) {
    const int N = K.N();
    const int x1 = x / N, x2 = x % N;
    const double bx = b(x1, x2);
    double s = 0.0;
    for (int y : A) {
        double py = ipow(bx - b(y / N, y % N), g1);
        if (py == 0.0 && g1 > 0) continue;
        for (int z : A) s += py * ipow(bx - b(z / N, z % N), g2) * K.K(x1, x2, y / N, y % N, z / N, z % N);
    }
    const double vol = 1.0 / (double(N) * N);
    return s * vol * vol;
}

}  // namespace

Mat gamma_integrand(const BilinearBiparKernel& K, const DiscreteFunction& b, const std::vector<int>& A, int g1,
                    int g2) {
    const int N = K.N();
    Mat G(N, N);
    for (int x = 0; x < N * N; ++x) G(x / N, x % N) = integrand_at(K, b, x, A, g1, g2);
    return G;
}

std::vector<CellRect> search_rectangles(int L, int max_len) {
    const int N = 1 << L;
    if (max_len <= 0) max_len = std::max(1, N / 4);
    std::vector<CellRect> out;
    for (int l1 = 0; l1 <= L; ++l1)
        for (int l2 = 0; l2 <= L; ++l2) {
            int n1 = N >> l1, n2 = N >> l2;
            if (n1 > max_len || n2 > max_len) continue;
            for (int p1 = 0; p1 < (1 << l1); ++p1)
                for (int p2 = 0; p2 < (1 << l2); ++p2) out.push_back({{p1 * n1, n1}, {p2 * n2, n2}});
        }
    return out;
}

namespace {

void check_params(const GammaParams& p) {
    if (p.k < 1 || p.gamma1 < 0 || p.gamma2 < 0 || p.gamma1 + p.gamma2 != p.k)
        throw std::invalid_argument("need gamma1 + gamma2 = k >= 1");
    if (!(p.r > 0.0)) throw std::invalid_argument("r must be positive");
}

// sublevel and superlevel sets of b on R, deduplicated, in a deterministic order
std::vector<std::vector<int>> level_sets(const DiscreteFunction& b, const std::vector<int>& rc, int N) {
    std::vector<double> vals;
    for (int c : rc) vals.push_back(b(c / N, c % N));
    std::vector<double> u = vals;
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    std::vector<std::vector<int>> out;
    for (double a : u)
        for (int dir = 0; dir < 2; ++dir) {
            std::vector<int> A;
            for (std::size_t i = 0; i < rc.size(); ++i)
                if (dir == 0 ? vals[i] <= a : vals[i] >= a) A.push_back(rc[i]);
            if (std::find(out.begin(), out.end(), A) == out.end()) out.push_back(std::move(A));
        }
    return out;
}

}  // namespace

GammaReport gamma_constant(const BilinearBiparKernel& K, const DiscreteFunction& b, const GammaParams& p,
                           const GammaSearch& s) {
    check_params(p);
    const int N = K.N();
    const double vol = 1.0 / (double(N) * N);
    GammaReport rep;
    rep.params = p;
    auto rects = search_rectangles(K.L, s.max_len);
    for (std::size_t ri = 0; ri < rects.size(); ++ri) {
        const auto& R = rects[ri];
        auto cands = partner_candidates(R, p.C0, N);
        if (cands.empty()) continue;
        auto rc = cells_of(R, N);
        // cells covered by some partner
        std::vector<int> cover;
        {
            std::vector<char> in(N * N, 0);
            for (const auto& Rt : cands)
                for (int c : cells_of(Rt, N)) in[c] = 1;
            for (int c = 0; c < N * N; ++c)
                if (in[c]) cover.push_back(c);
        }
        auto sets = level_sets(b, rc, N);
        std::mt19937_64 rng(s.seed * 0x9E3779B97F4A7C15ull + ri);
        std::bernoulli_distribution coin(0.5);
        for (int t = 0; t < s.random_subsets; ++t) {
            std::vector<int> A;
            for (int c : rc)
                if (coin(rng)) A.push_back(c);
            if (!A.empty()) sets.push_back(std::move(A));
        }
        const double scale = std::pow(R.measure(N), -1.0 / p.r);
        for (const auto& A : sets) {
            Mat G = Mat::Zero(N, N);
            for (int c : cover) G(c / N, c % N) = integrand_at(K, b, c, A, p.gamma1, p.gamma2);
            for (const auto& Rt : cands) {
                std::vector<double> v;
                for (int c : cells_of(Rt, N)) v.push_back(G(c / N, c % N));
                double val = scale * weak_lr_norm(std::move(v), vol, p.r);
                ++rep.evaluated;
                if (val > rep.value) {
                    rep.value = val;
                    rep.R = R;
                    rep.Rt = Rt;
                    rep.A = A;
                }
            }
        }
    }
    return rep;
}

LowerBoundReport bmo_lower_bound(const BilinearBiparKernel& K, const DiscreteFunction& b, const GammaParams& p,
                                 const GammaSearch& s) {
    check_params(p);
    const int N = K.N();
    LowerBoundReport rep;
    rep.gamma = gamma_constant(K, b, p, s);
    const double Gm = rep.gamma.value;
    const double two_r = std::pow(2.0, 1.0 / p.r);
    const int k = p.k, g1 = p.gamma1, g2 = p.gamma2;
    for (const auto& R : search_rectangles(K.L, s.max_len)) {
        PartnerReport pr;
        try {
            pr = find_nondegenerate_partner(K, R, p.C0);
        } catch (const ScaleError&) {
            continue;
        }
        ChainRecord rec;
        rec.R = R;
        rec.Rt = pr.Rt;
        rec.c_nd = pr.constant;
        const double a = median(b, pr.Rt);
        rec.alpha = a;
        auto rc = cells_of(R, N), tc = cells_of(pr.Rt, N);
        const double n = double(rc.size());
        std::vector<int> S, T;
        double Im = 0.0, Ip = 0.0, mean = 0.0;
        for (int c : rc) {
            double v = b(c / N, c % N);
            if (v <= a) S.push_back(c);
            if (v >= a) T.push_back(c);
            Im += std::max(a - v, 0.0);
            Ip += std::max(v - a, 0.0);
            mean += v;
        }
        Im /= n;
        Ip /= n;
        mean /= n;
        for (int c : rc) rec.osc += std::fabs(b(c / N, c % N) - mean);
        rec.osc /= n;
        int ge = 0, le = 0;
        for (int c : tc) {
            double v = b(c / N, c % N);
            ge += v >= a;
            le += v <= a;
        }
        rec.median_ok = 2 * ge >= int(tc.size()) && 2 * le >= int(tc.size());
        const int ex = std::max(2 - k, 0);
        // half = 0: x in Rt n {b >= a}, A = S; half = 1: x in Rt n {b <= a}, A = T
        double bound = 0.0;
        for (int half = 0; half < 2; ++half) {
            const auto& A = half == 0 ? S : T;
            const double I = half == 0 ? Im : Ip;
            const double lhs = ipow(I, k);
            const double f = std::pow(double(A.size()) / n, ex);
            const double flip = half == 0 ? 1.0 : -1.0;  // per-factor sign
            const double sgn = ipow(flip, k);
            std::vector<double> G;
            for (int x : tc) {
                double g = integrand_at(K, b, x, A, g1, g2);
                G.push_back(g);
                double bx = b(x / N, x % N);
                if (half == 0 ? bx < a : bx > a) continue;
                double mid = 0.0;
                for (int y : A)
                    for (int z : A)
                        mid += ipow(flip * (bx - b(y / N, y % N)), g1) * ipow(flip * (bx - b(z / N, z % N)), g2);
                mid /= n * n;
                if (lhs > 0.0) {
                    rec.literal = std::max(rec.literal, mid > 0 ? lhs / mid : kInf);
                    rec.corrected = std::max(rec.corrected, mid > 0 ? lhs * f / mid : kInf);
                }
                double kint = pr.sigma * sgn * g;
                if (mid > 0.0) rec.kernel_step = std::max(rec.kernel_step, kint > 0 ? mid * pr.constant / kint : kInf);
            }
            if (I > 0.0) {
                double cap = two_r * Gm / (pr.constant * f);
                rec.weak_step = std::max(rec.weak_step, cap > 0 ? lhs / cap : kInf);
                bound += std::pow(cap, 1.0 / k);
            }
        }
        rec.bound = 2.0 * bound;
        rep.bmo = std::max(rep.bmo, rec.osc);
        rep.literal_worst = std::max(rep.literal_worst, rec.literal);
        rep.corrected_worst = std::max(rep.corrected_worst, rec.corrected);
        rep.kernel_worst = std::max(rep.kernel_worst, rec.kernel_step);
        rep.weak_worst = std::max(rep.weak_worst, rec.weak_step);
        if (rec.osc > 0.0) rep.bound_worst = std::max(rep.bound_worst, rec.bound > 0 ? rec.osc / rec.bound : kInf);
        rep.medians_ok = rep.medians_ok && rec.median_ok;
        rep.records.push_back(rec);
    }
    rep.bmo_all = mean_oscillation_all_rectangles(b);
    if (rep.bmo_all > 0.0) rep.ratio = Gm > 0 ? rep.bmo_all / std::pow(Gm, 1.0 / k) : kInf;
    return rep;
}

DiscreteFunction bmo_test_symbol(const std::string& name, int L) {
    const double pi = std::numbers::pi;
    auto sgn = [](double t) { return t < 0.5 ? 1.0 : -1.0; };
    std::function<double(double, double)> f;
    if (name == "step")
        f = [&](double x, double) { return sgn(x); };
    else if (name == "log")
        f = [&](double x, double) { return std::log(std::fabs(std::sin(pi * (x - 0.5)))); };
    else if (name == "tensor-step")
        f = [&](double x, double y) { return sgn(x) * sgn(y); };
    else if (name == "smooth")
        f = [&](double x, double y) { return std::cos(2 * pi * x) + std::sin(2 * pi * y); };
    else if (name == "log-point")
        f = [&](double x, double y) {
            double s = std::sin(pi * (x - 0.5)), t = std::sin(pi * (y - 0.5));
            return 0.5 * std::log(s * s + t * t);
        };
    else
        throw std::invalid_argument("unknown test symbol '" + name + "'");
    const int N = 1 << L;
    Mat v(N, N);
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) v(i, j) = f((i + 0.5) / N, (j + 0.5) / N);
    return DiscreteFunction(L, v);
}

std::vector<std::string> bmo_test_symbol_names() { return {"step", "log", "tensor-step", "smooth", "log-point"}; }

}  // namespace dyad
