#include "dyad/measures.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

namespace dyad {

namespace {
int wrap(int a, int n) { return ((a % n) + n) % n; }

double circ_dist(double x, double c) {
    double d = std::fabs(x - c);
    return std::min(d, 1.0 - d);
}
}  // namespace

Weight::Weight(DiscreteFunction w, std::string id) : w_(std::move(w)), id_(std::move(id)) {
    if (w_.values().size() == 0 || w_.values().minCoeff() <= 0.0) throw DomainError("weight must be strictly positive");
}

Weight Weight::power(int L, double a1, double a2, double c) {
    auto f = DiscreteFunction::from_function(
        L, [&](double x, double y) { return std::pow(circ_dist(x, c), a1) * std::pow(circ_dist(y, c), a2); });
    std::ostringstream id;
    id << "pow(" << a1 << "," << a2 << ")";
    return Weight(f, id.str());
}

Weight Weight::lacunary(int L, double t1, double t2) {
    auto f = DiscreteFunction::from_function(L, [&](double x, double y) {
        return (x < 0.5 ? t1 : 1.0) * (y < 0.5 ? t2 : 1.0);
    });
    std::ostringstream id;
    id << "lac(" << t1 << "," << t2 << ")";
    return Weight(f, id.str());
}

Weight Weight::dual(double p) const { return pow(1.0 - p / (p - 1.0)); }

Weight Weight::pow(double e) const {
    return Weight(DiscreteFunction(L(), w_.values().array().pow(e).matrix()), id_ + "^" + std::to_string(e));
}

Weight Weight::operator*(const Weight& o) const { return Weight(w_ * o.w_, id_ + "*" + o.id_); }

std::vector<Arc> arc_family(int L, const std::optional<AxisShift>& shift) {
    int N = 1 << L;
    std::vector<Arc> out;
    if (shift) {
        for (int l = 0; l <= L; ++l) {
            int len = N >> l;
            for (int p = 0; p < (1 << l); ++p) out.push_back({wrap(p * len + shift->offset(l), N), len});
        }
        return out;
    }
    out.push_back({0, N});
    for (int l = 1; l <= L; ++l)
        for (int s = 0; s < N; ++s) out.push_back({s, N >> l});
    return out;
}

RectangleSums::RectangleSums(const Mat& v) : N_(static_cast<int>(v.rows())), P_(Mat::Zero(2 * v.rows() + 1, 2 * v.cols() + 1)) {
    for (int i = 0; i < 2 * N_; ++i)
        for (int j = 0; j < 2 * N_; ++j)
            P_(i + 1, j + 1) = v(i % N_, j % N_) + P_(i, j + 1) + P_(i + 1, j) - P_(i, j);
}

double RectangleSums::sum(const Arc& a, const Arc& b) const {
    int i0 = a.start, i1 = a.start + a.len, j0 = b.start, j1 = b.start + b.len;
    return P_(i1, j1) - P_(i0, j1) - P_(i1, j0) + P_(i0, j0);
}

namespace {

std::vector<Arc> singles(int N) {
    std::vector<Arc> v;
    for (int i = 0; i < N; ++i) v.push_back({i, 1});
    return v;
}

template <class F>
double sup_over(const std::vector<Arc>& A, const std::vector<Arc>& B, F f) {
    double best = -kInf;
    for (const auto& a : A)
        for (const auto& b : B) best = std::max(best, f(a, b));
    return best;
}

std::optional<AxisShift> axis_of(const std::optional<GridShift>& s, int axis) {
    if (!s) return std::nullopt;
    return s->axis[axis];
}

}  // namespace

double ap_characteristic(const Weight& w, double p, const std::optional<GridShift>& shift) {
    if (p <= 1.0) throw DomainError("A_p needs p > 1");
    RectangleSums W(w.f().values()), S(w.dual(p).f().values());
    auto A = arc_family(w.L(), axis_of(shift, 0)), B = arc_family(w.L(), axis_of(shift, 1));
    return sup_over(A, B, [&](const Arc& a, const Arc& b) { return W.average(a, b) * std::pow(S.average(a, b), p - 1.0); });
}

double ap_characteristic_slices(const Weight& w, double p, int axis, const std::optional<GridShift>& shift) {
    if (p <= 1.0) throw DomainError("A_p needs p > 1");
    RectangleSums W(w.f().values()), S(w.dual(p).f().values());
    auto A = arc_family(w.L(), axis_of(shift, axis));
    auto B = singles(1 << w.L());
    auto f = [&](const Arc& a, const Arc& b) { return W.average(a, b) * std::pow(S.average(a, b), p - 1.0); };
    return axis == 0 ? sup_over(A, B, f) : sup_over(B, A, f);
}

double ainfty_characteristic(const Weight& w, const std::optional<GridShift>& shift) {
    RectangleSums W(w.f().values()), G(w.f().values().array().log().matrix());
    auto A = arc_family(w.L(), axis_of(shift, 0)), B = arc_family(w.L(), axis_of(shift, 1));
    return sup_over(A, B, [&](const Arc& a, const Arc& b) { return W.average(a, b) * std::exp(-G.average(a, b)); });
}

double ainfty_characteristic_slices(const Weight& w, int axis, const std::optional<GridShift>& shift) {
    RectangleSums W(w.f().values()), G(w.f().values().array().log().matrix());
    auto A = arc_family(w.L(), axis_of(shift, axis));
    auto B = singles(1 << w.L());
    auto f = [&](const Arc& a, const Arc& b) { return W.average(a, b) * std::exp(-G.average(a, b)); };
    return axis == 0 ? sup_over(A, B, f) : sup_over(B, A, f);
}

std::string NormReport::csv_row() const {
    std::ostringstream os;
    os.precision(17);
    os << kind << "," << exponents << "," << value << "," << grid_id << "," << weight_id << "," << seed;
    return os.str();
}

double lp_norm(const DiscreteFunction& f, double p, const Weight* w) {
    if (!(p > 0.0)) throw DomainError("exponent must be positive");
    const Mat& v = f.values();
    if (std::isinf(p)) {
        double m = 0.0;
        for (int i = 0; i < f.N(); ++i)
            for (int j = 0; j < f.N(); ++j)
                if (!w || w->f()(i, j) > 0) m = std::max(m, std::fabs(v(i, j)));
        return m;
    }
    double s = 0.0;
    for (int i = 0; i < f.N(); ++i)
        for (int j = 0; j < f.N(); ++j) s += std::pow(std::fabs(v(i, j)), p) * (w ? w->f()(i, j) : 1.0);
    return std::pow(s * f.cell_volume(), 1.0 / p);
}

NormReport lp_norm_report(const DiscreteFunction& f, double p, const Weight* w, std::uint64_t seed) {
    NormReport r;
    r.kind = w ? "Lp-weighted" : "Lp";
    std::ostringstream e;
    e << p;
    r.exponents = e.str();
    r.value = lp_norm(f, p, w);
    r.quasi = p < 1.0;
    r.grid_id = "L" + std::to_string(f.L());
    r.weight_id = w ? w->id() : "one";
    r.seed = seed;
    return r;
}

double mixed_norm(const DiscreteFunction& f, double p1, double p2, const Vec* w1, const Vec* w2) {
    if (!(p1 > 0.0) || !(p2 > 0.0)) throw DomainError("exponents must be positive");
    int N = f.N();
    const Mat& v = f.values();
    // inner quantity kept as the p2-th power sum so that p1 == p2 avoids a root/power round trip
    Vec inner(N);
    for (int i = 0; i < N; ++i) {
        if (std::isinf(p2)) {
            double m = 0.0;
            for (int j = 0; j < N; ++j) m = std::max(m, std::fabs(v(i, j)));
            inner[i] = m;
        } else {
            double s = 0.0;
            for (int j = 0; j < N; ++j) s += std::pow(std::fabs(v(i, j)), p2) * (w2 ? (*w2)[j] : 1.0);
            inner[i] = s / N;
        }
    }
    if (std::isinf(p1)) {
        double m = 0.0;
        for (int i = 0; i < N; ++i) m = std::max(m, std::isinf(p2) ? inner[i] : std::pow(inner[i], 1.0 / p2));
        return m;
    }
    double s = 0.0;
    for (int i = 0; i < N; ++i) {
        double t = std::isinf(p2) ? std::pow(inner[i], p1) : (p1 == p2 ? inner[i] : std::pow(inner[i], p1 / p2));
        s += t * (w1 ? (*w1)[i] : 1.0);
    }
    return std::pow(s / N, 1.0 / p1);
}

// ---------------- BMO ----------------

namespace {
double arc_osc(const Vec& b, const Arc& a) {
    int N = static_cast<int>(b.size());
    double m = 0.0;
    for (int k = 0; k < a.len; ++k) m += b[(a.start + k) % N];
    m /= a.len;
    double o = 0.0;
    for (int k = 0; k < a.len; ++k) o += std::fabs(b[(a.start + k) % N] - m);
    return o / a.len;
}

double rect_osc(const Mat& v, const Arc& a, const Arc& b) {
    int N = static_cast<int>(v.rows());
    double m = 0.0;
    for (int x = 0; x < a.len; ++x)
        for (int y = 0; y < b.len; ++y) m += v((a.start + x) % N, (b.start + y) % N);
    m /= double(a.len) * b.len;
    double o = 0.0;
    for (int x = 0; x < a.len; ++x)
        for (int y = 0; y < b.len; ++y) o += std::fabs(v((a.start + x) % N, (b.start + y) % N) - m);
    return o / (double(a.len) * b.len);
}
}  // namespace

double bmo_dyadic_axis(const Vec& b, const std::optional<AxisShift>& shift) {
    int L = 0;
    while ((1 << L) < b.size()) ++L;
    double best = 0.0;
    for (const auto& a : arc_family(L, shift)) best = std::max(best, arc_osc(b, a));
    return best;
}

double bmo_dyadic_slices(const DiscreteFunction& b, int axis, const std::optional<AxisShift>& shift) {
    double best = 0.0;
    for (int k = 0; k < b.N(); ++k) {
        Vec s = axis == 0 ? Vec(b.values().col(k)) : Vec(b.values().row(k).transpose());
        best = std::max(best, bmo_dyadic_axis(s, shift));
    }
    return best;
}

double bmo_little(const DiscreteFunction& b, const std::optional<GridShift>& shift) {
    auto A = arc_family(b.L(), axis_of(shift, 0)), B = arc_family(b.L(), axis_of(shift, 1));
    return std::max(0.0, sup_over(A, B, [&](const Arc& a, const Arc& c) { return rect_osc(b.values(), a, c); }));
}

double mean_oscillation_all_rectangles(const DiscreteFunction& b) {
    int N = b.N();
    std::vector<Arc> arcs{{0, N}};
    for (int len = 1; len < N; ++len)
        for (int s = 0; s < N; ++s) arcs.push_back({s, len});
    return std::max(0.0, sup_over(arcs, arcs, [&](const Arc& a, const Arc& c) { return rect_osc(b.values(), a, c); }));
}

double bmo_carleson_axis(const Vec& b, const AxisLattice& lat) {
    AxisDictionary d(lat);
    Vec c = d.analysis() * b;
    double best = 0.0;
    for (int l0 = 0; l0 < lat.L(); ++l0)
        for (const auto& V0 : lat.level_cubes(l0)) {
            double s = 0.0;
            for (int l = l0; l < lat.L(); ++l)
                for (const auto& V : lat.level_cubes(l))
                    if (lat.is_ancestor_or_self(V0, V)) s += c[d.h1(V.level, V.pos)] * c[d.h1(V.level, V.pos)];
            best = std::max(best, std::sqrt(s / V0.side()));
        }
    return best;
}

namespace {

using Mask = std::vector<std::uint64_t>;

Mask rect_mask(const DyadicRectangle& R, int N) {
    Mask m((N * N + 63) / 64, 0);
    for (int a = 0; a < R.I.len; ++a)
        for (int b = 0; b < R.J.len; ++b) {
            int bit = ((R.I.start + a) % N) * N + (R.J.start + b) % N;
            m[bit / 64] |= std::uint64_t(1) << (bit % 64);
        }
    return m;
}

bool subset(const Mask& a, const Mask& b) {
    for (std::size_t k = 0; k < a.size(); ++k)
        if (a[k] & ~b[k]) return false;
    return true;
}

int popcount(const Mask& m) {
    int c = 0;
    for (auto w : m) c += __builtin_popcountll(w);
    return c;
}

}  // namespace

ProductBmoReport product_bmo_lower_bound(const std::vector<RectCoefficient>& coeffs, const ShiftedGrid& g,
                                         const ProductBmoOptions& opt) {
    int N = g.N(), L = g.L();
    std::vector<Mask> cm;
    std::vector<double> a2;
    for (const auto& rc : coeffs) {
        if (rc.a == 0.0) continue;
        cm.push_back(rect_mask(rc.R, N));
        a2.push_back(rc.a * rc.a);
    }
    auto eval = [&](const Mask& om) {
        int cnt = popcount(om);
        if (cnt == 0) return 0.0;
        double s = 0.0;
        for (std::size_t k = 0; k < cm.size(); ++k)
            if (subset(cm[k], om)) s += a2[k];
        return std::sqrt(s / (double(cnt) / (N * N)));
    };
    ProductBmoReport rep;
    std::vector<Mask> pool;
    int pl = opt.pool_level < 0 ? L - 1 : opt.pool_level;
    for (int l1 = 0; l1 <= L; ++l1)
        for (const auto& I : g.lattice(0).level_cubes(l1))
            for (int l2 = 0; l2 <= L; ++l2)
                for (const auto& J : g.lattice(1).level_cubes(l2)) {
                    Mask m = rect_mask({I, J}, N);
                    rep.single_rectangle = std::max(rep.single_rectangle, eval(m));
                    if (l1 <= pl && l2 <= pl) pool.push_back(m);
                }
    std::function<void(std::size_t, int, Mask&)> rec = [&](std::size_t from, int depth, Mask& cur) {
        if (depth >= 2) rep.unions = std::max(rep.unions, eval(cur));
        if (depth == opt.omega_max) return;
        for (std::size_t k = from; k < pool.size(); ++k) {
            Mask nxt = cur;
            for (std::size_t w = 0; w < nxt.size(); ++w) nxt[w] |= pool[k][w];
            rec(k + 1, depth + 1, nxt);
        }
    };
    Mask empty((N * N + 63) / 64, 0);
    rec(0, 0, empty);
    // upper level sets of sum |a_R|^2 1_R / |R|
    Mat S = Mat::Zero(N, N);
    for (const auto& rc : coeffs) {
        double w = rc.a * rc.a / rc.R.measure();
        for (int a = 0; a < rc.R.I.len; ++a)
            for (int b = 0; b < rc.R.J.len; ++b) S((rc.R.I.start + a) % N, (rc.R.J.start + b) % N) += w;
    }
    std::set<double> levels;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            if (S(i, j) > 0) levels.insert(S(i, j));
    for (double t : levels) {
        Mask m((N * N + 63) / 64, 0);
        for (int i = 0; i < N; ++i)
            for (int j = 0; j < N; ++j)
                if (S(i, j) >= t) m[(i * N + j) / 64] |= std::uint64_t(1) << ((i * N + j) % 64);
        rep.level_sets = std::max(rep.level_sets, eval(m));
    }
    rep.value = std::max({rep.single_rectangle, rep.unions, rep.level_sets});
    rep.family = "rectangles+unions(<=" + std::to_string(opt.omega_max) + ",pool level<=" + std::to_string(pl) +
                 ")+level-sets";
    return rep;
}

std::vector<RectCoefficient> haar_rect_coefficients(const DiscreteFunction& b, const ShiftedGrid& g) {
    Mat C = g.coefficients(b);
    std::vector<RectCoefficient> out;
    const auto &d1 = g.dict(0), &d2 = g.dict(1);
    for (int l1 = 0; l1 < g.L(); ++l1)
        for (const auto& I : g.lattice(0).level_cubes(l1))
            for (int l2 = 0; l2 < g.L(); ++l2)
                for (const auto& J : g.lattice(1).level_cubes(l2))
                    out.push_back({{I, J}, C(d1.h1(I.level, I.pos), d2.h1(J.level, J.pos))});
    return out;
}

ProductBmoReport bmo_product(const DiscreteFunction& b, const ShiftedGrid& g, const ProductBmoOptions& opt) {
    return product_bmo_lower_bound(haar_rect_coefficients(b, g), g, opt);
}

// ---------------- maximal functions ----------------

DiscreteFunction maximal_function(const DiscreteFunction& f, MaximalKind kind, const std::optional<GridShift>& shift) {
    int N = f.N(), L = f.L();
    std::vector<Arc> A, B;
    switch (kind) {
        case MaximalKind::Dyadic:
            if (!shift) throw std::invalid_argument("dyadic maximal function needs a shift");
            A = arc_family(L, shift->axis[0]);
            B = arc_family(L, shift->axis[1]);
            break;
        case MaximalKind::Strong:
            A = arc_family(L, std::nullopt);
            B = A;
            break;
        case MaximalKind::Axis1:
            A = arc_family(L, axis_of(shift, 0));
            B = singles(N);
            break;
        case MaximalKind::Axis2:
            A = singles(N);
            B = arc_family(L, axis_of(shift, 1));
            break;
    }
    Mat absf = f.values().cwiseAbs();
    RectangleSums S(absf);
    Mat M = Mat::Zero(N, N);
    for (const auto& a : A)
        for (const auto& b : B) {
            double avg = S.average(a, b);
            for (int x = 0; x < a.len; ++x)
                for (int y = 0; y < b.len; ++y) {
                    double& m = M((a.start + x) % N, (b.start + y) % N);
                    m = std::max(m, avg);
                }
        }
    return DiscreteFunction(L, M);
}

DiscreteFunction maximal_function_s(const DiscreteFunction& f, double s, MaximalKind kind,
                                    const std::optional<GridShift>& shift) {
    if (s < 1.0) throw DomainError("M_s needs s >= 1");
    DiscreteFunction fs(f.L(), f.values().cwiseAbs().array().pow(s).matrix());
    auto M = maximal_function(fs, kind, shift);
    return DiscreteFunction(f.L(), M.values().array().pow(1.0 / s).matrix());
}

Vec maximal_1d(const Vec& g) {
    int N = static_cast<int>(g.size()), L = 0;
    while ((1 << L) < N) ++L;
    Vec out = Vec::Zero(N);
    for (const auto& a : arc_family(L, std::nullopt)) {
        double s = 0.0;
        for (int k = 0; k < a.len; ++k) s += std::fabs(g[(a.start + k) % N]);
        s /= a.len;
        for (int k = 0; k < a.len; ++k) out[(a.start + k) % N] = std::max(out[(a.start + k) % N], s);
    }
    return out;
}

double fefferman_stein_ratio(const std::vector<DiscreteFunction>& fs, double p, double s, const Weight* w) {
    if (fs.empty()) return 0.0;
    int L = fs[0].L();
    Mat num = Mat::Zero(fs[0].N(), fs[0].N()), den = num;
    for (const auto& f : fs) {
        num += maximal_function(f, MaximalKind::Strong).values().array().pow(s).matrix();
        den += f.values().cwiseAbs().array().pow(s).matrix();
    }
    DiscreteFunction a(L, num.array().pow(1.0 / s).matrix()), b(L, den.array().pow(1.0 / s).matrix());
    return lp_norm(a, p, w) / lp_norm(b, p, w);
}

// ---------------- square functions ----------------

namespace {
Mat restricted(const AxisDictionary& d, const DyadicCube& K, int level) {
    return cube_indicator(K, d.N()).asDiagonal() * d.difference(level);
}
}  // namespace

DiscreteFunction square_function(const DiscreteFunction& f, const ShiftedGrid& g, SquareKind kind) {
    int L = g.L(), N = g.N();
    Mat acc = Mat::Zero(N, N);
    const Mat& F = f.values();
    switch (kind) {
        case SquareKind::Biparameter:
            for (int l1 = 0; l1 < L; ++l1)
                for (int l2 = 0; l2 < L; ++l2) {
                    Mat B = g.dict(0).difference_le(l1) * F * g.dict(1).difference_le(l2).transpose();
                    acc += B.cwiseAbs2();
                }
            break;
        case SquareKind::Axis1:
            for (int l = 0; l < L; ++l) acc += (g.dict(0).difference_le(l) * F).cwiseAbs2();
            break;
        case SquareKind::Axis2:
            for (int l = 0; l < L; ++l) acc += (F * g.dict(1).difference_le(l).transpose()).cwiseAbs2();
            break;
        case SquareKind::Phi1:
        case SquareKind::Phi2: {
            int ax = kind == SquareKind::Phi1 ? 0 : 1;
            const auto& d = g.dict(ax);
            std::vector<int> idx{d.h0(0, 0)};
            for (int l = 0; l < L; ++l)
                for (int p = 0; p < (1 << l); ++p) idx.push_back(d.h1(l, p));
            for (int k : idx) {
                Vec c = ax == 0 ? Vec((d.analysis().row(k) * F).transpose()) : Vec(F * d.analysis().row(k).transpose());
                Vec Mc = maximal_1d(c);
                Vec h2 = d.function(k).cwiseAbs2();
                Mat t = ax == 0 ? Mat(h2 * Mc.cwiseAbs2().transpose()) : Mat(Mc.cwiseAbs2() * h2.transpose());
                acc += t;
            }
            break;
        }
    }
    return DiscreteFunction(L, acc.cwiseSqrt());
}

DiscreteFunction square_function_ij(const DiscreteFunction& f, const ShiftedGrid& g, int i, int j) {
    int L = g.L(), N = g.N();
    if (i < 0 || j < 0 || i > L - 1 || j > L - 1) throw ResolutionError("square function offsets exceed resolution");
    Mat acc = Mat::Zero(N, N);
    for (int l1 = 0; l1 + i <= L - 1; ++l1)
        for (const auto& K : g.lattice(0).level_cubes(l1)) {
            Mat P1 = restricted(g.dict(0), K, l1 + i);
            for (int l2 = 0; l2 + j <= L - 1; ++l2)
                for (const auto& V : g.lattice(1).level_cubes(l2)) {
                    DiscreteFunction B(L, P1 * f.values() * restricted(g.dict(1), V, l2 + j).transpose());
                    acc += maximal_function(B, MaximalKind::Strong).values().cwiseAbs2();
                }
        }
    return DiscreteFunction(L, acc.cwiseSqrt());
}

DiscreteFunction square_function_axis_i(const DiscreteFunction& f, const ShiftedGrid& g, int axis, int i) {
    int L = g.L(), N = g.N();
    if (i < 0 || i > L - 1) throw ResolutionError("square function offset exceeds resolution");
    Mat acc = Mat::Zero(N, N);
    for (int l = 0; l + i <= L - 1; ++l)
        for (const auto& K : g.lattice(axis).level_cubes(l)) {
            Mat P = restricted(g.dict(axis), K, l + i);
            DiscreteFunction B = g.apply_axis(axis, P, f);
            acc += maximal_function(B, MaximalKind::Strong).values().cwiseAbs2();
        }
    return DiscreteFunction(L, acc.cwiseSqrt());
}

DiscreteFunction square_function_averaged(
    const DiscreteFunction& f, const std::vector<GridShift>& shifts, int i, int j,
    const std::function<DiscreteFunction(const ShiftedGrid&, const DiscreteFunction&)>& U) {
    if (shifts.empty()) throw std::invalid_argument("need at least one shift");
    Mat acc = Mat::Zero(f.N(), f.N());
    for (const auto& w : shifts) {
        ShiftedGrid g(f.L(), w);
        acc += square_function_ij(U(g, f), g, i, j).values().cwiseAbs2();
    }
    acc /= double(shifts.size());
    return DiscreteFunction(f.L(), acc.cwiseSqrt());
}

LowerSquareReport lower_sf_ainfty_check(const DiscreteFunction& f, const Weight& v, double p, const ShiftedGrid& g) {
    if (!(p > 0.0)) throw DomainError("exponent must be positive");
    double lhs = std::pow(lp_norm(f, p, &v), p);
    auto integ = [&](SquareKind k) { return std::pow(lp_norm(square_function(f, g, k), p, &v), p); };
    LowerSquareReport r;
    r.ratio_axis1 = lhs / integ(SquareKind::Axis1);
    r.ratio_axis2 = lhs / integ(SquareKind::Axis2);
    r.ratio_bipar = lhs / integ(SquareKind::Biparameter);
    return r;
}

}  // namespace dyad
