#include "dyad/commutators.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

namespace dyad {

const char* tag_name(ExpansionTag t) {
    static const char* names[] = {"A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "a11", "a12",
                                  "a21", "a22", "avgdiff", "osc", "mean"};
    return names[static_cast<int>(t)];
}

double ExpansionReport::sum() const {
    double s = 0.0;
    for (const auto& t : terms) s += t.value;
    return s;
}

double ExpansionReport::error() const { return std::fabs(lhs - sum()) / std::max(1.0, std::fabs(lhs)); }

namespace {

struct AxisOps {
    std::vector<DyadicCube> cubes;  // cancellative cubes, (level, pos) order
    std::vector<Mat> D, E;          // Delta_I and E_I as cell operators
};

AxisOps axis_ops(const AxisDictionary& d) {
    AxisOps o;
    const int N = d.N();
    for (int l = 0; l < d.L(); ++l)
        for (int p = 0; p < (1 << l); ++p) {
            const auto& I = d.entry(d.h1(l, p)).cube;
            Vec h = d.function(d.h1(l, p));
            Vec ind = cube_indicator(I, N);
            o.cubes.push_back(I);
            o.D.push_back(h * h.transpose() / double(N));
            o.E.push_back(ind * ind.transpose() / double(I.len));
        }
    return o;
}

Arc arc_of(const DyadicCube& c) { return {c.start, c.len}; }

// per-kind operator choice: (axis-1 op on b, axis-2 op on b, axis-1 op on f, axis-2 op on f); 0 = Delta, 1 = E
constexpr std::array<std::array<int, 4>, 8> kBipar{{{0, 0, 0, 0},
                                                     {0, 0, 1, 0},
                                                     {0, 0, 0, 1},
                                                     {0, 0, 1, 1},
                                                     {1, 0, 0, 0},
                                                     {1, 0, 0, 1},
                                                     {0, 1, 0, 0},
                                                     {0, 1, 1, 0}}};

std::array<Mat, 8> bipar_all(const Mat& b, const Mat& f, const AxisOps& o1, const AxisOps& o2) {
    std::array<Mat, 8> out;
    const auto N = b.rows();
    for (auto& m : out) m = Mat::Zero(N, N);
    for (std::size_t i = 0; i < o1.cubes.size(); ++i) {
        Mat bl[2] = {o1.D[i] * b, o1.E[i] * b};
        Mat fl[2] = {o1.D[i] * f, o1.E[i] * f};
        for (std::size_t j = 0; j < o2.cubes.size(); ++j) {
            Mat br[2][2], fr[2][2];
            for (int x = 0; x < 2; ++x) {
                br[x][0] = bl[x] * o2.D[j];
                br[x][1] = bl[x] * o2.E[j];
                fr[x][0] = fl[x] * o2.D[j];
                fr[x][1] = fl[x] * o2.E[j];
            }
            for (int k = 0; k < 8; ++k) {
                const auto& c = kBipar[k];
                out[k] += br[c[0]][c[1]].cwiseProduct(fr[c[2]][c[3]]);
            }
        }
    }
    return out;
}

// a^axis_1 and a^axis_2
std::array<Mat, 2> onepar_all(const Mat& b, const Mat& f, const AxisOps& o, int axis) {
    const auto N = b.rows();
    std::array<Mat, 2> out{Mat::Zero(N, N), Mat::Zero(N, N)};
    for (std::size_t i = 0; i < o.cubes.size(); ++i) {
        if (axis == 0) {
            Mat db = o.D[i] * b;
            out[0] += db.cwiseProduct(o.D[i] * f);
            out[1] += db.cwiseProduct(o.E[i] * f);
        } else {
            Mat db = b * o.D[i];
            out[0] += db.cwiseProduct(f * o.D[i]);
            out[1] += db.cwiseProduct(f * o.E[i]);
        }
    }
    return out;
}

long long pair_key(int a, int b) { return (static_cast<long long>(a) << 32) | static_cast<unsigned>(b); }

int slot_index(int slot) {
    if (slot != 1 && slot != 2) throw std::invalid_argument("commutator slot must be 1 or 2");
    return slot - 1;
}

}  // namespace

DiscreteFunction paraproduct_aux(ExpansionTag kind, const DiscreteFunction& b, const DiscreteFunction& f,
                                 const ShiftedGrid& g) {
    int k = static_cast<int>(kind);
    if (k <= 7) {
        auto o1 = axis_ops(g.dict(0)), o2 = axis_ops(g.dict(1));
        return DiscreteFunction(g.L(), bipar_all(b.values(), f.values(), o1, o2)[k]);
    }
    if (k <= 11) {
        int axis = (k - 8) / 2, j = (k - 8) % 2;
        auto o = axis_ops(g.dict(axis));
        return DiscreteFunction(g.L(), onepar_all(b.values(), f.values(), o, axis)[j]);
    }
    throw std::invalid_argument("not an auxiliary paraproduct kind");
}

ProductExpansion::ProductExpansion(const DiscreteFunction& b, const DiscreteFunction& f, const ShiftedGrid& g)
    : g_(g), b_(b), f_(f), bs_(b.values()) {
    Cf_ = g_.coefficients(f);
    Cbf_ = g_.coefficients(b * f);
    auto o1 = axis_ops(g_.dict(0)), o2 = axis_ops(g_.dict(1));
    auto A = bipar_all(b.values(), f.values(), o1, o2);
    for (int k = 0; k < 8; ++k) CA_[k] = g_.coefficients(DiscreteFunction(g.L(), A[k]));
    for (int axis = 0; axis < 2; ++axis) {
        auto a = onepar_all(b.values(), f.values(), axis == 0 ? o1 : o2, axis);
        for (int j = 0; j < 2; ++j) Ca_[axis][j] = g_.coefficients(DiscreteFunction(g.L(), a[j]));
    }
}

double ProductExpansion::mean(int d1, int d2) const {
    return bs_.average(arc_of(g_.dict(0).entry(d1).cube), arc_of(g_.dict(1).entry(d2).cube));
}

ExpansionReport ProductExpansion::pairing(int d1, int d2) const {
    const auto &D1 = g_.dict(0), &D2 = g_.dict(1);
    const int N = g_.N();
    const bool c1 = D1.cancellative(d1), c2 = D2.cancellative(d2);
    ExpansionReport r;
    r.lhs = Cbf_(d1, d2);
    const double m = mean(d1, d2);
    if (c1 && c2) {
        for (int k = 0; k < 8; ++k) r.terms.push_back({static_cast<ExpansionTag>(k), CA_[k](d1, d2)});
    } else if (c1 || c2) {
        const int axis = c1 ? 0 : 1;
        const auto& ca = Ca_[axis];
        r.terms.push_back({axis == 0 ? ExpansionTag::a11 : ExpansionTag::a21, ca[0](d1, d2)});
        r.terms.push_back({axis == 0 ? ExpansionTag::a12 : ExpansionTag::a22, ca[1](d1, d2)});
        // <b>_{I,1}(x2) (axis 0) or <b>_{J,2}(x1) (axis 1), minus the rectangle mean
        const auto& C = axis == 0 ? D1.entry(d1).cube : D2.entry(d2).cube;
        Vec psi1 = D1.function(d1), psi2 = D2.function(d2);
        Vec avg = Vec::Zero(N);
        for (int x = 0; x < N; ++x)
            for (int k = 0; k < C.len; ++k) {
                int c = (C.start + k) % N;
                avg[x] += axis == 0 ? b_(c, x) : b_(x, c);
            }
        avg = avg / double(C.len) - Vec::Constant(N, m);
        double v = 0.0;
        for (int x1 = 0; x1 < N; ++x1)
            for (int x2 = 0; x2 < N; ++x2)
                v += (axis == 0 ? avg[x2] : avg[x1]) * f_(x1, x2) * psi1[x1] * psi2[x2];
        r.terms.push_back({ExpansionTag::AvgDiff, v / (double(N) * N)});
    } else {
        Vec psi1 = D1.function(d1), psi2 = D2.function(d2);
        double v = 0.0;
        for (int x1 = 0; x1 < N; ++x1)
            for (int x2 = 0; x2 < N; ++x2) v += (b_(x1, x2) - m) * f_(x1, x2) * psi1[x1] * psi2[x2];
        r.terms.push_back({ExpansionTag::Osc, v / (double(N) * N)});
    }
    r.terms.push_back({ExpansionTag::Mean, m * Cf_(d1, d2)});
    return r;
}

ExpansionReport expand_bipar(const DiscreteFunction& b, const DiscreteFunction& f, const DyadicCube& I0,
                             const DyadicCube& J0, const ShiftedGrid& g) {
    ProductExpansion P(b, f, g);
    return P.pairing(g.dict(0).index_of(I0, 1), g.dict(1).index_of(J0, 1));
}

ExpansionReport expand_onepar(const DiscreteFunction& b, const DiscreteFunction& f, const DyadicCube& I0,
                              const DyadicCube& J0, int axis, const ShiftedGrid& g) {
    ProductExpansion P(b, f, g);
    return P.pairing(g.dict(0).index_of(I0, axis == 0), g.dict(1).index_of(J0, axis == 1));
}

ExpansionReport expand_none(const DiscreteFunction& b, const DiscreteFunction& f, const DyadicCube& I0,
                            const DyadicCube& J0, const ShiftedGrid& g) {
    ProductExpansion P(b, f, g);
    return P.pairing(g.dict(0).index_of(I0, 0), g.dict(1).index_of(J0, 0));
}

// ---------------- adapted maximal functions ----------------

Vec adapted_maximal_1d(const Vec& beta, const Vec& g) {
    const int N = static_cast<int>(beta.size());
    int L = 0;
    while ((1 << L) < N) ++L;
    Vec out = Vec::Zero(N);
    for (const auto& a : arc_family(L, std::nullopt)) {
        double m = 0.0;
        for (int k = 0; k < a.len; ++k) m += beta[(a.start + k) % N];
        m /= a.len;
        double s = 0.0;
        for (int k = 0; k < a.len; ++k) {
            int c = (a.start + k) % N;
            s += std::fabs(beta[c] - m) * std::fabs(g[c]);
        }
        s /= a.len;
        for (int k = 0; k < a.len; ++k) out[(a.start + k) % N] = std::max(out[(a.start + k) % N], s);
    }
    return out;
}

DiscreteFunction adapted_maximal_apply(const AdaptedMaximal& A, const DiscreteFunction& f) {
    const int L = f.L(), N = f.N();
    const Mat& b = A.b.values();
    Mat out = Mat::Zero(N, N);
    switch (A.kind) {
        case AdaptedKind::Rectangles: {
            auto arcs = arc_family(L, std::nullopt);
            RectangleSums S(b);
            for (const auto& a : arcs)
                for (const auto& c : arcs) {
                    double m = S.average(a, c), s = 0.0;
                    for (int x = 0; x < a.len; ++x)
                        for (int y = 0; y < c.len; ++y) {
                            int i = (a.start + x) % N, j = (c.start + y) % N;
                            s += std::fabs(b(i, j) - m) * std::fabs(f(i, j));
                        }
                    s /= double(a.len) * c.len;
                    for (int x = 0; x < a.len; ++x)
                        for (int y = 0; y < c.len; ++y) {
                            double& o = out((a.start + x) % N, (c.start + y) % N);
                            o = std::max(o, s);
                        }
                }
            break;
        }
        case AdaptedKind::Axis1:
            for (int j = 0; j < N; ++j) out.col(j) = adapted_maximal_1d(b.col(j), f.values().col(j));
            break;
        case AdaptedKind::Axis2:
            for (int i = 0; i < N; ++i)
                out.row(i) = adapted_maximal_1d(b.row(i).transpose(), f.values().row(i).transpose()).transpose();
            break;
        case AdaptedKind::Phi1:
        case AdaptedKind::Phi2: {
            if (!A.shift) throw std::invalid_argument("phi needs a grid shift");
            const int axis = A.kind == AdaptedKind::Phi1 ? 0 : 1;
            ShiftedGrid g(L, *A.shift);
            const auto& d = g.dict(axis);
            for (int l = 0; l < L; ++l)
                for (int p = 0; p < (1 << l); ++p) {
                    const int k = d.h1(l, p);
                    const auto& C = d.entry(k).cube;
                    Vec h = d.function(k), ind = cube_indicator(C, N);
                    // <f, h_C>_axis and <b>_{C,axis} as functions of the other variable
                    Vec fc = axis == 0 ? Vec(f.values().transpose() * h / double(N)) : Vec(f.values() * h / double(N));
                    Vec bc = axis == 0 ? Vec(b.transpose() * ind / double(C.len)) : Vec(b * ind / double(C.len));
                    Vec m = adapted_maximal_1d(bc, fc);
                    out += axis == 0 ? Mat(h * m.transpose()) : Mat(m * h.transpose());
                }
            break;
        }
    }
    return DiscreteFunction(L, out);
}

MaximalBoundReport maximal_bound_check(const DiscreteFunction& b, const DiscreteFunction& f, const GridShift& w) {
    const int L = f.L(), N = f.N();
    ShiftedGrid g(L, w);
    MaximalBoundReport rep;
    auto phi = adapted_maximal_apply({b, AdaptedKind::Phi2, w}, f);
    auto Mb = adapted_maximal_apply({b, AdaptedKind::Rectangles, std::nullopt}, f);
    RectangleSums Sb(b.values()), SM(Mb.values());
    const auto &d1 = g.dict(0), &d2 = g.dict(1);
    for (int l1 = 0; l1 <= L; ++l1)
        for (int p1 = 0; p1 < (1 << l1); ++p1) {
            const auto& I = d1.entry(d1.h0(l1, p1)).cube;
            Vec ind = cube_indicator(I, N);
            for (int l2 = 0; l2 <= L; ++l2)
                for (int p2 = 0; p2 < (1 << l2); ++p2) {
                    const auto& J = d2.entry(d2.h0(l2, p2)).cube;
                    double mR = Sb.average(arc_of(I), arc_of(J));
                    if (l2 < L) {
                        Vec h = d2.function(d2.h1(l2, p2));
                        Vec fJ = f.values() * h / double(N);
                        Vec bJ = b.values() * cube_indicator(J, N) / double(J.len);
                        double lhs = std::fabs((bJ - Vec::Constant(N, mR)).cwiseProduct(fJ).dot(ind) / I.len);
                        double rhs = (phi.values() * h / double(N)).dot(ind) / I.len;
                        rep.worst_phi = std::max(rep.worst_phi, lhs - rhs);
                    }
                    double s = 0.0;
                    for (int x = 0; x < I.len; ++x)
                        for (int y = 0; y < J.len; ++y) {
                            int i = (I.start + x) % N, j = (J.start + y) % N;
                            s += (b(i, j) - mR) * f(i, j);
                        }
                    double lhs = std::fabs(s) / (double(I.len) * J.len);
                    double rhs = SM.average(arc_of(I), arc_of(J));
                    if (lhs > 0.0) rep.worst_osc = std::max(rep.worst_osc, rhs > 0 ? lhs / rhs : kInf);
                    ++rep.checked;
                }
        }
    return rep;
}

AverageGrowthReport average_growth_check(const DiscreteFunction& b, const GridShift& w) {
    const int L = b.L();
    ShiftedGrid g(L, w);
    const double bmo = bmo_little(b, w);
    RectangleSums S(b.values());
    AverageGrowthReport rep;
    if (bmo == 0.0) return rep;
    // per axis: (ancestor, descendant, generation)
    auto desc = [&](const AxisLattice& lat) {
        std::vector<std::vector<std::pair<Arc, int>>> out;
        for (int l = 0; l <= L; ++l)
            for (const auto& K : lat.level_cubes(l)) {
                std::vector<std::pair<Arc, int>> v;
                for (int m = l; m <= L; ++m)
                    for (const auto& I : lat.level_cubes(m))
                        if (lat.is_ancestor_or_self(K, I)) v.push_back({arc_of(I), m - l});
                out.push_back(v);
            }
        return out;
    };
    auto D1 = desc(g.lattice(0)), D2 = desc(g.lattice(1));
    for (const auto& A : D1)
        for (const auto& B : D2)
            for (const auto& [I, i] : A)
                for (const auto& [Q, q] : A)
                    for (const auto& [J, j] : B)
                        for (const auto& [R, r] : B) {
                            int mx = std::max({i, j, q, r});
                            if (mx == 0) continue;
                            double d = std::fabs(S.average(Q, R) - S.average(I, J));
                            rep.worst = std::max(rep.worst, d / (mx * bmo));
                            ++rep.checked;
                        }
    return rep;
}

// ---------------- commutators ----------------

DiscreteFunction commutator_apply(const DiscreteFunction& b, const HaarForm& U, int slot, const DiscreteFunction& f1,
                                  const DiscreteFunction& f2) {
    int s = slot_index(slot);
    return b * U.apply(f1, f2) - (s == 0 ? U.apply(b * f1, f2) : U.apply(f1, b * f2));
}

double commutator_form(const DiscreteFunction& b, const HaarForm& U, int slot, const DiscreteFunction& f1,
                       const DiscreteFunction& f2, const DiscreteFunction& f3) {
    int s = slot_index(slot);
    return U.form(f1, f2, b * f3) - (s == 0 ? U.form(b * f1, f2, f3) : U.form(f1, b * f2, f3));
}

DiscreteFunction iterated_commutator_apply(const DiscreteFunction& b2, const DiscreteFunction& b1, const HaarForm& U,
                                           std::array<int, 2> slots, const DiscreteFunction& f1,
                                           const DiscreteFunction& f2) {
    int s2 = slot_index(slots[1]);
    return b2 * commutator_apply(b1, U, slots[0], f1, f2) -
           (s2 == 0 ? commutator_apply(b1, U, slots[0], b2 * f1, f2) : commutator_apply(b1, U, slots[0], f1, b2 * f2));
}

double iterated_commutator_form(const DiscreteFunction& b2, const DiscreteFunction& b1, const HaarForm& U,
                                std::array<int, 2> slots, const DiscreteFunction& f1, const DiscreteFunction& f2,
                                const DiscreteFunction& f3) {
    int s2 = slot_index(slots[1]);
    return commutator_form(b1, U, slots[0], f1, f2, b2 * f3) -
           (s2 == 0 ? commutator_form(b1, U, slots[0], b2 * f1, f2, f3)
                    : commutator_form(b1, U, slots[0], f1, b2 * f2, f3));
}

int commutator_case(const FormEntry& e, const ShiftedGrid& g, int slot) {
    int s = slot_index(slot);
    const bool in1 = g.dict(0).cancellative(e.d1[s]), in2 = g.dict(1).cancellative(e.d2[s]);
    const bool out1 = g.dict(0).cancellative(e.d1[2]), out2 = g.dict(1).cancellative(e.d2[2]);
    int zeros = !in1 + !in2 + !out1 + !out2;
    switch (zeros) {
        case 0: return 1;
        case 1: return 2;
        case 2:
            if ((!in1 && !in2) || (!out1 && !out2)) return 4;
            if ((!in1 && !out1) || (!in2 && !out2)) return 5;
            return 3;
        case 3: return 6;
        default: return 7;
    }
}

double CommutatorReport::error() const {
    return std::fabs(definition - decomposed) / std::max(1.0, std::fabs(definition));
}

namespace {

class PairingCache {
public:
    explicit PairingCache(const ProductExpansion& P) : P_(P) {}
    const ExpansionReport& get(int d1, int d2) {
        auto [it, fresh] = m_.try_emplace(pair_key(d1, d2));
        if (fresh) it->second = P_.pairing(d1, d2);
        return it->second;
    }

private:
    const ProductExpansion& P_;
    std::unordered_map<long long, ExpansionReport> m_;
};

double mean_of(const ExpansionReport& r) {
    return r.terms.back().value;  // Mean is always last
}

}  // namespace

CommutatorReport commutator_decompose(const DiscreteFunction& b, const HaarForm& U, int slot,
                                      const DiscreteFunction& f1, const DiscreteFunction& f2,
                                      const DiscreteFunction& f3) {
    const int s = slot_index(slot), o = 1 - s;
    ShiftedGrid g(U.L(), U.shift());
    const DiscreteFunction& fs = s == 0 ? f1 : f2;
    ProductExpansion Pout(b, f3, g), Pin(b, fs, g);
    PairingCache out(Pout), in(Pin);
    const Mat C[3] = {g.coefficients(f1), g.coefficients(f2), g.coefficients(f3)};
    CommutatorReport rep;
    rep.definition = commutator_form(b, U, slot, f1, f2, f3);
    double mean_part = 0.0;
    std::map<std::string, double> parts;
    for (const auto& e : U.entries()) {
        double p[3];
        for (int j = 0; j < 3; ++j) p[j] = C[j](e.d1[j], e.d2[j]);
        const auto& ro = out.get(e.d1[2], e.d2[2]);
        const auto& ri = in.get(e.d1[s], e.d2[s]);
        const double wo = e.c * p[o] * p[s], wi = e.c * p[o] * p[2];
        for (std::size_t k = 0; k + 1 < ro.terms.size(); ++k)
            parts[std::string("out:") + tag_name(ro.terms[k].tag)] += wo * ro.terms[k].value;
        for (std::size_t k = 0; k + 1 < ri.terms.size(); ++k)
            parts[std::string("in:") + tag_name(ri.terms[k].tag)] -= wi * ri.terms[k].value;
        // <b>_{R3} <f3,psi3> p_s - <b>_{Rs} <fs,psi_s> p_3 = (<b>_{R3} - <b>_{Rs}) p_s p_3
        mean_part += e.c * p[o] * (mean_of(ro) * p[s] - mean_of(ri) * p[2]);
        ++rep.cases[commutator_case(e, g, slot)];
    }
    parts["mean"] = mean_part;
    rep.parts = std::move(parts);
    for (const auto& [k, v] : rep.parts) rep.decomposed += v;
    return rep;
}

HaarForm mean_difference_form(const DiscreteFunction& b, const HaarForm& U, int slot) {
    const int s = slot_index(slot);
    ShiftedGrid g(U.L(), U.shift());
    RectangleSums S(b.values());
    auto m = [&](int d1, int d2) {
        return S.average(arc_of(g.dict(0).entry(d1).cube), arc_of(g.dict(1).entry(d2).cube));
    };
    HaarForm out(U.L(), U.shift());
    for (const auto& e : U.entries()) {
        double c = e.c * (m(e.d1[2], e.d2[2]) - m(e.d1[s], e.d2[s]));
        if (c != 0.0) out.add(e.d1, e.d2, c);
    }
    return out;
}

CommutatorReport iterated_commutator_decompose(const DiscreteFunction& b2, const DiscreteFunction& b1,
                                               const HaarForm& U, std::array<int, 2> slots,
                                               const DiscreteFunction& f1, const DiscreteFunction& f2,
                                               const DiscreteFunction& f3) {
    const int s2 = slot_index(slots[1]);
    CommutatorReport rep;
    rep.definition = iterated_commutator_form(b2, b1, U, slots, f1, f2, f3);
    auto r1 = commutator_decompose(b1, U, slots[0], f1, f2, b2 * f3);
    auto r2 = s2 == 0 ? commutator_decompose(b1, U, slots[0], b2 * f1, f2, f3)
                      : commutator_decompose(b1, U, slots[0], f1, b2 * f2, f3);
    rep.cases = r1.cases;
    for (const auto& [k, v] : r1.parts)
        if (k != "mean") rep.parts["outer(" + k + ")"] += v;
    for (const auto& [k, v] : r2.parts)
        if (k != "mean") rep.parts["outer(" + k + ")"] -= v;
    auto r3 = commutator_decompose(b2, mean_difference_form(b1, U, slots[0]), slots[1], f1, f2, f3);
    for (const auto& [k, v] : r3.parts) rep.parts["mean/" + k] += v;
    for (const auto& [k, v] : rep.parts) rep.decomposed += v;
    return rep;
}

// ---------------- duality lemma ----------------

namespace {

double mask_measure_in(const Mat& F, const DyadicCube& I, const DyadicCube& J) {
    const int N = static_cast<int>(F.rows());
    double s = 0.0;
    for (int x = 0; x < I.len; ++x)
        for (int y = 0; y < J.len; ++y) s += F((I.start + x) % N, (J.start + y) % N);
    return s / (double(N) * N);
}

}  // namespace

DualityReport duality_lemma_check(const Mat& F, const std::vector<DyadicRectangle>& C, const std::vector<double>& a,
                                  const std::vector<double>& b, const GridShift& w) {
    if (a.size() != C.size() || b.size() != C.size()) throw std::invalid_argument("coefficient count mismatch");
    const int N = static_cast<int>(F.rows());
    int L = 0;
    while ((1 << L) < N) ++L;
    ShiftedGrid g(L, w);
    DualityReport rep;
    std::vector<RectCoefficient> coeffs;
    Mat S2 = Mat::Zero(N, N);
    for (std::size_t i = 0; i < C.size(); ++i) {
        const auto& R = C[i];
        if (mask_measure_in(F, R.I, R.J) < 0.99 * R.measure()) throw PreconditionError("rectangle violates |R n F| >= 0.99 |R|");
        rep.lhs += std::fabs(a[i] * b[i]);
        coeffs.push_back({{g.lattice(0).cube(R.I.level, R.I.pos), g.lattice(1).cube(R.J.level, R.J.pos)}, a[i]});
        double v = b[i] * b[i] / R.measure();
        for (int x = 0; x < R.I.len; ++x)
            for (int y = 0; y < R.J.len; ++y) S2((R.I.start + x) % N, (R.J.start + y) % N) += v;
    }
    rep.integral = (F.array() * S2.array().sqrt()).sum() / (double(N) * N);
    rep.bmo = product_bmo_lower_bound(coeffs, g).value;
    if (rep.lhs > 0.0) rep.ratio = rep.bmo * rep.integral > 0 ? rep.lhs / (rep.bmo * rep.integral) : kInf;
    return rep;
}

DualityReport duality_lemma_check_1par(const Mat& F, const DyadicCube& K0, const std::vector<DyadicCube>& C,
                                       const std::vector<double>& a, const std::vector<double>& b,
                                       const GridShift& w) {
    if (a.size() != C.size() || b.size() != C.size()) throw std::invalid_argument("coefficient count mismatch");
    const int N = static_cast<int>(F.rows());
    int L = 0;
    while ((1 << L) < N) ++L;
    AxisLattice lat(TorusGrid(L), w.axis[1], 1);
    DualityReport rep;
    Vec S2 = Vec::Zero(N);
    std::vector<std::pair<DyadicCube, double>> shifted;
    for (std::size_t i = 0; i < C.size(); ++i) {
        const auto& V = C[i];
        if (mask_measure_in(F, K0, V) < 0.99 * K0.side() * V.side())
            throw PreconditionError("rectangle violates |R n F| >= 0.99 |R|");
        rep.lhs += std::fabs(a[i] * b[i]);
        shifted.push_back({lat.cube(V.level, V.pos), a[i]});
        for (int y = 0; y < V.len; ++y) S2[(V.start + y) % N] += b[i] * b[i] / V.side();
    }
    // Carleson form over the shifted lattice
    for (int l = 0; l <= L; ++l)
        for (const auto& V0 : lat.level_cubes(l)) {
            double s = 0.0;
            for (const auto& [V, av] : shifted)
                if (lat.is_ancestor_or_self(V0, V)) s += av * av;
            rep.bmo = std::max(rep.bmo, std::sqrt(s / V0.side()));
        }
    Vec k0 = cube_indicator(K0, N) / K0.side();
    Vec s = S2.cwiseSqrt();
    rep.integral = (F.array() * (k0 * s.transpose()).array()).sum() / (double(N) * N);
    if (rep.lhs > 0.0) rep.ratio = rep.bmo * rep.integral > 0 ? rep.lhs / (rep.bmo * rep.integral) : kInf;
    return rep;
}

// ---------------- weak-type machinery ----------------

OmegaFamily omega_family(const DiscreteFunction& F, const Mat& E, double r, double C, double c, int U, double frac) {
    const int L = F.L(), N = F.N();
    const double vol = 1.0 / (double(N) * N);
    const double Em = E.sum() * vol;
    if (Em <= 0.0) throw std::invalid_argument("E must be non-empty");
    OmegaFamily out;
    AxisLattice l1(TorusGrid(L), AxisShift(L, 0), 0), l2(TorusGrid(L), AxisShift(L, 0), 1);
    std::vector<DyadicRectangle> all;
    for (int a = 0; a <= L; ++a)
        for (const auto& I : l1.level_cubes(a))
            for (int bb = 0; bb <= L; ++bb)
                for (const auto& J : l2.level_cubes(bb)) all.push_back({I, J});
    for (int u = 0; u <= U; ++u) {
        double thr = C * std::pow(2.0, -u) * std::pow(Em, -1.0 / r);
        Mat om = (F.values().array() > thr).cast<double>().matrix();
        auto M = maximal_function(DiscreteFunction(L, om), MaximalKind::Strong);
        Mat en = (M.values().array() > c).cast<double>().matrix();
        std::vector<DyadicRectangle> hat;
        for (const auto& R : all)
            if (mask_measure_in(om, R.I, R.J) >= frac * R.measure()) hat.push_back(R);
        std::vector<DyadicRectangle> fr;
        for (const auto& R : hat) {
            bool before = false;
            if (u > 0)
                for (const auto& Q : out.hat.back())
                    if (Q.I == R.I && Q.J == R.J) {
                        before = true;
                        break;
                    }
            if (!before) fr.push_back(R);
        }
        out.omega.push_back(om);
        out.enlarged.push_back(en);
        out.hat.push_back(std::move(hat));
        out.fresh.push_back(std::move(fr));
    }
    out.E_prime = E.cwiseProduct((Mat::Ones(N, N) - out.enlarged[0]));
    return out;
}

double omega_constant(const DiscreteFunction& F, const Mat& E, double r, double c) {
    auto ok = [&](double C) {
        auto fam = omega_family(F, E, r, C, c, 0);
        return fam.E_prime.sum() >= 0.99 * E.sum();
    };
    double lo = 0.0, hi = 20.0;  // log2 C
    if (ok(1.0)) return 1.0;
    if (!ok(std::pow(2.0, hi))) return kInf;
    for (int it = 0; it < 50; ++it) {
        double mid = 0.5 * (lo + hi);
        (ok(std::pow(2.0, mid)) ? hi : lo) = mid;
    }
    return std::pow(2.0, hi);
}

DiscreteFunction aux_phi1(const DiscreteFunction& b, const DiscreteFunction& f) {
    const int L = f.L(), N = f.N();
    AxisLattice base(TorusGrid(L), AxisShift(L, 0), 1);
    Mat acc = Mat::Zero(N, N);
    const unsigned codes = 1u << L;
    for (unsigned w2 = 0; w2 < codes; ++w2) {
        GridShift w(L, 0, w2);
        auto phi = adapted_maximal_apply({b, AdaptedKind::Phi2, w}, f);
        AxisDictionary d(AxisLattice(TorusGrid(L), w.axis[1], 1));
        Mat S = Mat::Zero(N, N);
        for (int l = 0; l < L; ++l)
            for (int p = 0; p < (1 << l); ++p) {
                Vec c = phi.values() * d.function(d.h1(l, p)) / double(N);  // <g, h_{V+w}>_2
                const auto V = base.cube(l, p);
                Vec ind = cube_indicator(V, N) / V.side();
                S += c.cwiseAbs2() * ind.transpose();
            }
        DiscreteFunction St(L, S.cwiseSqrt());
        acc += maximal_function(St, MaximalKind::Axis1).values();
    }
    return DiscreteFunction(L, acc / double(codes));
}

DiscreteFunction aux_phi2(const DiscreteFunction& f, int l) {
    const int L = f.L(), N = f.N();
    Mat acc = Mat::Zero(N, N);
    const unsigned codes = 1u << L;
    for (unsigned w1 = 0; w1 < codes; ++w1) {
        AxisLattice lat(TorusGrid(L), AxisShift(L, w1), 0);
        AxisDictionary d(lat);
        // phi^1 f = sum_I h_I (x) M <f, h_I>_1
        Mat phi = Mat::Zero(N, N);
        for (int m = 0; m < L; ++m)
            for (int p = 0; p < (1 << m); ++p) {
                Vec h = d.function(d.h1(m, p));
                Vec c = f.values().transpose() * h / double(N);
                phi += h * maximal_1d(c).transpose();
            }
        DiscreteFunction P(L, phi);
        for (int m = 0; m + l < L; ++m)
            for (const auto& K : lat.level_cubes(m)) {
                auto blk = martingale_block(P, lat, K, l);
                acc += maximal_function(blk, MaximalKind::Axis1).values().cwiseAbs2();
            }
    }
    return DiscreteFunction(L, (acc / double(codes)).cwiseSqrt());
}

}  // namespace dyad
