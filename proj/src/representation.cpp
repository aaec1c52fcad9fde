#include "dyad/representation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <tuple>
#include <map>
#include <sstream>
#include <unordered_map>

namespace dyad {

using nlohmann::json;

const char* piece_name(Piece p) {
    switch (p) {
        case Piece::Separated: return "sep";
        case Piece::Diagonal: return "diag";
        case Piece::Nested: return "nes";
        case Piece::Para: return "para";
    }
    return "?";
}

int slot_priority(int slot) {
    static const int prio[3] = {1, 0, 2};
    return prio[slot];
}

namespace {

const char* slot_name(int s) {
    static const char* n[3] = {"f1", "f2", "f3"};
    return s >= 0 && s < 3 ? n[s] : "-";
}

Vec combination(const AxisDictionary& d, const SlotCombination& f) {
    Vec v = Vec::Zero(d.N());
    for (const auto& [i, c] : f) v += c * d.function(i);
    return v;
}

DyadicCube common_of(const AxisLattice& lat, const std::array<DyadicCube, 3>& c) {
    return lat.common_ancestor(lat.common_ancestor(c[0], c[1]), c[2]);
}

}  // namespace

int ordering_matches(const std::array<int, 3>& levels) {
    std::array<int, 3> p{0, 1, 2};
    int n = 0;
    do {
        int s = p[0], t = p[1], u = p[2];
        bool ok = levels[t] <= levels[s] - (slot_priority(t) > slot_priority(s)) &&
                  levels[u] <= levels[t] - (slot_priority(u) > slot_priority(t));
        n += ok;
    } while (std::next_permutation(p.begin(), p.end()));
    return n;
}

// ---------------- per-axis catalog ----------------

AxisCatalog::AxisCatalog(const AxisLattice& lat, const GoodnessParams& gp) : dict_(lat), gp_(gp) {
    const int L = lat.L(), N = lat.N();
    const int top = dict_.h0(0, 0);
    const Mat& W = dict_.synthesis();
    auto choices = [&](int level) {
        std::vector<std::pair<DyadicCube, int>> c;
        for (const auto& I : lat.level_cubes(level)) c.push_back({I, 1});
        if (level == 0) c.push_back({lat.cube(0, 0), 0});
        return c;
    };
    std::array<int, 3> perm{0, 1, 2};
    do {
        const int s = perm[0], t = perm[1], u = perm[2];
        const int dt = slot_priority(t) > slot_priority(s);
        const int delta = slot_priority(t) > slot_priority(u);
        for (int ls = 0; ls < L; ++ls) {
            auto cs = choices(ls);
            for (int lt = 0; lt <= ls - dt; ++lt) {
                if (!delta && lt == 0) continue;
                const int lu = lt + delta;
                auto ct = choices(lt);
                auto cu = lat.level_cubes(lu);
                for (const auto& [Is, es] : cs)
                    for (const auto& [It, et] : ct)
                        for (const auto& Iu : cu) {
                            // level-0 triples with an h^0 in s or t are re-expanded in the top basis below
                            if (ls == 0 && (es == 0 || et == 0)) continue;
                            AxisItem it;
                            it.role = {s, t, u};
                            it.cube[s] = Is;
                            it.eta[s] = es;
                            it.cube[t] = It;
                            it.eta[t] = et;
                            it.cube[u] = Iu;
                            it.eta[u] = 0;
                            for (int x = 0; x < 3; ++x) it.d[x] = dict_.index_of(it.cube[x], it.eta[x]);
                            it.winner = Is;
                            it.K = common_of(lat, it.cube);
                            for (int x = 0; x < 3; ++x) it.k[x] = it.cube[x].level - it.K.level;

                            bool nested = delta ? (lu <= ls && lat.is_ancestor_or_self(Iu, Is) && lat.parent(Iu) == It)
                                                : (Iu == It && lt < ls && lat.is_ancestor_or_self(It, Is));
                            TestTerm raw;
                            raw.f[s] = {{it.d[s], 1.0}};
                            raw.f[t] = {{it.d[t], 1.0}};
                            if (nested) {
                                it.piece = Piece::Nested;
                                DyadicCube C = delta ? Iu : lat.ancestor(Is, ls - lt - 1);
                                DyadicCube Cl = lat.left_child(It), Cr = lat.right_child(It);
                                DyadicCube Cs = (Cl == C) ? Cr : Cl;
                                double vC = W(C.start % N, it.d[t]), vS = W(Cs.start % N, it.d[t]);
                                double cuinv = 1.0 / std::sqrt(Iu.side());
                                TestTerm a = raw, b;
                                a.c = -cuinv;
                                a.f[u] = {{top, 1.0}, {it.d[u], -std::sqrt(Iu.side())}};
                                b.c = cuinv;
                                b.f[s] = raw.f[s];
                                b.f[t] = {{top, -vC},
                                          {dict_.h0(C.level, C.pos), vC * std::sqrt(C.side())},
                                          {dict_.h0(Cs.level, Cs.pos), vS * std::sqrt(Cs.side())}};
                                b.f[u] = {{top, 1.0}};
                                it.test = {a, b};
                            } else {
                                double dist = std::max(torus_distance(It, Is, N), torus_distance(Iu, Is, N));
                                double thr = std::pow(Is.side(), gp.gamma) * std::pow(Iu.side(), 1.0 - gp.gamma);
                                it.piece = dist > thr ? Piece::Separated : Piece::Diagonal;
                                raw.f[u] = {{it.d[u], 1.0}};
                                it.test = {raw};
                            }
                            items_.push_back(std::move(it));
                        }
            }
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    // Top level: E_1 f_u = <f_u,h^0> h^0 + <f_u,h^1> h^1 on the torus. Triples with a single
    // h^1 become paraproduct items (next loop); the remaining ones are shift items.
    if (L >= 1) {
        const DyadicCube T = lat.cube(0, 0);
        const std::array<std::array<int, 3>, 3> etas{{{0, 1, 1}, {1, 1, 0}, {0, 0, 0}}};
        const std::array<std::array<int, 3>, 3> roles{{{2, 1, 0}, {0, 1, 2}, {2, 0, 1}}};
        for (int e = 0; e < 3; ++e) {
            const auto& eta = etas[e];
            AxisItem it;
            it.role = roles[e];
            TestTerm tt;
            for (int x = 0; x < 3; ++x) {
                it.cube[x] = T;
                it.eta[x] = eta[x];
                it.d[x] = dict_.index_of(T, eta[x]);
                tt.f[x] = {{it.d[x], 1.0}};
            }
            it.piece = Piece::Diagonal;
            it.K = T;
            it.winner = T;
            it.test = {tt};
            items_.push_back(std::move(it));
        }
    }

    for (int sigma = 0; sigma < 3; ++sigma)
        for (int l = 0; l < L; ++l)
            for (const auto& I : lat.level_cubes(l)) {
                AxisItem it;
                it.piece = Piece::Para;
                it.role = {sigma, -1, -1};
                TestTerm tt;
                for (int x = 0; x < 3; ++x) {
                    it.cube[x] = I;
                    it.eta[x] = x == sigma;
                    it.d[x] = dict_.index_of(I, it.eta[x]);
                    tt.f[x] = {{x == sigma ? it.d[x] : top, 1.0}};
                }
                it.afactor = 1.0 / I.side();
                it.K = I;
                it.winner = I;
                it.test = {tt};
                items_.push_back(std::move(it));
            }
}

Vec AxisCatalog::test_vector(std::size_t i) const {
    int N = dict_.N();
    Vec v = Vec::Zero(N * N * N);
    for (const auto& t : items_[i].test)
        v += t.c * axis_triple(combination(dict_, t.f[0]), combination(dict_, t.f[1]), combination(dict_, t.f[2]));
    return v;
}

Vec AxisCatalog::analysis_vector(std::size_t i) const {
    const auto& it = items_[i];
    return it.afactor * axis_triple(dict_.function(it.d[0]), dict_.function(it.d[1]), dict_.function(it.d[2]));
}

Mat AxisCatalog::test_matrix() const {
    int n3 = dict_.N() * dict_.N() * dict_.N();
    Mat T(n3, items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) T.col(i) = test_vector(i);
    return T;
}

Mat AxisCatalog::analysis_matrix() const {
    int n3 = dict_.N() * dict_.N() * dict_.N();
    Mat A(n3, items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) A.col(i) = analysis_vector(i);
    return A;
}

Vec AxisCatalog::gates() const {
    const auto& lat = lattice();
    std::vector<double> pi(lat.L() + 1, -1.0);
    Vec g(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) {
        const auto& I = items_[i].winner;
        if (!is_good(lat, I, gp_)) {
            g[i] = 0.0;
            continue;
        }
        if (pi[I.level] < 0) pi[I.level] = good_probability(lat.L(), I.level, gp_);
        g[i] = 1.0 / pi[I.level];
    }
    return g;
}

Vec AxisCatalog::coefficients(const Vec& w) const {
    Mat kd = dictionary_transform(w, dict_);
    const int D = dict_.size();
    Vec c(items_.size());
    for (std::size_t i = 0; i < items_.size(); ++i) {
        double s = 0.0;
        for (const auto& t : items_[i].test)
            for (const auto& [a, wa] : t.f[0])
                for (const auto& [b, wb] : t.f[1])
                    for (const auto& [cc, wc] : t.f[2]) s += t.c * wa * wb * wc * kd(cc, a * D + b);
        c[i] = s;
    }
    return c;
}

Mat dictionary_transform(const Vec& w, const AxisDictionary& d) {
    const int N = d.N(), D = d.size();
    const Mat& W = d.synthesis();
    Eigen::Map<const Mat> X(w.data(), N, N * N);  // (z, x*N + y)
    Mat Z = W.transpose() * X;                     // (b, x*N + y)
    Mat Y(D * D, N);
    for (int x = 0; x < N; ++x) {
        Mat Yx = W.transpose() * Z.middleCols(x * N, N).transpose();  // (a, b)
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b) Y(a * D + b, x) = Yx(a, b);
    }
    return W.transpose() * Y.transpose();  // (c, a*D + b)
}

Vec dictionary_synthesis(const Mat& R, const AxisDictionary& d) {
    const int N = d.N(), D = d.size();
    const Mat& W = d.synthesis();
    Mat T = W * R;  // (x, a*D + b)
    Vec w(N * N * N);
    for (int x = 0; x < N; ++x) {
        Mat Yx(D, D);
        for (int a = 0; a < D; ++a)
            for (int b = 0; b < D; ++b) Yx(a, b) = T(x, a * D + b);
        Mat V = W * Yx * W.transpose();  // (y, z)
        for (int y = 0; y < N; ++y)
            for (int z = 0; z < N; ++z) w[(x * N + y) * N + z] = V(y, z);
    }
    return w;
}

// ---------------- common ancestors ----------------

AncestorCheck common_ancestor(const AxisLattice& lat, const DyadicCube& I1, const DyadicCube& I2, const DyadicCube& I3,
                              const GoodnessParams& gp) {
    AncestorCheck r;
    const int N = lat.N();
    r.K = common_of(lat, {I1, I2, I3});
    r.good = is_good(lat, I3, gp);
    bool nested = lat.is_ancestor_or_self(I2, I3) && lat.is_ancestor_or_self(I1, I2) && !(I1 == I3);
    double dist = std::max(torus_distance(I3, I1, N), torus_distance(I3, I2, N));
    if (nested) {
        r.piece = Piece::Nested;
        r.lhs = r.K.side();
        r.rhs = I1.side();
        r.holds = r.K == I1;
        return r;
    }
    double thr = std::pow(I3.side(), gp.gamma) * std::pow(I2.side(), 1.0 - gp.gamma);
    if (dist > thr) {
        r.piece = Piece::Separated;
        r.lhs = dist;
        r.rhs = std::pow(2.0, -(gp.r + 1) * (1.0 - gp.gamma)) * std::pow(I3.side(), gp.gamma) *
                std::pow(r.K.side(), 1.0 - gp.gamma);
    } else {
        r.piece = Piece::Diagonal;
        r.lhs = std::pow(2.0, gp.r) * I3.side();
        r.rhs = r.K.side();
    }
    r.holds = !r.good || r.lhs >= r.rhs * (1 - 1e-12);
    return r;
}

// ---------------- bi-parameter decomposition ----------------

std::string DecompositionTerm::tag() const {
    std::ostringstream os;
    os << family << " sym=(" << slot_name(s[0]) << "," << slot_name(s[1]) << ")";
    if (family != "full") os << " u=(" << slot_name(u[0]) << "," << slot_name(u[1]) << ")";
    os << " " << piece_name(piece1) << "/" << piece_name(piece2);
    auto arr = [&](const std::array<int, 3>& a) {
        os << "(" << a[0] << "," << a[1] << "," << a[2] << ")";
    };
    if (has_k) {
        os << " k=";
        arr(k);
    }
    if (has_v) {
        os << " v=";
        arr(v);
    }
    return os.str();
}

int DecompositionTerm::max_complexity() const {
    int m = 0;
    if (has_k) m = std::max(m, *std::max_element(k.begin(), k.end()));
    if (has_v) m = std::max(m, *std::max_element(v.begin(), v.end()));
    return m;
}

HaarForm DecompositionResult::total_form() const {
    HaarForm h(L, w);
    for (const auto& t : terms) {
        if (t.op.empty()) throw std::logic_error("decomposition terms were not kept");
        double s = t.alpha_weight * t.constant;
        std::visit([&](const auto& o) { h.append(o.lower().scaled(s)); }, t.op.front());
    }
    return h;
}

json DecompositionResult::manifest() const {
    json j;
    j["L"] = L;
    j["shift"] = json::array({w.axis[0].code(), w.axis[1].code()});
    j["gated"] = gated;
    j["items"] = json::array({items1, items2});
    j["residual"] = residual;
    j["reference"] = reference;
    json ts = json::array();
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const auto& t = terms[i];
        json r;
        r["tag"] = t.tag();
        r["family"] = t.family;
        r["pieces"] = json::array({piece_name(t.piece1), piece_name(t.piece2)});
        r["symmetry"] = json::array({t.s[0], t.s[1]});
        r["pattern"] = json::array({t.u[0], t.u[1]});
        if (t.has_k) r["k"] = t.k;
        if (t.has_v) r["v"] = t.v;
        r["alpha_weight"] = t.alpha_weight;
        r["constant"] = t.constant;
        r["entries"] = t.entries;
        if (!t.op.empty()) {
            std::ostringstream f;
            f << "term_" << std::setw(4) << std::setfill('0') << i << ".json";
            r["file"] = f.str();
        }
        ts.push_back(r);
    }
    j["terms"] = ts;
    return j;
}

void DecompositionResult::write(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    json m = manifest();
    std::ofstream(dir / "manifest.json") << m.dump(1) << "\n";
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (terms[i].op.empty()) continue;
        json j = std::visit([](const auto& o) { return o.to_json(); }, terms[i].op.front());
        std::ofstream(dir / m["terms"][i]["file"].get<std::string>()) << j.dump() << "\n";
    }
}

namespace {

struct ClassKey {
    Piece piece;
    int s, u;
    std::array<int, 3> k;
    bool operator<(const ClassKey& o) const {
        return std::tie(piece, s, u, k) < std::tie(o.piece, o.s, o.u, o.k);
    }
};

struct Classes {
    std::vector<ClassKey> keys;
    std::vector<std::vector<int>> members;
};

Classes classify(const AxisCatalog& c) {
    std::map<ClassKey, int> id;
    Classes out;
    for (std::size_t i = 0; i < c.size(); ++i) {
        const auto& it = c.items()[i];
        ClassKey key{it.piece, it.role[0], it.piece == Piece::Para ? -1 : it.u(),
                     it.piece == Piece::Para ? std::array<int, 3>{0, 0, 0} : it.k};
        auto [p, fresh] = id.emplace(key, static_cast<int>(out.keys.size()));
        if (fresh) {
            out.keys.push_back(key);
            out.members.emplace_back();
        }
        out.members[p->second].push_back(static_cast<int>(i));
    }
    return out;
}

double item_cap(const AxisItem& it) {
    return std::sqrt(it.cube[0].side() * it.cube[1].side() * it.cube[2].side()) / (it.K.side() * it.K.side());
}

double alpha_k(const std::array<int, 3>& k, double alpha) {
    return std::pow(2.0, -alpha * *std::max_element(k.begin(), k.end()) / 2.0);
}

// symbol on the paraproduct axis: sum_i coef_i |I_i| h_{I_i}
Vec para_symbol(const AxisCatalog& c, const std::vector<int>& members, const std::function<double(int)>& coef) {
    const auto& d = c.dict();
    Vec b = Vec::Zero(d.N());
    for (int i : members) {
        const auto& it = c.items()[i];
        double a = coef(i);
        if (a != 0.0) b += a * it.cube[0].side() * d.function(d.h1(it.cube[0].level, it.cube[0].pos));
    }
    return b;
}

FullParaproduct full_from(const AxisCatalog& c1, const AxisCatalog& c2, const std::vector<int>& A,
                          const std::vector<int>& B, int s1, int s2, const GridShift& w,
                          const std::function<double(int, int)>& C) {
    FullParaproduct F(c1.lattice().L(), w, s1, s2);
    for (int i : A)
        for (int j : B) {
            const auto &I = c1.items()[i].cube[0], &J = c2.items()[j].cube[0];
            F.lambda()(canc_index(I), canc_index(J)) = C(i, j) * I.side() * J.side();
        }
    return F;
}

struct TripleIndex {
    std::unordered_map<long long, int> id;
    std::vector<std::array<int, 3>> t;
    int operator()(const std::array<int, 3>& d) {
        long long k = (static_cast<long long>(d[0]) << 40) | (static_cast<long long>(d[1]) << 20) | d[2];
        auto [it, fresh] = id.emplace(k, static_cast<int>(t.size()));
        if (fresh) t.push_back(d);
        return it->second;
    }
    Mat columns(const AxisDictionary& d) const {
        int N = d.N();
        Mat A(N * N * N, t.size());
        for (std::size_t c = 0; c < t.size(); ++c)
            A.col(c) = axis_triple(d.function(t[c][0]), d.function(t[c][1]), d.function(t[c][2]));
        return A;
    }
};

Mat orthonormal_triple_basis(const AxisDictionary& d) {
    Mat B = d.orthonormal_basis();
    int N = d.N();
    Mat T(N * N * N, N * N * N);
    int c = 0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) T.col(c++) = axis_triple(B.col(i), B.col(j), B.col(k));
    return T;
}

struct Prepared {
    AxisCatalog c1, c2;
    Vec f1, f2;  // afactor (and gate) per item
    Classes k1, k2;
};

Prepared prepare(int L, const GridShift& w, const DecomposeOptions& opt) {
    Prepared p{AxisCatalog(AxisLattice(TorusGrid(L), w.axis[0], 0), opt.gp),
               AxisCatalog(AxisLattice(TorusGrid(L), w.axis[1], 1), opt.gp), Vec(), Vec(), {}, {}};
    auto factors = [&](const AxisCatalog& c) {
        Vec f(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) f[i] = c.items()[i].afactor;
        if (opt.gated) f = f.cwiseProduct(c.gates());
        return f;
    };
    p.f1 = factors(p.c1);
    p.f2 = factors(p.c2);
    p.k1 = classify(p.c1);
    p.k2 = classify(p.c2);
    return p;
}

void check_resolution(int L, const DecomposeOptions& opt) {
    if (opt.max_complexity > L)
        throw ResolutionError("requested complexity " + std::to_string(opt.max_complexity) +
                              " exceeds the resolution: max (k,v) = " + std::to_string(L));
}

}  // namespace

DecompositionResult decompose(const KernelTensor& Kt, const GridShift& w, const DecomposeOptions& opt) {
    const int L = Kt.L(), N = 1 << L;
    check_resolution(L, opt);
    Prepared p = prepare(L, w, opt);
    const auto &c1 = p.c1, &c2 = p.c2;

    Mat C;
    if (Kt.is_separable()) {
        C = Mat::Zero(c1.size(), c2.size());
        for (const auto& [a, b] : Kt.terms()) C += c1.coefficients(a) * c2.coefficients(b).transpose();
    } else {
        C = Kt.pair(c1.test_matrix(), c2.test_matrix());
    }
    C = p.f1.asDiagonal() * C * p.f2.asDiagonal();

    DecompositionResult res;
    res.L = L;
    res.w = w;
    res.gated = opt.gated;
    res.items1 = c1.size();
    res.items2 = c2.size();

    TripleIndex t1, t2;
    std::vector<std::array<int, 2>> pos;
    std::vector<double> val;
    auto accumulate = [&](const HaarForm& h) {
        for (const auto& e : h.entries()) {
            pos.push_back({t1(e.d1), t2(e.d2)});
            val.push_back(e.c);
        }
    };

    const double alpha = Kt.alpha;
    for (std::size_t A = 0; A < p.k1.keys.size(); ++A)
        for (std::size_t B = 0; B < p.k2.keys.size(); ++B) {
            const auto &ka = p.k1.keys[A], &kb = p.k2.keys[B];
            const auto &ma = p.k1.members[A], &mb = p.k2.members[B];
            const bool pa = ka.piece == Piece::Para, pb = kb.piece == Piece::Para;
            DecompositionTerm term;
            term.piece1 = ka.piece;
            term.piece2 = kb.piece;
            term.s = {ka.s, kb.s};
            term.u = {ka.u, kb.u};
            std::vector<ModelOperator> op;
            double weight = 0.0;
            if (!pa && !pb) {
                term.family = "shift";
                term.k = ka.k;
                term.v = kb.k;
                term.has_k = term.has_v = true;
                term.alpha_weight = alpha_k(ka.k, alpha) * alpha_k(kb.k, alpha);
                double m = 0.0;
                for (int i : ma)
                    for (int j : mb) m = std::max(m, std::fabs(C(i, j)) / (item_cap(c1.items()[i]) * item_cap(c2.items()[j])));
                if (m == 0.0) continue;
                ShiftOperator S(L, w, ka.k, kb.k, ka.u, kb.u, true);
                for (int i : ma)
                    for (int j : mb) {
                        if (C(i, j) == 0.0) continue;
                        const auto &a = c1.items()[i], &b = c2.items()[j];
                        S.add(ShiftEntry{a.K, b.K, a.cube, b.cube, a.eta, b.eta, C(i, j) / m});
                    }
                term.entries = S.entries().size();
                weight = m;
                op.emplace_back(std::move(S));
            } else if (pa != pb) {
                term.family = "partial";
                const int para_axis = pa ? 0 : 1;
                const auto& sk = pa ? kb : ka;
                const auto& sm = pa ? mb : ma;
                const auto& pm = pa ? ma : mb;
                const auto& sc = pa ? c2 : c1;
                const auto& pc = pa ? c1 : c2;
                (pa ? term.v : term.k) = sk.k;
                (pa ? term.has_v : term.has_k) = true;
                term.alpha_weight = alpha_k(sk.k, alpha);
                std::vector<PartialKey> keys;
                double m = 0.0;
                for (int j : sm) {
                    const auto& it = sc.items()[j];
                    Vec b = para_symbol(pc, pm, [&](int i) { return pa ? C(i, j) : C(j, i); });
                    PartialKey key{it.K, it.cube, it.eta, b};
                    m = std::max(m, bmo_carleson_axis(b, pc.lattice()) / PartialParaproduct::cap(key));
                    keys.push_back(std::move(key));
                }
                if (m == 0.0) continue;
                PartialParaproduct P(L, w, para_axis, sk.k, sk.u, pa ? ka.s : kb.s, true);
                for (auto& key : keys) {
                    key.b /= m;
                    P.add(std::move(key));
                }
                term.entries = P.keys().size();
                weight = m;
                op.emplace_back(std::move(P));
            } else {
                term.family = "full";
                FullParaproduct F = full_from(c1, c2, ma, mb, ka.s, kb.s, w, [&](int i, int j) { return C(i, j); });
                if (F.lambda().cwiseAbs().maxCoeff() == 0.0) continue;
                double m = F.normalize();
                if (m == 0.0) continue;
                term.entries = F.lambda().size();
                weight = m;
                op.emplace_back(std::move(F));
            }
            term.constant = weight / term.alpha_weight;
            bool dropped = opt.max_complexity >= 0 && term.max_complexity() > opt.max_complexity;
            if (!dropped) std::visit([&](const auto& o) { accumulate(o.lower().scaled(weight)); }, op.front());
            if (opt.keep_terms) term.op = std::move(op);
            res.terms.push_back(std::move(term));
        }

    Mat M = Mat::Zero(t1.t.size(), t2.t.size());
    for (std::size_t e = 0; e < pos.size(); ++e) M(pos[e][0], pos[e][1]) += val[e];
    Mat A1 = t1.columns(c1.dict()), A2 = t2.columns(c2.dict());
    Mat rec = (A1 * M * A2.transpose()) * std::pow(double(N), -6.0);
    Mat B1 = orthonormal_triple_basis(c1.dict()), B2 = orthonormal_triple_basis(c2.dict());
    Mat ref = Kt.pair(B1, B2);
    Mat diff = ref - B1.transpose() * rec * B2;
    res.reference = ref.norm();
    res.residual = res.reference > 0 ? diff.norm() / res.reference : diff.norm();
    if (opt.keep_reconstruction) res.reconstruction = std::move(rec);
    return res;
}

std::vector<ProfileEntry> coefficient_profile(const KernelTensor& Kt, const GridShift& w, const DecomposeOptions& opt) {
    if (!Kt.is_separable() || Kt.terms().size() != 1)
        throw std::invalid_argument("coefficient profile needs a rank-one separable kernel");
    const int L = Kt.L();
    check_resolution(L, opt);
    Prepared p = prepare(L, w, opt);
    Vec a = p.c1.coefficients(Kt.terms()[0].first).cwiseProduct(p.f1);
    Vec b = p.c2.coefficients(Kt.terms()[0].second).cwiseProduct(p.f2);
    const double alpha = Kt.alpha;

    // per class: max |coef| / cap for shift classes, Carleson norm of the symbol for para classes
    auto summarize = [&](const AxisCatalog& c, const Classes& k, const Vec& coef) {
        std::vector<double> out(k.keys.size(), 0.0);
        for (std::size_t A = 0; A < k.keys.size(); ++A) {
            if (k.keys[A].piece == Piece::Para) {
                Vec s = para_symbol(c, k.members[A], [&](int i) { return coef[i]; });
                out[A] = bmo_carleson_axis(s, c.lattice());
            } else {
                for (int i : k.members[A]) out[A] = std::max(out[A], std::fabs(coef[i]) / item_cap(c.items()[i]));
            }
        }
        return out;
    };
    auto s1 = summarize(p.c1, p.k1, a), s2 = summarize(p.c2, p.k2, b);

    std::vector<ProfileEntry> out;
    for (std::size_t A = 0; A < p.k1.keys.size(); ++A)
        for (std::size_t B = 0; B < p.k2.keys.size(); ++B) {
            const auto &ka = p.k1.keys[A], &kb = p.k2.keys[B];
            const bool pa = ka.piece == Piece::Para, pb = kb.piece == Piece::Para;
            ProfileEntry e;
            double m = s1[A] * s2[B];
            if (!pa && !pb) {
                e.family = "shift";
                e.max_complexity = std::max(*std::max_element(ka.k.begin(), ka.k.end()),
                                            *std::max_element(kb.k.begin(), kb.k.end()));
                e.constant = m / (alpha_k(ka.k, alpha) * alpha_k(kb.k, alpha));
            } else if (pa != pb) {
                e.family = "partial";
                const auto& sk = pa ? kb : ka;
                e.max_complexity = *std::max_element(sk.k.begin(), sk.k.end());
                e.constant = m / alpha_k(sk.k, alpha);
            } else {
                e.family = "full";
                FullParaproduct F = full_from(p.c1, p.c2, p.k1.members[A], p.k2.members[B], ka.s, kb.s, w,
                                              [&](int i, int j) { return a[i] * b[j]; });
                if (F.lambda().cwiseAbs().maxCoeff() == 0.0) continue;
                e.constant = F.normalize();
            }
            if (e.constant == 0.0) continue;
            out.push_back(e);
        }
    return out;
}

AveragedReport averaged_decompose(const KernelTensor& Kt, const DecomposeOptions& opt, std::size_t samples,
                                  std::uint64_t seed) {
    const int L = Kt.L();
    std::vector<GridShift> shifts;
    if (samples == 0) {
        shifts = all_shifts(L);
    } else {
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < samples; ++i) shifts.push_back(sample_shift(L, rng));
    }
    DecomposeOptions o = opt;
    o.keep_reconstruction = true;
    o.keep_terms = false;
    Mat mean = Mat::Zero(Kt.triple_size(), Kt.triple_size()), sq = mean;
    for (const auto& w : shifts) {
        Mat r = decompose(Kt, w, o).reconstruction;
        mean += r;
        sq += r.cwiseProduct(r);
    }
    const double n = double(shifts.size());
    mean /= n;
    Mat W = Kt.weights();
    AveragedReport rep;
    rep.samples = shifts.size();
    double ref = W.norm();
    rep.residual = (mean - W).norm() / (ref > 0 ? ref : 1.0);
    if (samples > 1) {
        Mat var = (sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0) * (n / (n - 1));
        rep.stderr_ = std::sqrt(var.sum() / n) / (ref > 0 ? ref : 1.0);
    }
    return rep;
}

Vec decompose_axis(const Vec& w, const AxisCatalog& cat, bool gated) {
    const auto& d = cat.dict();
    const int N = d.N(), D = d.size();
    Vec c = cat.coefficients(w);
    Vec g = gated ? cat.gates() : Vec::Ones(cat.size());
    Mat R = Mat::Zero(D, D * D);
    for (std::size_t i = 0; i < cat.size(); ++i) {
        const auto& it = cat.items()[i];
        R(it.d[2], it.d[0] * D + it.d[1]) += c[i] * it.afactor * g[i];
    }
    return dictionary_synthesis(R, d) / double(N * N * N);
}

AveragedReport averaged_decompose_axis(const Vec& w, int L, const GoodnessParams& gp, bool gated, std::size_t samples,
                                       std::uint64_t seed) {
    std::vector<std::uint32_t> codes;
    if (samples == 0) {
        for (std::uint32_t c = 0; c < (1u << L); ++c) codes.push_back(c);
    } else {
        std::mt19937_64 rng(seed);
        std::uniform_int_distribution<std::uint32_t> U(0, (1u << L) - 1);
        for (std::size_t i = 0; i < samples; ++i) codes.push_back(U(rng));
    }
    Vec mean = Vec::Zero(w.size()), sq = mean;
    for (auto code : codes) {
        AxisCatalog cat(AxisLattice(TorusGrid(L), AxisShift(L, code), 0), gp);
        Vec r = decompose_axis(w, cat, gated);
        mean += r;
        sq += r.cwiseProduct(r);
    }
    const double n = double(codes.size());
    mean /= n;
    AveragedReport rep;
    rep.samples = codes.size();
    double ref = w.norm();
    rep.residual = (mean - w).norm() / (ref > 0 ? ref : 1.0);
    if (samples > 1) {
        Vec var = (sq / n - mean.cwiseProduct(mean)).cwiseMax(0.0) * (n / (n - 1));
        rep.stderr_ = std::sqrt(var.sum() / n) / (ref > 0 ? ref : 1.0);
    }
    return rep;
}

}  // namespace dyad
