#include "dyad/model_ops.hpp"

#include <cmath>
#include <functional>

namespace dyad {

using nlohmann::json;

const char* paraproduct_type_name(int slot) {
    switch (slot) {
        case 2: return "A_b";
        case 0: return "A_b^1*";
        case 1: return "A_b^2*";
    }
    throw std::invalid_argument("paraproduct slot must be 0, 1 or 2");
}

namespace {

constexpr double kCapSlack = 1 + 1e-12;

AxisLattice lattice_of(int L, const GridShift& w, int axis) { return AxisLattice(TorusGrid(L), w.axis[axis], axis); }

std::vector<DyadicCube> descendants(const AxisLattice& lat, const DyadicCube& K, int k) {
    std::vector<DyadicCube> out;
    for (const auto& c : lat.level_cubes(K.level + k))
        if (lat.is_ancestor_or_self(K, c)) out.push_back(c);
    return out;
}

// all triples (I_0, I_1, I_2) with I_i^{(k_i)} = K
template <class F>
void for_each_triple(const AxisLattice& lat, const DyadicCube& K, const std::array<int, 3>& k, F f) {
    auto a = descendants(lat, K, k[0]), b = descendants(lat, K, k[1]), c = descendants(lat, K, k[2]);
    for (const auto& x : a)
        for (const auto& y : b)
            for (const auto& z : c) f(std::array<DyadicCube, 3>{x, y, z});
}

// levels of K for which every slot fits: cancellative slots need children
std::vector<int> key_levels(int L, const std::array<int, 3>& k, int u) {
    std::vector<int> out;
    for (int l = 0; l <= L; ++l) {
        bool ok = true;
        for (int i = 0; i < 3; ++i) ok = ok && (l + k[i] <= (i == u ? L : L - 1));
        if (ok) out.push_back(l);
    }
    return out;
}

void check_signature(const std::array<DyadicCube, 3>& I, const std::array<int, 3>& eta, int u, bool top, int L,
                     const char* what) {
    for (int i = 0; i < 3; ++i) {
        if (i == u) {
            if (eta[i] != 0) throw ValidationError(std::string(what) + ": non-cancellative slot carries h^1");
        } else if (eta[i] == 0 && !(top && I[i].level == 0)) {
            throw ValidationError(std::string(what) + ": cancellative slot carries h^0");
        }
        if (eta[i] == 1 && I[i].level >= L) throw ValidationError(std::string(what) + ": h^1 below resolution");
    }
}

double triple_measure(const std::array<DyadicCube, 3>& I) { return I[0].side() * I[1].side() * I[2].side(); }

json cube_json(const DyadicCube& c) { return json::array({c.level, c.pos}); }
DyadicCube cube_from(const AxisLattice& lat, const json& j) { return lat.cube(j[0].get<int>(), j[1].get<int>()); }

json grid_json(int L, const GridShift& w) {
    return json{{"L", L}, {"shift", json::array({w.axis[0].code(), w.axis[1].code()})}};
}
GridShift grid_from(const json& j) {
    return GridShift(j["L"].get<int>(), j["shift"][0].get<std::uint32_t>(), j["shift"][1].get<std::uint32_t>());
}

double average_on(const Vec& g, const DyadicCube& V) {
    int N = static_cast<int>(g.size());
    double s = 0.0;
    for (int a = 0; a < V.len; ++a) s += g[(V.start + a) % N];
    return s / V.len;
}

double pair1(const Vec& g, const Vec& h) { return g.dot(h) / double(g.size()); }

}  // namespace

// ---------------- shifts ----------------

ShiftOperator::ShiftOperator(int L, const GridShift& w, std::array<int, 3> k, std::array<int, 3> v, int u1, int u2,
                             bool allow_top)
    : L_(L),
      w_(w),
      k_(k),
      v_(v),
      u1_(u1),
      u2_(u2),
      top_(allow_top),
      lat1_(lattice_of(L, w, 0)),
      lat2_(lattice_of(L, w, 1)) {
    if (u1 < 0 || u1 > 2 || u2 < 0 || u2 > 2) throw ValidationError("slot pattern out of range");
    for (int i = 0; i < 3; ++i)
        if (k[i] < 0 || v[i] < 0 || k[i] > L || v[i] > L) throw ResolutionError("complexity exceeds resolution");
}

double ShiftOperator::cap(const ShiftEntry& e) {
    return std::sqrt(triple_measure(e.I)) / (e.K.side() * e.K.side()) * std::sqrt(triple_measure(e.J)) /
           (e.V.side() * e.V.side());
}

void ShiftOperator::check(const ShiftEntry& e) const {
    for (int i = 0; i < 3; ++i) {
        if (e.I[i].level - e.K.level != k_[i] || !lat1_.is_ancestor_or_self(e.K, e.I[i]))
            throw ValidationError("shift key: I_i^(k_i) != K");
        if (e.J[i].level - e.V.level != v_[i] || !lat2_.is_ancestor_or_self(e.V, e.J[i]))
            throw ValidationError("shift key: J_j^(v_j) != V");
    }
    check_signature(e.I, e.eta1, u1_, top_, L_, "shift axis 1");
    check_signature(e.J, e.eta2, u2_, top_, L_, "shift axis 2");
    if (!(std::fabs(e.a) <= cap(e) * kCapSlack)) throw ValidationError("shift coefficient exceeds normalization cap");
}

void ShiftOperator::add(const ShiftEntry& e) {
    check(e);
    e_.push_back(e);
}

void ShiftOperator::validate() const {
    for (const auto& e : e_) check(e);
}

HaarForm ShiftOperator::lower() const {
    HaarForm h(L_, w_);
    AxisDictionary d1(lattice_of(L_, w_, 0)), d2(lattice_of(L_, w_, 1));
    for (const auto& e : e_) {
        std::array<int, 3> a, b;
        for (int i = 0; i < 3; ++i) {
            a[i] = d1.index_of(e.I[i], e.eta1[i]);
            b[i] = d2.index_of(e.J[i], e.eta2[i]);
        }
        h.add(a, b, e.a);
    }
    return h;
}

ShiftOperator ShiftOperator::random(int L, const GridShift& w, std::array<int, 3> k, std::array<int, 3> v, int u1,
                                    int u2, std::mt19937_64& rng, double density) {
    ShiftOperator S(L, w, k, v, u1, u2);
    auto l1 = lattice_of(L, w, 0), l2 = lattice_of(L, w, 1);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    std::array<int, 3> eta1{1, 1, 1}, eta2{1, 1, 1};
    eta1[u1] = 0;
    eta2[u2] = 0;
    for (int lk : key_levels(L, k, u1))
        for (const auto& K : l1.level_cubes(lk))
            for (int lv : key_levels(L, v, u2))
                for (const auto& V : l2.level_cubes(lv))
                    for_each_triple(l1, K, k, [&](const std::array<DyadicCube, 3>& I) {
                        for_each_triple(l2, V, v, [&](const std::array<DyadicCube, 3>& J) {
                            if (density < 1.0 && U(rng) >= density) return;
                            ShiftEntry e{K, V, I, J, eta1, eta2, 0.0};
                            e.a = cap(e) * (U(rng) < 0.5 ? -1.0 : 1.0);
                            S.e_.push_back(e);
                        });
                    });
    return S;
}

json ShiftOperator::to_json() const {
    json j = grid_json(L_, w_);
    j["family"] = "shift";
    j["k"] = k_;
    j["v"] = v_;
    j["pattern"] = json::array({u1_, u2_});
    j["allow_top"] = top_;
    json rec = json::array();
    for (const auto& e : e_) {
        json r;
        r["K"] = cube_json(e.K);
        r["V"] = cube_json(e.V);
        for (int i = 0; i < 3; ++i) {
            r["I"].push_back(json::array({e.I[i].level, e.I[i].pos, e.eta1[i]}));
            r["J"].push_back(json::array({e.J[i].level, e.J[i].pos, e.eta2[i]}));
        }
        r["a"] = e.a;
        rec.push_back(r);
    }
    j["records"] = rec;
    return j;
}

ShiftOperator ShiftOperator::from_json(const json& j) {
    if (j.at("family") != "shift") throw ValidationError("not a shift record");
    GridShift w = grid_from(j);
    int L = j["L"];
    ShiftOperator S(L, w, j["k"].get<std::array<int, 3>>(), j["v"].get<std::array<int, 3>>(), j["pattern"][0],
                    j["pattern"][1], j["allow_top"]);
    auto l1 = lattice_of(L, w, 0), l2 = lattice_of(L, w, 1);
    for (const auto& r : j["records"]) {
        ShiftEntry e;
        e.K = cube_from(l1, r["K"]);
        e.V = cube_from(l2, r["V"]);
        for (int i = 0; i < 3; ++i) {
            e.I[i] = cube_from(l1, r["I"][i]);
            e.J[i] = cube_from(l2, r["J"][i]);
            e.eta1[i] = r["I"][i][2];
            e.eta2[i] = r["J"][i][2];
        }
        e.a = r["a"];
        S.add(e);
    }
    return S;
}

// ---------------- partial paraproducts ----------------

PartialParaproduct::PartialParaproduct(int L, const GridShift& w, int para_axis, std::array<int, 3> k, int u,
                                       int ptype, bool allow_top)
    : L_(L),
      w_(w),
      pa_(para_axis),
      k_(k),
      u_(u),
      ptype_(ptype),
      top_(allow_top),
      slat_(lattice_of(L, w, 1 - (para_axis & 1))),
      plat_(lattice_of(L, w, para_axis & 1)) {
    if (para_axis != 0 && para_axis != 1) throw ValidationError("paraproduct axis must be 0 or 1");
    if (u < 0 || u > 2) throw ValidationError("slot pattern out of range");
    paraproduct_type_name(ptype);
    for (int i = 0; i < 3; ++i)
        if (k[i] < 0 || k[i] > L) throw ResolutionError("complexity exceeds resolution");
}

double PartialParaproduct::cap(const PartialKey& key) {
    return std::sqrt(triple_measure(key.I)) / (key.K.side() * key.K.side());
}

void PartialParaproduct::check(const PartialKey& key) const {
    for (int i = 0; i < 3; ++i)
        if (key.I[i].level - key.K.level != k_[i] || !slat_.is_ancestor_or_self(key.K, key.I[i]))
            throw ValidationError("partial paraproduct key: I_i^(k_i) != K");
    check_signature(key.I, key.eta, u_, top_, L_, "partial paraproduct");
    if (key.b.size() != (1 << L_)) throw ValidationError("symbol has wrong length");
    double bmo = bmo_carleson_axis(key.b, plat_);
    if (!(bmo <= cap(key) * kCapSlack)) throw ValidationError("partial paraproduct symbol exceeds BMO cap");
}

void PartialParaproduct::add(PartialKey key) {
    check(key);
    keys_.push_back(std::move(key));
}

void PartialParaproduct::validate() const {
    for (const auto& k : keys_) check(k);
}

HaarForm PartialParaproduct::lower() const {
    HaarForm h(L_, w_);
    AxisDictionary ds(lattice_of(L_, w_, shift_axis())), dp(lattice_of(L_, w_, pa_));
    for (const auto& key : keys_) {
        std::array<int, 3> sd;
        for (int i = 0; i < 3; ++i) sd[i] = ds.index_of(key.I[i], key.eta[i]);
        Vec beta = dp.analysis() * key.b;
        for (int l = 0; l < L_; ++l)
            for (int p = 0; p < (1 << l); ++p) {
                double bv = beta[dp.h1(l, p)];
                if (bv == 0.0) continue;
                std::array<int, 3> pd{dp.h0(l, p), dp.h0(l, p), dp.h0(l, p)};
                pd[ptype_] = dp.h1(l, p);
                double c = bv * double(1 << l);
                if (pa_ == 0)
                    h.add(pd, sd, c);
                else
                    h.add(sd, pd, c);
            }
    }
    return h;
}

DiscreteFunction PartialParaproduct::apply_direct(const DiscreteFunction& f1, const DiscreteFunction& f2) const {
    int N = 1 << L_;
    auto plat = lattice_of(L_, w_, pa_);
    Mat out = Mat::Zero(N, N);
    int sa = shift_axis();
    // <f, psi>_{shift axis} as a function on the paraproduct axis
    auto partial = [&](const DiscreteFunction& f, const Vec& psi) -> Vec {
        return sa == 0 ? Vec(f.values().transpose() * psi / double(N)) : Vec(f.values() * psi / double(N));
    };
    for (const auto& key : keys_) {
        Vec p1 = haar_evaluate({key.I[0], key.eta[0]}, L_), p2 = haar_evaluate({key.I[1], key.eta[1]}, L_),
            p3 = haar_evaluate({key.I[2], key.eta[2]}, L_);
        Vec g = one_param_paraproduct(key.b, partial(f1, p1), partial(f2, p2), ptype_, plat);
        out += sa == 0 ? Mat(p3 * g.transpose()) : Mat(g * p3.transpose());
    }
    return DiscreteFunction(L_, out);
}

PartialParaproduct PartialParaproduct::random(int L, const GridShift& w, int para_axis, std::array<int, 3> k, int u,
                                              int ptype, std::mt19937_64& rng) {
    PartialParaproduct P(L, w, para_axis, k, u, ptype);
    auto slat = lattice_of(L, w, 1 - para_axis), plat = lattice_of(L, w, para_axis);
    AxisDictionary dp(plat);
    std::normal_distribution<double> nd;
    std::array<int, 3> eta{1, 1, 1};
    eta[u] = 0;
    for (int lk : key_levels(L, k, u))
        for (const auto& K : slat.level_cubes(lk))
            for_each_triple(slat, K, k, [&](const std::array<DyadicCube, 3>& I) {
                Vec b = Vec::Zero(1 << L);
                for (int l = 0; l < L; ++l)
                    for (int p = 0; p < (1 << l); ++p) b += nd(rng) * dp.function(dp.h1(l, p));
                PartialKey key{K, I, eta, b};
                double n = bmo_carleson_axis(b, plat);
                key.b *= cap(key) / n;
                P.keys_.push_back(key);
            });
    return P;
}

json PartialParaproduct::to_json() const {
    json j = grid_json(L_, w_);
    j["family"] = "partial";
    j["para_axis"] = pa_;
    j["k"] = k_;
    j["pattern"] = u_;
    j["type"] = ptype_;
    j["allow_top"] = top_;
    json rec = json::array();
    for (const auto& key : keys_) {
        json r;
        r["K"] = cube_json(key.K);
        for (int i = 0; i < 3; ++i) r["I"].push_back(json::array({key.I[i].level, key.I[i].pos, key.eta[i]}));
        r["b"] = std::vector<double>(key.b.data(), key.b.data() + key.b.size());
        rec.push_back(r);
    }
    j["records"] = rec;
    return j;
}

PartialParaproduct PartialParaproduct::from_json(const json& j) {
    if (j.at("family") != "partial") throw ValidationError("not a partial paraproduct record");
    GridShift w = grid_from(j);
    int L = j["L"];
    PartialParaproduct P(L, w, j["para_axis"], j["k"].get<std::array<int, 3>>(), j["pattern"], j["type"],
                         j["allow_top"]);
    auto slat = lattice_of(L, w, P.shift_axis());
    for (const auto& r : j["records"]) {
        PartialKey key;
        key.K = cube_from(slat, r["K"]);
        for (int i = 0; i < 3; ++i) {
            key.I[i] = cube_from(slat, r["I"][i]);
            key.eta[i] = r["I"][i][2];
        }
        auto b = r["b"].get<std::vector<double>>();
        key.b = Eigen::Map<Vec>(b.data(), static_cast<Eigen::Index>(b.size()));
        P.add(key);
    }
    return P;
}

// ---------------- full paraproducts ----------------

FullParaproduct::FullParaproduct(int L, const GridShift& w, int s1, int s2)
    : L_(L), w_(w), s1_(s1), s2_(s2), lam_(Mat::Zero((1 << L) - 1, (1 << L) - 1)) {
    if (s1 < 0 || s1 > 2 || s2 < 0 || s2 > 2) throw ValidationError("slot variant out of range");
}

FullParaproduct FullParaproduct::from_symbol(const DiscreteFunction& b, const GridShift& w, int s1, int s2) {
    FullParaproduct P(b.L(), w, s1, s2);
    ShiftedGrid g(b.L(), w);
    Mat C = g.coefficients(b);
    int n = (1 << b.L()) - 1;
    for (int a = 0; a < n; ++a)
        for (int c = 0; c < n; ++c) P.lam_(a, c) = C(2 * g.N() - 1 + a, 2 * g.N() - 1 + c);
    return P;
}

ProductBmoReport FullParaproduct::bmo_report() const {
    ShiftedGrid g(L_, w_);
    std::vector<RectCoefficient> rc;
    for (int l1 = 0; l1 < L_; ++l1)
        for (const auto& K : g.lattice(0).level_cubes(l1))
            for (int l2 = 0; l2 < L_; ++l2)
                for (const auto& V : g.lattice(1).level_cubes(l2)) rc.push_back({{K, V}, lam_(canc_index(K), canc_index(V))});
    return product_bmo_lower_bound(rc, g);
}

double FullParaproduct::normalize() {
    double n = bmo_report().value;
    if (n > 0) lam_ /= n;
    return n;
}

HaarForm FullParaproduct::lower() const {
    HaarForm h(L_, w_);
    ShiftedGrid g(L_, w_);
    const auto &d1 = g.dict(0), &d2 = g.dict(1);
    for (int l1 = 0; l1 < L_; ++l1)
        for (int p1 = 0; p1 < (1 << l1); ++p1)
            for (int l2 = 0; l2 < L_; ++l2)
                for (int p2 = 0; p2 < (1 << l2); ++p2) {
                    double lam = lam_((1 << l1) - 1 + p1, (1 << l2) - 1 + p2);
                    if (lam == 0.0) continue;
                    std::array<int, 3> a{d1.h0(l1, p1), d1.h0(l1, p1), d1.h0(l1, p1)},
                        b{d2.h0(l2, p2), d2.h0(l2, p2), d2.h0(l2, p2)};
                    a[s1_] = d1.h1(l1, p1);
                    b[s2_] = d2.h1(l2, p2);
                    h.add(a, b, lam * double(1 << l1) * double(1 << l2));
                }
    return h;
}

DiscreteFunction FullParaproduct::apply_direct(const DiscreteFunction& f1, const DiscreteFunction& f2) const {
    ShiftedGrid g(L_, w_);
    int N = g.N();
    Mat out = Mat::Zero(N, N);
    for (int l1 = 0; l1 < L_; ++l1)
        for (const auto& K : g.lattice(0).level_cubes(l1))
            for (int l2 = 0; l2 < L_; ++l2)
                for (const auto& V : g.lattice(1).level_cubes(l2)) {
                    double lam = lam_(canc_index(K), canc_index(V));
                    if (lam == 0.0) continue;
                    Vec hK = haar_evaluate({K, 1}, L_), hV = haar_evaluate({V, 1}, L_);
                    Vec aK = cube_indicator(K, N) / K.side(), aV = cube_indicator(V, N) / V.side();
                    auto fn = [&](int slot) {
                        return DiscreteFunction::tensor(slot == s1_ ? hK : aK, slot == s2_ ? hV : aV);
                    };
                    double c = lam * f1.pair(fn(0)) * f2.pair(fn(1));
                    out += c * fn(2).values();
                }
    return DiscreteFunction(L_, out);
}

json FullParaproduct::to_json() const {
    json j = grid_json(L_, w_);
    j["family"] = "full";
    j["slots"] = json::array({s1_, s2_});
    json rec = json::array();
    for (int a = 0; a < lam_.rows(); ++a)
        for (int c = 0; c < lam_.cols(); ++c)
            if (lam_(a, c) != 0.0) rec.push_back(json::array({a, c, lam_(a, c)}));
    j["records"] = rec;
    return j;
}

FullParaproduct FullParaproduct::from_json(const json& j) {
    if (j.at("family") != "full") throw ValidationError("not a full paraproduct record");
    FullParaproduct P(j["L"], grid_from(j), j["slots"][0], j["slots"][1]);
    for (const auto& r : j["records"]) P.lam_(r[0].get<int>(), r[1].get<int>()) = r[2].get<double>();
    return P;
}

// ---------------- one-parameter objects ----------------

Vec one_param_paraproduct(const Vec& b, const Vec& g1, const Vec& g2, int ptype, const AxisLattice& lat) {
    int L = lat.L(), N = lat.N();
    paraproduct_type_name(ptype);
    Vec out = Vec::Zero(N);
    for (int l = 0; l < L; ++l)
        for (const auto& V : lat.level_cubes(l)) {
            Vec h = haar_evaluate({V, 1}, L);
            double beta = pair1(b, h);
            if (beta == 0.0) continue;
            Vec ind = cube_indicator(V, N);
            switch (ptype) {
                case 2: out += beta * average_on(g1, V) * average_on(g2, V) * h; break;
                case 0: out += beta * pair1(g1, h) * average_on(g2, V) * ind / V.side(); break;
                case 1: out += beta * average_on(g1, V) * pair1(g2, h) * ind / V.side(); break;
            }
        }
    return out;
}

SparseReport sparse_dominate_paraproduct(const Vec& b, const Vec& g1, const Vec& g2, const Vec& g3,
                                         const AxisLattice& lat) {
    SparseReport rep;
    Vec a[3] = {g1.cwiseAbs(), g2.cwiseAbs(), g3.cwiseAbs()};
    auto avgs = [&](const DyadicCube& Q) {
        return std::array<double, 3>{average_on(a[0], Q), average_on(a[1], Q), average_on(a[2], Q)};
    };
    int L = lat.L();
    rep.sparseness = 1.0;
    std::function<void(const DyadicCube&)> build = [&](const DyadicCube& Q) {
        rep.family.push_back(Q);
        auto base = avgs(Q);
        std::vector<DyadicCube> stop;
        std::function<void(const DyadicCube&)> scan = [&](const DyadicCube& P) {
            auto v = avgs(P);
            double s = 0.0;
            for (int i = 0; i < 3; ++i)
                if (base[i] > 0) s += v[i] / base[i];
            if (s > 6.0) {
                stop.push_back(P);
                return;
            }
            if (P.level < L) {
                scan(lat.left_child(P));
                scan(lat.right_child(P));
            }
        };
        if (Q.level < L) {
            scan(lat.left_child(Q));
            scan(lat.right_child(Q));
        }
        double covered = 0.0;
        for (const auto& P : stop) covered += P.side();
        rep.sparseness = std::min(rep.sparseness, 1.0 - covered / Q.side());
        for (const auto& P : stop) build(P);
    };
    build(lat.cube(0, 0));
    for (const auto& Q : rep.family) {
        auto v = avgs(Q);
        rep.sparse_sum += v[0] * v[1] * v[2] * Q.side();
    }
    rep.lhs = std::fabs(pair1(one_param_paraproduct(b, g1, g2, 2, lat), g3));
    rep.bmo = bmo_dyadic_axis(b, lat.shift());
    double den = rep.bmo * rep.sparse_sum;
    rep.ratio = den > 0 ? rep.lhs / den : 0.0;
    return rep;
}

AbsFormReport dmo_absolute_form_check(const HaarForm& U, const DiscreteFunction& f1, const DiscreteFunction& f2,
                                      const DiscreteFunction& f3, double p, double q, double r) {
    if (!(p > 1 && q > 1 && r > 1)) throw DomainError("absolute form check needs p, q > 1 and a finite r' (r > 1)");
    double rp = r / (r - 1.0);
    ShiftedGrid g(U.L(), U.shift());
    AbsFormReport rep;
    rep.abs_form = U.abs_form_coeffs(g.coefficients(f1), g.coefficients(f2), g.coefficients(f3));
    rep.norms = lp_norm(f1, p) * lp_norm(f2, q) * lp_norm(f3, rp);
    rep.ratio = rep.norms > 0 ? rep.abs_form / rep.norms : 0.0;
    return rep;
}

}  // namespace dyad
