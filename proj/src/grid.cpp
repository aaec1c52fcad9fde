#include "dyad/grid.hpp"

#include <cmath>
#include <limits>

namespace dyad {

namespace {
int mod(int a, int n) { return ((a % n) + n) % n; }
}  // namespace

TorusGrid::TorusGrid(int level) : L(level) {
    if (level < 1 || level > 12) throw ResolutionError("grid level must be in [1,12]");
}

AxisShift::AxisShift(int L, std::uint32_t code) : L_(L), code_(code), offsets_(L + 1, 0) {
    if (L >= 32 || (code >> L) != 0) throw std::invalid_argument("shift code has bits above L");
    for (int j = 0; j <= L; ++j) {
        int off = 0;
        for (int i = j + 1; i <= L; ++i) off += bit(i) << (L - i);
        offsets_[j] = off;
    }
}

AxisShift AxisShift::from_bits(const std::vector<int>& bits) {
    std::uint32_t c = 0;
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) c |= 1u << i;
    return AxisShift(static_cast<int>(bits.size()), c);
}

std::string GridShift::id() const {
    return "w" + std::to_string(axis[0].code()) + "_" + std::to_string(axis[1].code());
}

double DyadicCube::side() const { return std::ldexp(1.0, -level); }

AxisLattice::AxisLattice(TorusGrid g, AxisShift s, int axis) : grid_(g), shift_(std::move(s)), axis_(axis) {
    if (shift_.L() != g.L) throw std::invalid_argument("shift and grid resolution differ");
}

DyadicCube AxisLattice::cube(int level, int pos) const {
    if (level < 0 || level > L()) throw ResolutionError("cube level exceeds resolution");
    int len = 1 << (L() - level);
    if (pos < 0 || pos >= (1 << level)) throw std::out_of_range("cube position");
    return DyadicCube{axis_, level, pos, mod(pos * len + shift_.offset(level), N()), len};
}

DyadicCube AxisLattice::cube_of_cell(int level, int cell) const {
    if (level < 0 || level > L()) throw ResolutionError("cube level exceeds resolution");
    int len = 1 << (L() - level);
    return cube(level, mod(cell - shift_.offset(level), N()) / len);
}

DyadicCube AxisLattice::parent(const DyadicCube& I) const {
    if (I.level == 0) throw std::out_of_range("top cube has no parent");
    return cube_of_cell(I.level - 1, I.start);
}

DyadicCube AxisLattice::ancestor(const DyadicCube& I, int k) const {
    if (k > I.level) throw std::out_of_range("ancestor above the top cube");
    return cube_of_cell(I.level - k, I.start);
}

DyadicCube AxisLattice::left_child(const DyadicCube& I) const {
    if (I.level >= L()) throw ResolutionError("cube at resolution has no children");
    return cube_of_cell(I.level + 1, I.start);
}

DyadicCube AxisLattice::right_child(const DyadicCube& I) const {
    if (I.level >= L()) throw ResolutionError("cube at resolution has no children");
    return cube_of_cell(I.level + 1, I.start + I.len / 2);
}

bool AxisLattice::is_ancestor_or_self(const DyadicCube& P, const DyadicCube& I) const {
    return P.level <= I.level && P.contains_cell(I.start, N());
}

DyadicCube AxisLattice::common_ancestor(const DyadicCube& a, const DyadicCube& b) const {
    DyadicCube x = a, y = b;
    while (x.level > y.level) x = parent(x);
    while (y.level > x.level) y = parent(y);
    while (!(x == y)) {
        x = parent(x);
        y = parent(y);
    }
    return x;
}

std::vector<DyadicCube> AxisLattice::level_cubes(int level) const {
    std::vector<DyadicCube> out;
    for (int p = 0; p < (1 << level); ++p) out.push_back(cube(level, p));
    return out;
}

double torus_distance(const DyadicCube& a, const DyadicCube& b, int N) {
    if (a.len + b.len >= N) return 0.0;
    int rel = mod(b.start - a.start, N);
    if (rel <= a.len) return 0.0;
    if (rel + b.len >= N) return 0.0;
    int g = std::min(rel - a.len, N - (rel + b.len));
    return static_cast<double>(g) / N;
}

double distance_to_boundary(const DyadicCube& I, const DyadicCube& P, int N) {
    if (P.len >= N) return std::numeric_limits<double>::infinity();
    double best = std::numeric_limits<double>::infinity();
    for (int q : {P.start, mod(P.start + P.len, N)}) {
        int rel = mod(q - I.start, N);
        int d = rel <= I.len ? 0 : std::min(rel - I.len, N - rel);
        best = std::min(best, static_cast<double>(d) / N);
    }
    return best;
}

double gamma_n(int n, double alpha) { return alpha / (2.0 * (2.0 * n + alpha)); }

bool is_good(const AxisLattice& lat, const DyadicCube& I, const GoodnessParams& gp) {
    double li = I.side();
    for (int lp = 1; lp <= I.level - gp.r; ++lp) {
        double lP = std::ldexp(1.0, -lp);
        double thr = std::pow(li, gp.gamma) * std::pow(lP, 1.0 - gp.gamma);
        for (const auto& P : lat.level_cubes(lp))
            if (distance_to_boundary(I, P, lat.N()) <= thr) return false;
    }
    return true;
}

double good_probability(int L, int level, const GoodnessParams& gp, int pos) {
    TorusGrid g(L);
    int good = 0;
    for (std::uint32_t c = 0; c < (1u << L); ++c) {
        AxisLattice lat(g, AxisShift(L, c));
        if (is_good(lat, lat.cube(level, pos), gp)) ++good;
    }
    return static_cast<double>(good) / (1u << L);
}

GridShift sample_shift(int L, std::mt19937_64& rng) {
    std::uniform_int_distribution<std::uint32_t> u(0, (1u << L) - 1);
    std::uint32_t a = u(rng);
    std::uint32_t b = u(rng);
    return GridShift(L, a, b);
}

std::vector<GridShift> all_shifts(int L) {
    std::vector<GridShift> out;
    for (std::uint32_t a = 0; a < (1u << L); ++a)
        for (std::uint32_t b = 0; b < (1u << L); ++b) out.emplace_back(L, a, b);
    return out;
}

namespace {
Estimate summarize(const std::vector<double>& v) {
    Estimate e;
    e.samples = v.size();
    if (v.empty()) return e;
    double s = 0.0;
    for (double x : v) s += x;
    e.mean = s / v.size();
    if (v.size() > 1) {
        double q = 0.0;
        for (double x : v) q += (x - e.mean) * (x - e.mean);
        e.stderr_ = std::sqrt(q / (v.size() - 1) / v.size());
    }
    return e;
}
}  // namespace

Estimate expectation_over_shifts(int L, const std::function<double(const GridShift&)>& estimator,
                                 std::size_t samples, std::uint64_t seed) {
    if (samples < 1) throw std::invalid_argument("sample_count must be >= 1");
    std::mt19937_64 rng(seed);
    std::vector<double> v;
    v.reserve(samples);
    for (std::size_t i = 0; i < samples; ++i) v.push_back(estimator(sample_shift(L, rng)));
    return summarize(v);
}

Estimate expectation_over_all_shifts(int L, const std::function<double(const GridShift&)>& estimator) {
    std::vector<double> v;
    for (const auto& w : all_shifts(L)) v.push_back(estimator(w));
    Estimate e = summarize(v);
    e.stderr_ = 0.0;  // exact enumeration
    return e;
}

}  // namespace dyad
