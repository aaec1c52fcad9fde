#include "dyad/haar.hpp"

#include <cmath>

namespace dyad {

Vec haar_evaluate(const HaarFunction& h, int L) {
    int N = 1 << L;
    if (h.cube.level > L) throw ResolutionError("Haar cube level exceeds resolution");
    if (h.eta != 0 && h.cube.level >= L) throw ResolutionError("cancellative Haar function needs children");
    Vec v = Vec::Zero(N);
    double a = 1.0 / std::sqrt(h.cube.side());
    for (int c = 0; c < h.cube.len; ++c) {
        double s = (h.eta == 0 || c < h.cube.len / 2) ? 1.0 : -1.0;
        v[(h.cube.start + c) % N] = a * s;
    }
    return v;
}

AxisDictionary::AxisDictionary(const AxisLattice& lat) : lat_(lat), L_(lat.L()), N_(lat.N()) {
    for (int l = 0; l <= L_; ++l)
        for (int p = 0; p < (1 << l); ++p) entries_.push_back({lat.cube(l, p), 0});
    for (int l = 0; l < L_; ++l)
        for (int p = 0; p < (1 << l); ++p) entries_.push_back({lat.cube(l, p), 1});
    W_.resize(N_, size());
    for (int d = 0; d < size(); ++d) W_.col(d) = haar_evaluate({entries_[d].cube, entries_[d].eta}, L_);
    A_ = W_.transpose() / double(N_);
    on_.push_back(h0(0, 0));
    for (int l = 0; l < L_; ++l)
        for (int p = 0; p < (1 << l); ++p) on_.push_back(h1(l, p));
    E_.resize(L_ + 1);
    for (int l = 0; l <= L_; ++l) {
        Mat E = Mat::Zero(N_, N_);
        for (int p = 0; p < (1 << l); ++p) {
            const auto& c = entries_[h0(l, p)].cube;
            for (int a = 0; a < c.len; ++a)
                for (int b = 0; b < c.len; ++b) E((c.start + a) % N_, (c.start + b) % N_) = 1.0 / c.len;
        }
        E_[l] = E;
    }
}

Mat AxisDictionary::orthonormal_basis() const {
    Mat B(N_, N_);
    for (int k = 0; k < N_; ++k) B.col(k) = W_.col(on_[k]);
    return B;
}

Mat AxisDictionary::difference_le(int level) const {
    Mat D = difference(level);
    if (level == 0) D += E_[0];
    return D;
}

ShiftedGrid::ShiftedGrid(int L, const GridShift& w)
    : L_(L),
      shift_(w),
      dict_{AxisDictionary(AxisLattice(TorusGrid(L), w.axis[0], 0)),
            AxisDictionary(AxisLattice(TorusGrid(L), w.axis[1], 1))} {}

Mat ShiftedGrid::coefficients(const DiscreteFunction& f) const {
    return dict_[0].analysis() * f.values() * dict_[1].analysis().transpose();
}

DiscreteFunction ShiftedGrid::synthesize(const Mat& C) const {
    return DiscreteFunction(L_, dict_[0].synthesis() * C * dict_[1].synthesis().transpose());
}

DiscreteFunction ShiftedGrid::apply(const Mat& P1, const Mat& P2, const DiscreteFunction& f) const {
    return DiscreteFunction(L_, P1 * f.values() * P2.transpose());
}

DiscreteFunction ShiftedGrid::apply_axis(int axis, const Mat& P, const DiscreteFunction& f) const {
    if (axis == 0) return DiscreteFunction(L_, P * f.values());
    return DiscreteFunction(L_, f.values() * P.transpose());
}

namespace {

Mat restricted_difference(const AxisLattice& lat, const DyadicCube& K, int depth) {
    int level = K.level + depth;
    if (level >= lat.L()) throw ResolutionError("martingale difference needs children within resolution");
    AxisDictionary d(lat);
    Vec ind = cube_indicator(K, lat.N());
    return ind.asDiagonal() * d.difference(level);
}

DiscreteFunction on_axis(const DiscreteFunction& f, int axis, const Mat& P) {
    if (axis == 0) return DiscreteFunction(f.L(), P * f.values());
    return DiscreteFunction(f.L(), f.values() * P.transpose());
}

}  // namespace

DiscreteFunction martingale_difference(const DiscreteFunction& f, const AxisLattice& lat, const DyadicCube& I) {
    return on_axis(f, lat.axis(), restricted_difference(lat, I, 0));
}

DiscreteFunction martingale_difference(const DiscreteFunction& f, const ShiftedGrid& g, const DyadicRectangle& R) {
    return g.apply(restricted_difference(g.lattice(0), R.I, 0), restricted_difference(g.lattice(1), R.J, 0), f);
}

DiscreteFunction martingale_block(const DiscreteFunction& f, const AxisLattice& lat, const DyadicCube& K, int i) {
    return on_axis(f, lat.axis(), restricted_difference(lat, K, i));
}

DiscreteFunction martingale_block(const DiscreteFunction& f, const ShiftedGrid& g, const DyadicRectangle& KV, int i,
                                  int j) {
    return g.apply(restricted_difference(g.lattice(0), KV.I, i), restricted_difference(g.lattice(1), KV.J, j), f);
}

DiscreteFunction truncated_projection(const DiscreteFunction& f, const ShiftedGrid& g, int j1, int j2) {
    if (j1 < 0 || j2 < 0 || j1 > g.L() || j2 > g.L()) throw ResolutionError("projection level exceeds resolution");
    return g.apply(g.dict(0).expectation(j1), g.dict(1).expectation(j2), f);
}

}  // namespace dyad
