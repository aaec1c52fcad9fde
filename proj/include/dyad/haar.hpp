#pragma once

#include <vector>

#include "dyad/field.hpp"
#include "dyad/grid.hpp"

namespace dyad {

struct HaarFunction {
    DyadicCube cube;
    int eta = 1;  // 0: non-cancellative h^0 = |I|^{-1/2} 1_I
};

// Values of h on the N cells of its axis.
Vec haar_evaluate(const HaarFunction& h, int L);

// Per-axis dictionary: h^0 on every level 0..L and h^1 on levels 0..L-1.
// Dictionary indices are stable given L; the shift only moves supports.
class AxisDictionary {
public:
    explicit AxisDictionary(const AxisLattice& lat);

    struct Entry {
        DyadicCube cube;
        int eta;
    };

    int L() const { return L_; }
    int N() const { return N_; }
    int size() const { return static_cast<int>(entries_.size()); }
    const Entry& entry(int d) const { return entries_[d]; }
    bool cancellative(int d) const { return entries_[d].eta == 1; }
    int h0(int level, int pos) const { return (1 << level) - 1 + pos; }
    int h1(int level, int pos) const { return 2 * N_ - 1 + (1 << level) - 1 + pos; }
    int index_of(const DyadicCube& c, int eta) const { return eta ? h1(c.level, c.pos) : h0(c.level, c.pos); }

    // synthesis: column d holds the cell values of function d
    const Mat& synthesis() const { return W_; }
    // analysis: row d gives <f, psi_d> = sum_c f(c) psi_d(c) / N
    const Mat& analysis() const { return A_; }
    Vec function(int d) const { return W_.col(d); }

    // Orthonormal Haar basis: h^0 on the top cube followed by all h^1.
    const std::vector<int>& orthonormal_indices() const { return on_; }
    Mat orthonormal_basis() const;

    // Cell-space operators on this axis
    const Mat& expectation(int level) const { return E_[level]; }
    Mat difference(int level) const { return E_[level + 1] - E_[level]; }
    // Delta with the top convention: Delta_0 + E_0 on level 0
    Mat difference_le(int level) const;

    const AxisLattice& lattice() const { return lat_; }

private:
    AxisLattice lat_;
    int L_, N_;
    std::vector<Entry> entries_;
    std::vector<int> on_;
    Mat W_, A_;
    std::vector<Mat> E_;
};

// Both axes of one shifted product lattice with their dictionaries.
class ShiftedGrid {
public:
    ShiftedGrid(int L, const GridShift& w);
    int L() const { return L_; }
    int N() const { return 1 << L_; }
    const GridShift& shift() const { return shift_; }
    const AxisLattice& lattice(int axis) const { return dict_[axis].lattice(); }
    const AxisDictionary& dict(int axis) const { return dict_[axis]; }

    // <f, psi_a (x) psi_b> for every dictionary pair
    Mat coefficients(const DiscreteFunction& f) const;
    // sum_{a,b} C(a,b) psi_a (x) psi_b
    DiscreteFunction synthesize(const Mat& C) const;
    // apply cell-space operators per axis: P1 F P2^T
    DiscreteFunction apply(const Mat& P1, const Mat& P2, const DiscreteFunction& f) const;
    DiscreteFunction apply_axis(int axis, const Mat& P, const DiscreteFunction& f) const;

private:
    int L_;
    GridShift shift_;
    AxisDictionary dict_[2];
};

DiscreteFunction martingale_difference(const DiscreteFunction& f, const AxisLattice& lat, const DyadicCube& I);
DiscreteFunction martingale_difference(const DiscreteFunction& f, const ShiftedGrid& g, const DyadicRectangle& R);
DiscreteFunction martingale_block(const DiscreteFunction& f, const AxisLattice& lat, const DyadicCube& K, int i);
DiscreteFunction martingale_block(const DiscreteFunction& f, const ShiftedGrid& g, const DyadicRectangle& KV, int i,
                                  int j);
// E^1_{j1} E^2_{j2} f in the shifted grid
DiscreteFunction truncated_projection(const DiscreteFunction& f, const ShiftedGrid& g, int j1, int j2);

}  // namespace dyad
