#pragma once

#include <array>
#include <vector>

#include "dyad/haar.hpp"

namespace dyad {

// Slots: 0 = f1, 1 = f2, 2 = f3 (the output slot).
// One term c <f1, psi_{d1[0]} (x) psi_{d2[0]}> <f2, ...> <f3, psi_{d1[2]} (x) psi_{d2[2]}>
// with psi taken from the per-axis dictionaries of the shifted grid.
struct FormEntry {
    std::array<int, 3> d1, d2;
    double c;
};

// Common lowered representation of every dyadic model operator.
class HaarForm {
public:
    HaarForm() = default;
    HaarForm(int L, const GridShift& w) : L_(L), w_(w) {}

    int L() const { return L_; }
    const GridShift& shift() const { return w_; }
    const std::vector<FormEntry>& entries() const { return e_; }
    std::size_t size() const { return e_.size(); }
    void add(const std::array<int, 3>& d1, const std::array<int, 3>& d2, double c) { e_.push_back({d1, d2, c}); }
    void append(const HaarForm& o);
    HaarForm scaled(double s) const;

    // Coefficient matrices come from ShiftedGrid::coefficients.
    double form_coeffs(const Mat& C1, const Mat& C2, const Mat& C3) const;
    double abs_form_coeffs(const Mat& C1, const Mat& C2, const Mat& C3) const;
    // Output coefficients in dictionary coordinates: sum c C1 C2 at (d1[2], d2[2]).
    Mat apply_coeffs(const Mat& C1, const Mat& C2) const;

    double form(const DiscreteFunction& f1, const DiscreteFunction& f2, const DiscreteFunction& f3) const;
    DiscreteFunction apply(const DiscreteFunction& f1, const DiscreteFunction& f2) const;

    // Transposition of `slot` (0 or 1) with the output slot on the chosen axes.
    // axes = 3: full dual; 1: axis 1 only; 2: axis 2 only.
    HaarForm dual(int slot, int axes = 3) const;

private:
    int L_ = 0;
    GridShift w_;
    std::vector<FormEntry> e_;
};

}  // namespace dyad
