#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dyad/haar_form.hpp"
#include "dyad/measures.hpp"

namespace dyad {

// ---- product expansions ----

enum class ExpansionTag {
    A1, A2, A3, A4, A5, A6, A7, A8,
    a11, a12, a21, a22,  // a^i_j: axis i, kind j
    AvgDiff,             // <(<b>_{I,1} - <b>_{IxJ}) <f,h_I>_1>_J and its mirror
    Osc,                 // <(b - <b>_R) f>_R
    Mean                 // <b>_R <f, psi_R>
};
const char* tag_name(ExpansionTag t);

struct ExpansionTerm {
    ExpansionTag tag;
    double value;
    int slot = -1;  // slot the pairing came from (commutator bookkeeping)
};

struct ExpansionReport {
    double lhs = 0.0;  // <bf, psi_a (x) psi_b>
    std::vector<ExpansionTerm> terms;
    double sum() const;
    double error() const;  // |lhs - sum| / max(1, |lhs|)
};

// A_1..A_8 and a^i_j as functions on the product grid.
// Sums run over the cancellative cubes of each axis lattice.
DiscreteFunction paraproduct_aux(ExpansionTag kind, const DiscreteFunction& b, const DiscreteFunction& f,
                                 const ShiftedGrid& g);

// Caches every auxiliary paraproduct of (b, f) in one grid; pairings against
// dictionary products are then table lookups.
class ProductExpansion {
public:
    ProductExpansion(const DiscreteFunction& b, const DiscreteFunction& f, const ShiftedGrid& g);

    // expansion of <bf, psi_{d1} (x) psi_{d2}> chosen by the cancellation pattern:
    // h (x) h -> A_i + Mean; h (x) h^0 -> a^1_j + AvgDiff + Mean (mirror for h^0 (x) h);
    // h^0 (x) h^0 -> Osc + Mean
    ExpansionReport pairing(int d1, int d2) const;
    double mean(int d1, int d2) const;  // <b>_R on the support rectangle
    double base(int d1, int d2) const { return Cf_(d1, d2); }  // <f, psi>

    const ShiftedGrid& grid() const { return g_; }

private:
    ShiftedGrid g_;
    DiscreteFunction b_, f_;
    Mat Cf_, Cbf_;
    std::array<Mat, 8> CA_;
    std::array<std::array<Mat, 2>, 2> Ca_;
    RectangleSums bs_;
};

ExpansionReport expand_bipar(const DiscreteFunction& b, const DiscreteFunction& f, const DyadicCube& I0,
                             const DyadicCube& J0, const ShiftedGrid& g);
// h_{I0} (x) h^0_{J0} when axis == 0, h^0_{I0} (x) h_{J0} when axis == 1
ExpansionReport expand_onepar(const DiscreteFunction& b, const DiscreteFunction& f, const DyadicCube& I0,
                              const DyadicCube& J0, int axis, const ShiftedGrid& g);
ExpansionReport expand_none(const DiscreteFunction& b, const DiscreteFunction& f, const DyadicCube& I0,
                            const DyadicCube& J0, const ShiftedGrid& g);

// ---- adapted maximal functions ----

enum class AdaptedKind {
    Rectangles,  // sup over dyadic-length arc rectangles of <|b - <b>_R| |f|>_R
    Axis1,       // one-parameter M_{b(., x2)} applied to f(., x2)
    Axis2,
    Phi1,        // sum_I h_I (x) M_{<b>_{I,1}} <f, h_I>_1
    Phi2         // sum_J M_{<b>_{J,2}} <f, h_J>_2 (x) h_J
};

struct AdaptedMaximal {
    DiscreteFunction b;
    AdaptedKind kind = AdaptedKind::Rectangles;
    std::optional<GridShift> shift;  // needed by Phi1 / Phi2
};

// one-axis M_beta g over all dyadic-length arcs
Vec adapted_maximal_1d(const Vec& beta, const Vec& g);
DiscreteFunction adapted_maximal_apply(const AdaptedMaximal& A, const DiscreteFunction& f);

struct MaximalBoundReport {
    double worst_phi = 0.0;  // max of lhs - rhs over (I, J) for the Phi2 inequality (<= 0 expected)
    double worst_osc = 0.0;  // max of lhs / <M_b f>_R for the oscillation inequality
    std::size_t checked = 0;
};
// Both pointwise inequalities over every dyadic rectangle of the grid.
MaximalBoundReport maximal_bound_check(const DiscreteFunction& b, const DiscreteFunction& f, const GridShift& w);

struct AverageGrowthReport {
    double worst = 0.0;  // max |<b>_{QxR} - <b>_{IxJ}| / (max(i,j,q,r) ||b||_bmo)
    std::size_t checked = 0;
};
// exhaustive over K x V and descendants (I, Q of K; J, R of V); bmo taken in the same grid
AverageGrowthReport average_growth_check(const DiscreteFunction& b, const GridShift& w);

// ---- commutators ----

// [b,U]_slot(f1,f2) = b U(f1,f2) - U(.., b f_slot, ..), slot in {1, 2}
DiscreteFunction commutator_apply(const DiscreteFunction& b, const HaarForm& U, int slot, const DiscreteFunction& f1,
                                  const DiscreteFunction& f2);
double commutator_form(const DiscreteFunction& b, const HaarForm& U, int slot, const DiscreteFunction& f1,
                       const DiscreteFunction& f2, const DiscreteFunction& f3);
// [b2, [b1, U]_s1]_s2
DiscreteFunction iterated_commutator_apply(const DiscreteFunction& b2, const DiscreteFunction& b1, const HaarForm& U,
                                           std::array<int, 2> slots, const DiscreteFunction& f1,
                                           const DiscreteFunction& f2);
double iterated_commutator_form(const DiscreteFunction& b2, const DiscreteFunction& b1, const HaarForm& U,
                                std::array<int, 2> slots, const DiscreteFunction& f1, const DiscreteFunction& f2,
                                const DiscreteFunction& f3);

// Cancellation case of an entry seen from the pair (input slot, output slot), 1..7.
int commutator_case(const FormEntry& e, const ShiftedGrid& g, int slot);

struct CommutatorReport {
    double definition = 0.0;
    double decomposed = 0.0;
    std::map<std::string, double> parts;  // "out:A1", "in:a12", "mean", ...
    std::array<std::size_t, 8> cases{};   // entry counts per case 1..7
    double error() const;                 // relative gap between the two evaluations
};

// Definition route against the expansion route over all lowered entries.
CommutatorReport commutator_decompose(const DiscreteFunction& b, const HaarForm& U, int slot,
                                      const DiscreteFunction& f1, const DiscreteFunction& f2,
                                      const DiscreteFunction& f3);
// Inner commutator expanded first; every inner part gets the outer b2 commutator,
// the inner mean part is re-expanded as a commutator of the form with
// coefficients c (<b1>_{R3} - <b1>_{R_s1}).
CommutatorReport iterated_commutator_decompose(const DiscreteFunction& b2, const DiscreteFunction& b1,
                                               const HaarForm& U, std::array<int, 2> slots,
                                               const DiscreteFunction& f1, const DiscreteFunction& f2,
                                               const DiscreteFunction& f3);

// c_e (<b>_{R_out} - <b>_{R_slot}) per entry
HaarForm mean_difference_form(const DiscreteFunction& b, const HaarForm& U, int slot);

// ---- duality lemma ----

struct PreconditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DualityReport {
    double lhs = 0.0;        // sum |a_{R+w} b_R|
    double bmo = 0.0;        // product-BMO lower bound of {a_{R+w}} in the shifted grid
    double integral = 0.0;   // int_F (sum |b_R|^2 1_R / |R|)^{1/2}
    double ratio = 0.0;      // lhs / (bmo * integral); 0 when lhs = 0
};

// C: rectangles of the unshifted grid D_0 with |R n F| >= 0.99 |R|; a[i] is
// attached to C[i] + w, b[i] to C[i]. F is a 0/1 cell mask.
DualityReport duality_lemma_check(const Mat& F, const std::vector<DyadicRectangle>& C, const std::vector<double>& a,
                                  const std::vector<double>& b, const GridShift& w);
// one-parameter special case: K0 fixed on axis 1, C cubes of axis 2
DualityReport duality_lemma_check_1par(const Mat& F, const DyadicCube& K0, const std::vector<DyadicCube>& C,
                                       const std::vector<double>& a, const std::vector<double>& b,
                                       const GridShift& w);

// ---- weak-type machinery ----

struct OmegaFamily {
    std::vector<Mat> omega;        // 0/1 cell masks Omega_u, u = 0..U
    std::vector<Mat> enlarged;     // {M 1_Omega_u > c}
    std::vector<std::vector<DyadicRectangle>> hat;  // rectangles with |R n Omega_u| >= frac |R|
    std::vector<std::vector<DyadicRectangle>> fresh; // hat_u \ hat_{u-1}
    Mat E_prime;                   // E \ enlarged_0
};

// Omega_u = {F > C 2^{-u} |E|^{-1/r}}; the rectangle family is the unshifted dyadic grid.
OmegaFamily omega_family(const DiscreteFunction& F, const Mat& E, double r, double C, double c, int U,
                         double frac = 0.01);
// smallest C (bisection over [1, 2^20]) with |E'| >= 0.99 |E|
double omega_constant(const DiscreteFunction& F, const Mat& E, double r, double c);

// Phi_1(f) = E_w2 M^1 S~^2_w2(phi^2_{w2,b} f), Phi_2^l(f) = (sum_K E_w1 (M^1 Delta^1_{K+w1,l} phi^1_w1 f)^2)^{1/2}.
// The expectation runs over every shift of the relevant axis.
DiscreteFunction aux_phi1(const DiscreteFunction& b, const DiscreteFunction& f);
DiscreteFunction aux_phi2(const DiscreteFunction& f, int l);

}  // namespace dyad
