#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyad/field.hpp"
#include "dyad/haar.hpp"

namespace dyad {

struct DomainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Weight {
public:
    Weight() = default;
    explicit Weight(DiscreteFunction w, std::string id = "w");
    static Weight unit(int L) { return Weight(DiscreteFunction(L, 1.0), "one"); }
    // |x1 - c|^a1 |x2 - c|^a2 with torus distance, evaluated at cell centres
    static Weight power(int L, double a1, double a2, double c = 0.5);
    // t1^{1_[0,1/2)}(x1) * t2^{1_[0,1/2)}(x2)
    static Weight lacunary(int L, double t1, double t2);

    const DiscreteFunction& f() const { return w_; }
    const std::string& id() const { return id_; }
    int L() const { return w_.L(); }
    // w^{1-p'}
    Weight dual(double p) const;
    Weight pow(double e) const;
    Weight operator*(const Weight& o) const;

private:
    DiscreteFunction w_;
    std::string id_;
};

// Cell-aligned arc on one axis; a rectangle family is a list of arc pairs.
struct Arc {
    int start, len;
};

// Dyadic cubes of one shifted lattice, or (shift = nullopt) the union over
// all shifts, i.e. every cell-aligned arc of dyadic length.
std::vector<Arc> arc_family(int L, const std::optional<AxisShift>& shift);

// Circular 2-D prefix sums for O(1) rectangle sums.
class RectangleSums {
public:
    explicit RectangleSums(const Mat& v);
    double sum(const Arc& a, const Arc& b) const;
    double average(const Arc& a, const Arc& b) const { return sum(a, b) / (double(a.len) * b.len); }

private:
    int N_;
    Mat P_;
};

double ap_characteristic(const Weight& w, double p, const std::optional<GridShift>& shift = std::nullopt);
// sup over the other coordinate of the one-parameter characteristic along `axis`
double ap_characteristic_slices(const Weight& w, double p, int axis,
                                const std::optional<GridShift>& shift = std::nullopt);
double ainfty_characteristic(const Weight& w, const std::optional<GridShift>& shift = std::nullopt);
double ainfty_characteristic_slices(const Weight& w, int axis, const std::optional<GridShift>& shift = std::nullopt);

struct NormReport {
    std::string kind;
    std::string exponents;
    double value = 0.0;
    bool quasi = false;
    std::string grid_id;
    std::string weight_id;
    std::uint64_t seed = 0;

    static std::string csv_header() { return "kind,exponents,value,grid-id,weight-id,seed"; }
    std::string csv_row() const;
};

constexpr double kInf = std::numeric_limits<double>::infinity();

double lp_norm(const DiscreteFunction& f, double p, const Weight* w = nullptr);
NormReport lp_norm_report(const DiscreteFunction& f, double p, const Weight* w = nullptr, std::uint64_t seed = 0);
// || x1 -> || f(x1, .) ||_{L^p2(w2)} ||_{L^p1(w1)}; weights are per-axis cell vectors
double mixed_norm(const DiscreteFunction& f, double p1, double p2, const Vec* w1 = nullptr, const Vec* w2 = nullptr);

// ---- BMO family ----
double bmo_dyadic_axis(const Vec& b, const std::optional<AxisShift>& shift);
// sup over slices of the one-axis dyadic BMO along `axis`
double bmo_dyadic_slices(const DiscreteFunction& b, int axis, const std::optional<AxisShift>& shift);
// rectangle mean oscillation; nullopt = all shifts (all dyadic-length arcs)
double bmo_little(const DiscreteFunction& b, const std::optional<GridShift>& shift = std::nullopt);
// sup over ALL cell-aligned arc rectangles of the mean oscillation
double mean_oscillation_all_rectangles(const DiscreteFunction& b);
// Carleson form sup_V0 (|V0|^{-1} sum_{V in V0} |<b,h_V>|^2)^{1/2} in one lattice
double bmo_carleson_axis(const Vec& b, const AxisLattice& lat);

struct RectCoefficient {
    DyadicRectangle R;
    double a;
};

struct ProductBmoOptions {
    int omega_max = 2;   // unions of at most this many pool rectangles
    int pool_level = -1; // pool = dyadic rectangles with levels <= pool_level (default L-1)
};

struct ProductBmoReport {
    double single_rectangle = 0.0;
    double unions = 0.0;
    double level_sets = 0.0;
    double value = 0.0;  // certified lower bound on the product-BMO norm
    std::string family;
};

ProductBmoReport product_bmo_lower_bound(const std::vector<RectCoefficient>& coeffs, const ShiftedGrid& g,
                                         const ProductBmoOptions& opt = {});
std::vector<RectCoefficient> haar_rect_coefficients(const DiscreteFunction& b, const ShiftedGrid& g);
ProductBmoReport bmo_product(const DiscreteFunction& b, const ShiftedGrid& g, const ProductBmoOptions& opt = {});

// ---- maximal functions ----
enum class MaximalKind { Dyadic, Strong, Axis1, Axis2 };
// Dyadic needs a shift; Axis1/Axis2 are dyadic when a shift is given, all-arc otherwise.
DiscreteFunction maximal_function(const DiscreteFunction& f, MaximalKind kind,
                                  const std::optional<GridShift>& shift = std::nullopt);
DiscreteFunction maximal_function_s(const DiscreteFunction& f, double s, MaximalKind kind,
                                    const std::optional<GridShift>& shift = std::nullopt);
// one-axis strong maximal function of a cell vector (all dyadic-length arcs)
Vec maximal_1d(const Vec& g);
// || (sum_j (M f_j)^s)^{1/s} ||_p / || (sum_j |f_j|^s)^{1/s} ||_p
double fefferman_stein_ratio(const std::vector<DiscreteFunction>& fs, double p, double s, const Weight* w = nullptr);

// ---- square functions ----
enum class SquareKind { Biparameter, Axis1, Axis2, Phi1, Phi2 };
DiscreteFunction square_function(const DiscreteFunction& f, const ShiftedGrid& g, SquareKind kind);
// (sum_{K x V} (M Delta^{i,j}_{K x V} f)^2)^{1/2}
DiscreteFunction square_function_ij(const DiscreteFunction& f, const ShiftedGrid& g, int i, int j);
// (sum_K (M Delta^1_{K,i} f)^2)^{1/2}, or the axis-2 analogue
DiscreteFunction square_function_axis_i(const DiscreteFunction& f, const ShiftedGrid& g, int axis, int i);
// (E_w sum (M Delta^{i,j} U_w f)^2)^{1/2} over the given shifts
DiscreteFunction square_function_averaged(
    const DiscreteFunction& f, const std::vector<GridShift>& shifts, int i, int j,
    const std::function<DiscreteFunction(const ShiftedGrid&, const DiscreteFunction&)>& U);

struct LowerSquareReport {
    double ratio_axis1 = 0.0;  // ||f||^p_{L^p(v)} / int (S^1 f)^p v
    double ratio_axis2 = 0.0;
    double ratio_bipar = 0.0;
};
LowerSquareReport lower_sf_ainfty_check(const DiscreteFunction& f, const Weight& v, double p, const ShiftedGrid& g);

}  // namespace dyad
