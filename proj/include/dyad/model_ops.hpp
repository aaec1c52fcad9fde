#pragma once

#include <array>
#include <random>
#include <string>
#include <vector>

#include "dyad/haar_form.hpp"
#include "dyad/measures.hpp"
#include "json.hpp"

namespace dyad {

struct ValidationError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// One-parameter paraproduct type, named by the slot carrying the cancellative h_V:
// slot 2 (output) is A_b, slot 0 is A_b^{1*}, slot 1 is A_b^{2*}.
const char* paraproduct_type_name(int slot);

// ---- shifts ----

struct ShiftEntry {
    DyadicCube K, V;
    std::array<DyadicCube, 3> I, J;
    std::array<int, 3> eta1, eta2;  // Haar signature per slot and axis
    double a;
};

// Per axis exactly one slot (u1 / u2) is non-cancellative. With allow_top a
// level-0 cube may also carry h^0 in the other slots (top-level convention).
class ShiftOperator {
public:
    ShiftOperator(int L, const GridShift& w, std::array<int, 3> k, std::array<int, 3> v, int u1, int u2,
                  bool allow_top = false);

    // (|I1||I2||I3|)^{1/2}/|K|^2 * (|J1||J2||J3|)^{1/2}/|V|^2
    static double cap(const ShiftEntry& e);
    // throws ValidationError on ancestor, signature or cap violations
    void add(const ShiftEntry& e);
    void validate() const;

    int L() const { return L_; }
    const GridShift& shift() const { return w_; }
    const std::array<int, 3>& k() const { return k_; }
    const std::array<int, 3>& v() const { return v_; }
    int u1() const { return u1_; }
    int u2() const { return u2_; }
    bool allow_top() const { return top_; }
    const std::vector<ShiftEntry>& entries() const { return e_; }
    std::vector<ShiftEntry>& mutable_entries() { return e_; }

    HaarForm lower() const;

    // every admissible key, coefficient = cap * random sign; density < 1 keeps a random subset
    static ShiftOperator random(int L, const GridShift& w, std::array<int, 3> k, std::array<int, 3> v, int u1, int u2,
                                std::mt19937_64& rng, double density = 1.0);

    nlohmann::json to_json() const;
    static ShiftOperator from_json(const nlohmann::json& j);

private:
    void check(const ShiftEntry& e) const;
    int L_;
    GridShift w_;
    std::array<int, 3> k_, v_;
    int u1_, u2_;
    bool top_;
    AxisLattice lat1_, lat2_;
    std::vector<ShiftEntry> e_;
};

// ---- partial paraproducts ----

struct PartialKey {
    DyadicCube K;
    std::array<DyadicCube, 3> I;
    std::array<int, 3> eta;
    Vec b;  // symbol: cell values on the paraproduct axis
};

// Shift structure of complexity k on axis `shift_axis`, one-parameter
// paraproduct of slot type `ptype` on the other axis.
class PartialParaproduct {
public:
    PartialParaproduct(int L, const GridShift& w, int para_axis, std::array<int, 3> k, int u, int ptype,
                       bool allow_top = false);

    static double cap(const PartialKey& key);
    void add(PartialKey key);
    void validate() const;

    int L() const { return L_; }
    const GridShift& shift() const { return w_; }
    int para_axis() const { return pa_; }
    int shift_axis() const { return 1 - pa_; }
    const std::array<int, 3>& k() const { return k_; }
    int u() const { return u_; }
    int ptype() const { return ptype_; }
    const std::vector<PartialKey>& keys() const { return keys_; }

    HaarForm lower() const;
    // brute-force evaluation: outer Haar pairings and the one-parameter paraproduct
    DiscreteFunction apply_direct(const DiscreteFunction& f1, const DiscreteFunction& f2) const;

    static PartialParaproduct random(int L, const GridShift& w, int para_axis, std::array<int, 3> k, int u, int ptype,
                                     std::mt19937_64& rng);

    nlohmann::json to_json() const;
    static PartialParaproduct from_json(const nlohmann::json& j);

private:
    void check(const PartialKey& key) const;
    int L_;
    GridShift w_;
    int pa_;
    std::array<int, 3> k_;
    int u_, ptype_;
    bool top_;
    AxisLattice slat_, plat_;
    std::vector<PartialKey> keys_;
};

// ---- full paraproducts ----

// Coefficients lambda_{K,V} on cancellative pairs; slot s1 (axis 1) and s2
// (axis 2) carry h_K and h_V, every other slot carries the averages.
class FullParaproduct {
public:
    FullParaproduct(int L, const GridShift& w, int s1, int s2);
    static FullParaproduct from_symbol(const DiscreteFunction& b, const GridShift& w, int s1, int s2);

    int L() const { return L_; }
    const GridShift& shift() const { return w_; }
    int s1() const { return s1_; }
    int s2() const { return s2_; }
    // rows: cancellative cubes of axis 1 in (level, pos) order; columns likewise for axis 2
    Mat& lambda() { return lam_; }
    const Mat& lambda() const { return lam_; }

    ProductBmoReport bmo_report() const;
    // divides lambda by the product-BMO lower bound; returns the factor
    double normalize();

    HaarForm lower() const;
    DiscreteFunction apply_direct(const DiscreteFunction& f1, const DiscreteFunction& f2) const;

    nlohmann::json to_json() const;
    static FullParaproduct from_json(const nlohmann::json& j);

private:
    int L_;
    GridShift w_;
    int s1_, s2_;
    Mat lam_;
};

// index of a cancellative cube among (level < L) cubes in (level, pos) order
inline int canc_index(const DyadicCube& c) { return (1 << c.level) - 1 + c.pos; }

// ---- one-parameter objects ----

// Sum_V <b,h_V> times averages / Haar pairings of g1, g2 over V, placed per slot type.
// ptype 2: A_b(g1,g2) = sum <b,h_V><g1>_V<g2>_V h_V; ptype 0 / 1 are the adjoints.
Vec one_param_paraproduct(const Vec& b, const Vec& g1, const Vec& g2, int ptype, const AxisLattice& lat);

struct SparseReport {
    std::vector<DyadicCube> family;
    double lhs = 0.0;        // |<A_b(g1,g2), g3>|
    double sparse_sum = 0.0; // sum_Q <|g1|>_Q <|g2|>_Q <|g3|>_Q |Q|
    double bmo = 0.0;        // dyadic BMO of b in the lattice
    double ratio = 0.0;      // lhs / (bmo * sparse_sum), 0 when the denominator vanishes
    double sparseness = 0.0; // min over Q of |E_Q| / |Q|
};

// Principal-cube stopping time: Q' is a child in the family of Q when it is maximal with
// sum_i <|g_i|>_{Q'} / <|g_i|>_Q > 2 * 3. This yields sparseness 1/2.
SparseReport sparse_dominate_paraproduct(const Vec& b, const Vec& g1, const Vec& g2, const Vec& g3,
                                         const AxisLattice& lat);

struct AbsFormReport {
    double abs_form = 0.0;
    double norms = 0.0;
    double ratio = 0.0;
};
// sum |c||<f1,.>||<f2,.>||<f3,.>| over the lowered entries against ||f1||_p ||f2||_q ||f3||_{r'}
AbsFormReport dmo_absolute_form_check(const HaarForm& U, const DiscreteFunction& f1, const DiscreteFunction& f2,
                                      const DiscreteFunction& f3, double p, double q, double r);

}  // namespace dyad
