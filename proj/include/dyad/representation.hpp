#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "dyad/kernel.hpp"
#include "dyad/model_ops.hpp"

namespace dyad {

// Per-axis bookkeeping of the constructive decomposition.
//
// Every slot function is expanded as sum_l Delta_l (with E_0 folded into level 0).
// For a triple of levels the slot with the largest (level, priority) is s, the
// next one t, and the sum over the remaining slot u collapses to E_{l_t + delta} f_u
// with delta = [prio(t) > prio(u)]. Priorities: output slot > f1 > f2.
// Items with I_s inside I_u inside I_t are rewritten with the complement / s_C
// test functions; the leftover telescopes into paraproduct items.

enum class Piece { Separated = 0, Diagonal = 1, Nested = 2, Para = 3 };
const char* piece_name(Piece p);

int slot_priority(int slot);

// linear combination of dictionary functions
using SlotCombination = std::vector<std::pair<int, double>>;

struct TestTerm {
    double c = 1.0;
    std::array<SlotCombination, 3> f;  // by slot
};

struct AxisItem {
    Piece piece = Piece::Separated;
    std::array<int, 3> role{-1, -1, -1};  // slots of s, t, u (para: role[0] only)
    std::array<DyadicCube, 3> cube;       // analysis cubes by slot
    std::array<int, 3> eta{};
    std::array<int, 3> d{};               // analysis dictionary indices by slot
    double afactor = 1.0;
    DyadicCube K;                         // minimal common ancestor
    std::array<int, 3> k{};               // complexities by slot
    DyadicCube winner;                    // I_s, the cube carrying the goodness gate
    std::vector<TestTerm> test;

    int u() const { return role[2]; }
};

class AxisCatalog {
public:
    AxisCatalog(const AxisLattice& lat, const GoodnessParams& gp = {});

    const AxisDictionary& dict() const { return dict_; }
    const AxisLattice& lattice() const { return dict_.lattice(); }
    const GoodnessParams& goodness() const { return gp_; }
    const std::vector<AxisItem>& items() const { return items_; }
    std::size_t size() const { return items_.size(); }

    // cell-space triple vectors (N^3 x n); analysis columns include afactor
    Vec test_vector(std::size_t i) const;
    Vec analysis_vector(std::size_t i) const;
    Mat test_matrix() const;
    Mat analysis_matrix() const;

    // 1 / pi(level of I_s) for good winners, 0 otherwise
    Vec gates() const;

    // lambda(test_i) for a per-axis weight vector w (sum w t over triple cells)
    Vec coefficients(const Vec& w) const;

private:
    AxisDictionary dict_;
    GoodnessParams gp_;
    std::vector<AxisItem> items_;
};

// Per-axis kernel weights in dictionary coordinates: entry (c, a*D + b) is
// sum w[x,y,z] psi_a(y) psi_b(z) psi_c(x).
Mat dictionary_transform(const Vec& w, const AxisDictionary& d);
// inverse direction: weights from dictionary-coordinate coefficients R(c, a*D + b)
Vec dictionary_synthesis(const Mat& R, const AxisDictionary& d);

// number of (s,t,u) orderings whose level ranges accept the slot levels; 1 for every input
int ordering_matches(const std::array<int, 3>& levels);

// ---- common ancestors ----

struct AncestorCheck {
    DyadicCube K;
    Piece piece = Piece::Separated;
    bool good = false;        // I3 good; the lemmas are asserted only then
    bool holds = true;
    double lhs = 0.0, rhs = 0.0;
};

// I3 the smallest cube, I2 the collapsed one, I1 the other.
// Separated: max(d(I3,I1), d(I3,I2)) >= 2^{-(r+1)(1-gamma)} l(I3)^gamma l(K)^{1-gamma}.
// Diagonal: l(K) <= 2^r l(I3).
AncestorCheck common_ancestor(const AxisLattice& lat, const DyadicCube& I1, const DyadicCube& I2, const DyadicCube& I3,
                              const GoodnessParams& gp);

// ---- bi-parameter decomposition ----

using ModelOperator = std::variant<ShiftOperator, PartialParaproduct, FullParaproduct>;

struct DecompositionTerm {
    std::string family;                   // shift | partial | full
    Piece piece1 = Piece::Separated, piece2 = Piece::Separated;
    std::array<int, 2> s{}, u{};          // per axis: slot of I_s (symmetry) and the non-cancellative slot
    std::array<int, 3> k{}, v{};
    bool has_k = false, has_v = false;
    double alpha_weight = 1.0;            // 2^{-alpha max k/2} 2^{-alpha max v/2}
    double constant = 0.0;                // extracted normalization constant
    std::size_t entries = 0;
    std::vector<ModelOperator> op;        // empty unless kept
    std::string tag() const;
    int max_complexity() const;
};

struct DecomposeOptions {
    GoodnessParams gp;
    bool gated = false;
    bool keep_terms = false;
    bool keep_reconstruction = false;
    int max_complexity = -1;  // < 0: no truncation
};

struct DecompositionResult {
    int L = 0;
    GridShift w;
    bool gated = false;
    std::size_t items1 = 0, items2 = 0;
    std::vector<DecompositionTerm> terms;
    double residual = 0.0;         // relative Frobenius error on all Haar test triples
    double reference = 0.0;        // Frobenius norm of Lambda on those triples
    Mat reconstruction;            // weights of the emitted forms when kept

    HaarForm total_form() const;   // needs kept terms
    nlohmann::json manifest() const;
    // manifest.json plus term_NNNN.json per kept operator
    void write(const std::filesystem::path& dir) const;
};

DecompositionResult decompose(const KernelTensor& K, const GridShift& w, const DecomposeOptions& opt = {});

// Per-family normalization constants for rank-one separable kernels without
// materializing the item pairs; same grouping and constants as decompose.
struct ProfileEntry {
    std::string family;
    int max_complexity = 0;
    double constant = 0.0;
};
std::vector<ProfileEntry> coefficient_profile(const KernelTensor& K, const GridShift& w, const DecomposeOptions& opt = {});

struct AveragedReport {
    std::size_t samples = 0;
    double residual = 0.0;   // relative error of the averaged reconstruction
    double stderr_ = 0.0;    // Frobenius norm of the per-entry standard error, relative (sampled mode)
};

// Full enumeration when samples == 0, otherwise `samples` random shifts.
AveragedReport averaged_decompose(const KernelTensor& K, const DecomposeOptions& opt, std::size_t samples = 0,
                                  std::uint64_t seed = 0);

// One-axis version: Lambda(f1,f2,f3) = sum w[x,y,z] f1(y) f2(z) f3(x).
// Returns reconstructed weights; gated mode multiplies by the goodness gates.
Vec decompose_axis(const Vec& w, const AxisCatalog& cat, bool gated);
// average of decompose_axis over every shift (samples == 0) or over random shifts
AveragedReport averaged_decompose_axis(const Vec& w, int L, const GoodnessParams& gp, bool gated,
                                       std::size_t samples = 0, std::uint64_t seed = 0);

}  // namespace dyad
