#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "dyad/field.hpp"
#include "dyad/measures.hpp"

namespace dyad {

// Pure evaluator K(x, y, z) on cells; x = (x1, x2) is the output cell.
// Must be safe to call concurrently.
using KernelEvaluator = std::function<double(int x1, int x2, int y1, int y2, int z1, int z2)>;

struct BilinearBiparKernel {
    std::string name;
    int L = 0;
    KernelEvaluator K;
    double alpha = 1.0;  // declared Hoelder exponent
    double c_nd = 0.0;   // non-degeneracy constant, filled by nondegeneracy_profile
    int N() const { return 1 << L; }
};

struct UnknownKernel : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct ScaleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// tensor of the per-axis bilinear Riesz kernels; i, j in {1, 2}
// (1: x - y, 2: x - z on that axis)
BilinearBiparKernel riesz_kernel(int L, int i, int j);
// positive size kernel 1/((|x1-y1|+|x1-z1|)^2 (|x2-y2|+|x2-z2|)^2), 0 on the degenerate set
BilinearBiparKernel sign_kernel(int L);
// dense kernel file as written by KernelTensor::write
BilinearBiparKernel tensor_file_kernel(const std::string& path);

using KernelFactory = std::function<BilinearBiparKernel(int L)>;
void register_kernel(const std::string& name, KernelFactory f);
// "riesz11".."riesz22", "sign", "file:PATH", or a registered name
BilinearBiparKernel make_kernel(const std::string& spec, int L);
std::vector<std::string> kernel_names();

// sup |K| (|x1-y1|+|x1-z1|)^2 (|x2-y2|+|x2-z2|)^2 over random non-degenerate triples
double size_bound_constant(const BilinearBiparKernel& K, int samples, std::uint64_t seed);

// rectangle of cell arcs
struct CellRect {
    Arc a1, a2;
    int cells() const { return a1.len * a2.len; }
    double measure(int N) const { return double(a1.len) * a2.len / (double(N) * N); }
    bool contains(int x1, int x2, int N) const;
};

// torus distance between two arcs in units of the side length 1
double arc_distance(const Arc& a, const Arc& b, int N);

struct PartnerReport {
    CellRect Rt;
    int sigma = 1;
    double constant = 0.0;  // min over Rt x R x R of sigma K |R|^2
    std::size_t candidates = 0;
};
// Scans every admissible same-size arc rectangle; throws ScaleError when
// no rectangle is separated by C0 l on both axes or none has a positive bound.
PartnerReport find_nondegenerate_partner(const BilinearBiparKernel& K, const CellRect& R, double C0);

// best partner constant for square dyadic R of every level 1..L-1 (NaN when no room)
std::vector<double> nondegeneracy_profile(const BilinearBiparKernel& K, double C0);

// sup_i v_(i) (i vol)^{1/r} over the decreasingly sorted |values|
double weak_lr_norm(std::vector<double> values, double vol, double r);

// lower median of the cell values on R
double median(const DiscreteFunction& b, const CellRect& R);

struct GammaParams {
    int k = 1;
    double r = 1.0;
    int gamma1 = 1, gamma2 = 0;
    double C0 = 1.0;
};

struct GammaSearch {
    int max_len = 0;             // size cap in cells per axis (0: N/4)
    int random_subsets = 32;     // random A per rectangle, in addition to the sublevel/superlevel sets
    std::uint64_t seed = 0;
};

struct GammaReport {
    double value = 0.0;
    CellRect R{}, Rt{};
    std::vector<int> A;  // witness cells x1 * N + x2
    GammaParams params;
    std::size_t evaluated = 0;
};

// Gamma integrand x -> sum_{y,z in A} (b(x)-b(y))^g1 (b(x)-b(z))^g2 K(x,y,z) vol^2 on every cell
Mat gamma_integrand(const BilinearBiparKernel& K, const DiscreteFunction& b, const std::vector<int>& A, int g1, int g2);

GammaReport gamma_constant(const BilinearBiparKernel& K, const DiscreteFunction& b, const GammaParams& p,
                           const GammaSearch& s = {});

// the family of R used by the search: unshifted dyadic rectangles within the size cap
std::vector<CellRect> search_rectangles(int L, int max_len);

struct ChainRecord {
    CellRect R, Rt;
    double alpha = 0.0;     // median of b on Rt
    double c_nd = 0.0;      // partner constant
    double osc = 0.0;       // |R|^{-1} int_R |b - <b>_R|
    double bound = 0.0;     // certified upper bound for osc from the corrected chain and Gamma
    double literal = 0.0;   // worst lhs / rhs of the literal pointwise chain (both halves)
    double corrected = 0.0; // same with the factor (|S|/|R|)^{max(2-k,0)}
    double kernel_step = 0.0;  // worst (rhs c_nd) / (sigma K integral), <= 1 expected
    double weak_step = 0.0;    // worst lhs / (2^{1/r} Gamma / (c_nd f)) per half
    bool median_ok = true;
};

struct LowerBoundReport {
    GammaReport gamma;
    std::vector<ChainRecord> records;
    double bmo = 0.0;          // max osc over records
    double bmo_all = 0.0;      // sup over all cell-aligned rectangles (independent)
    double ratio = 0.0;        // bmo_all / Gamma^{1/k}; 0 when bmo_all = 0
    double literal_worst = 0.0, corrected_worst = 0.0, kernel_worst = 0.0, weak_worst = 0.0, bound_worst = 0.0;
    bool medians_ok = true;
};

LowerBoundReport bmo_lower_bound(const BilinearBiparKernel& K, const DiscreteFunction& b, const GammaParams& p,
                                 const GammaSearch& s = {});

// named test symbols sampled at cell centres: "step", "log", "tensor-step", "smooth", "log-point"
DiscreteFunction bmo_test_symbol(const std::string& name, int L);
std::vector<std::string> bmo_test_symbol_names();

}  // namespace dyad
