#pragma once

#include <iosfwd>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dyad/field.hpp"
#include "dyad/haar_form.hpp"

namespace dyad {

// One-axis trilinear kernel k[x,y,z] on N cells; x is the output cell.
// Flat index (x*N + y)*N + z, the same order as per-axis triple vectors.
struct AxisKernel {
    int L = 0;
    Vec v;

    AxisKernel() = default;
    explicit AxisKernel(int level) : L(level), v(Vec::Zero(std::size_t(1) << (3 * level))) {}
    int N() const { return 1 << L; }
    double operator()(int x, int y, int z) const { return v[(std::size_t(x) * N() + y) * N() + z]; }
    double& operator()(int x, int y, int z) { return v[(std::size_t(x) * N() + y) * N() + z]; }
};

// Per-axis triple vector of a product of slot functions: t[(x,y,z)] = f3(x) f1(y) f2(z).
Vec axis_triple(const Vec& f1, const Vec& f2, const Vec& f3);

// Bilinear Riesz-type kernel on the circle, component c in {0,1}:
// (x-y or x-z) / (|x-y|^2 + |x-z|^2)^{3/2} with periodic differences of cell centers;
// the full diagonal x = y = z is set to 0.
AxisKernel riesz_axis_kernel(int L, int component);

struct ProbeReport {
    double full = 0.0;            // max |Lambda| over the nine full-paraproduct pairings
    double partial[2] = {0, 0};   // per paraproduct axis: max over partial pairings
    double value() const;
};

// Discrete trilinear form
//   Lambda(f1,f2,f3) = sum K[x,y,z] f1(y) f2(z) f3(x) vol^3
// on the bi-parameter torus, x = (x1,x2) etc. Stored either densely as weights
// W[tau1, tau2] = K * vol^3 (tau_i = (x_i,y_i,z_i)) or as a sum of tensor
// products of per-axis kernels.
class KernelTensor {
public:
    KernelTensor() = default;
    explicit KernelTensor(int L);  // zero, dense

    static KernelTensor dense_values(int L, const Mat& K);  // raw K values, N^3 x N^3
    static KernelTensor dense_weights(int L, Mat W);
    static KernelTensor separable(int L, std::vector<std::pair<AxisKernel, AxisKernel>> terms);
    // iid standard normal K values
    static KernelTensor random(int L, std::mt19937_64& rng);
    // tensor product of the per-axis Riesz kernels with components (i1, i2)
    static KernelTensor riesz(int L, int i1, int i2);
    // Riesz tensor times (1 + cos(2 pi x_i) / 2) in each output variable; not
    // translation invariant, so its paraproduct symbols are nonzero
    static KernelTensor modulated_riesz(int L, int i1, int i2);
    // the form of a lowered model operator, densely
    static KernelTensor from_form(const HaarForm& h);

    int L() const { return L_; }
    int N() const { return 1 << L_; }
    int triple_size() const { return 1 << (3 * L_); }
    bool is_separable() const { return separable_; }
    const std::vector<std::pair<Vec, Vec>>& terms() const { return terms_; }  // per-axis weights

    // weights W (materialized for separable kernels)
    Mat weights() const;
    double eval(const DiscreteFunction& f1, const DiscreteFunction& f2, const DiscreteFunction& f3) const;
    // t1^T W t2 for per-axis triple vectors
    double pair(const Vec& t1, const Vec& t2) const;
    Mat pair(const Mat& U1, const Mat& U2) const;

    ProbeReport probe(const GridShift& w) const;

    // metadata of model kernels
    double alpha = 1.0;
    double size_constant = 1.0;
    std::string tag = "custom";

    // header line then the dense block of raw K values, row tau1, column tau2
    void write(std::ostream& os) const;
    static KernelTensor read(std::istream& is);

    KernelTensor operator+(const KernelTensor& o) const;
    KernelTensor scaled(double s) const;

private:
    int L_ = 0;
    bool separable_ = false;
    Mat W_;
    std::vector<std::pair<Vec, Vec>> terms_;
};

}  // namespace dyad
