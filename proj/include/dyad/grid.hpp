#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dyad {

struct ResolutionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Dyadic torus [0,1) on one axis, cut into N = 2^L cells of side 2^-L.
// Positions and lengths below are measured in cell units.
struct TorusGrid {
    int L = 3;

    TorusGrid() = default;
    explicit TorusGrid(int level);
    int cells() const { return 1 << L; }
    double cell_width() const { return 1.0 / cells(); }
};

// Per-axis shift bits omega^1..omega^L. Level-j cubes are translated by
// sum_{i>j} 2^-i omega^i, so every shifted cube stays a union of cells.
class AxisShift {
public:
    AxisShift() = default;
    AxisShift(int L, std::uint32_t code);
    static AxisShift from_bits(const std::vector<int>& bits);

    int L() const { return L_; }
    std::uint32_t code() const { return code_; }
    int bit(int i) const { return (code_ >> (i - 1)) & 1u; }
    // offset of the level-j lattice in cells
    int offset(int level) const { return offsets_[level]; }

private:
    int L_ = 0;
    std::uint32_t code_ = 0;
    std::vector<int> offsets_;
};

struct GridShift {
    AxisShift axis[2];

    GridShift() = default;
    GridShift(int L, std::uint32_t c1, std::uint32_t c2) : axis{AxisShift(L, c1), AxisShift(L, c2)} {}
    int L() const { return axis[0].L(); }
    std::string id() const;
};

// A cube of a shifted one-axis lattice. (level, pos) is the lattice
// index; start/len locate the cube on the cell circle.
struct DyadicCube {
    int axis = 0;
    int level = 0;
    int pos = 0;
    int start = 0;
    int len = 1;

    double side() const;
    bool contains_cell(int c, int N) const { return ((c - start) % N + N) % N < len; }
    bool operator==(const DyadicCube& o) const {
        return axis == o.axis && level == o.level && start == o.start;
    }
};

struct DyadicRectangle {
    DyadicCube I, J;
    double measure() const { return I.side() * J.side(); }
};

class AxisLattice {
public:
    AxisLattice(TorusGrid g, AxisShift s, int axis = 0);

    int L() const { return grid_.L; }
    int N() const { return grid_.cells(); }
    const AxisShift& shift() const { return shift_; }
    int axis() const { return axis_; }

    DyadicCube cube(int level, int pos) const;
    DyadicCube cube_of_cell(int level, int cell) const;
    DyadicCube parent(const DyadicCube& I) const;
    DyadicCube ancestor(const DyadicCube& I, int k) const;
    DyadicCube left_child(const DyadicCube& I) const;
    DyadicCube right_child(const DyadicCube& I) const;
    bool is_ancestor_or_self(const DyadicCube& P, const DyadicCube& I) const;
    DyadicCube common_ancestor(const DyadicCube& a, const DyadicCube& b) const;
    std::vector<DyadicCube> level_cubes(int level) const;

private:
    TorusGrid grid_;
    AxisShift shift_;
    int axis_;
};

// Torus distance between closed cubes, in units of length.
double torus_distance(const DyadicCube& a, const DyadicCube& b, int N);
// Distance from a cube to the boundary of P (infinite when P is the torus).
double distance_to_boundary(const DyadicCube& I, const DyadicCube& P, int N);

struct GoodnessParams {
    int r = 2;
    double gamma = 1.0 / 6.0;
};

// gamma_n = alpha / (2 (2n + alpha))
double gamma_n(int n, double alpha);

bool is_good(const AxisLattice& lat, const DyadicCube& I, const GoodnessParams& gp);

// Fraction of shifts for which a level-j cube is good; enumerates all 2^L shifts.
double good_probability(int L, int level, const GoodnessParams& gp, int pos = 0);

GridShift sample_shift(int L, std::mt19937_64& rng);
std::vector<GridShift> all_shifts(int L);

struct Estimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    std::size_t samples = 0;
};

Estimate expectation_over_shifts(int L, const std::function<double(const GridShift&)>& estimator,
                                 std::size_t samples, std::uint64_t seed);
Estimate expectation_over_all_shifts(int L, const std::function<double(const GridShift&)>& estimator);

}  // namespace dyad
