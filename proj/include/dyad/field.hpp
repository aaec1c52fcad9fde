#pragma once

#include <Eigen/Dense>
#include <functional>
#include <iosfwd>
#include <random>

#include "dyad/grid.hpp"

namespace dyad {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Piecewise-constant field on the N x N product torus; rows index
// axis-1 cells, columns axis-2 cells.
class DiscreteFunction {
public:
    DiscreteFunction() = default;
    explicit DiscreteFunction(int L, double fill = 0.0);
    DiscreteFunction(int L, Mat values);

    static DiscreteFunction constant(int L, double c) { return DiscreteFunction(L, c); }
    static DiscreteFunction tensor(const Vec& a, const Vec& b);
    static DiscreteFunction random_normal(int L, std::mt19937_64& rng);
    static DiscreteFunction from_function(int L, const std::function<double(double, double)>& f);

    int L() const { return L_; }
    int N() const { return 1 << L_; }
    double cell_volume() const { return 1.0 / (double(N()) * N()); }
    Mat& values() { return v_; }
    const Mat& values() const { return v_; }
    double operator()(int i, int j) const { return v_(i, j); }
    double& operator()(int i, int j) { return v_(i, j); }

    double integral() const { return v_.sum() * cell_volume(); }
    double average(const DyadicRectangle& R) const;
    double pair(const DiscreteFunction& g) const { return (v_.array() * g.v_.array()).sum() * cell_volume(); }
    double l2_norm() const { return std::sqrt(pair(*this)); }

    DiscreteFunction operator+(const DiscreteFunction& o) const { return {L_, v_ + o.v_}; }
    DiscreteFunction operator-(const DiscreteFunction& o) const { return {L_, v_ - o.v_}; }
    DiscreteFunction operator*(const DiscreteFunction& o) const { return {L_, (v_.array() * o.v_.array()).matrix()}; }
    DiscreteFunction operator*(double s) const { return {L_, v_ * s}; }
    DiscreteFunction& operator+=(const DiscreteFunction& o) { v_ += o.v_; return *this; }
    DiscreteFunction& operator-=(const DiscreteFunction& o) { v_ -= o.v_; return *this; }

    void write(std::ostream& os) const;
    static DiscreteFunction read(std::istream& is);

private:
    int L_ = 0;
    Mat v_;
};

inline DiscreteFunction operator*(double s, const DiscreteFunction& f) { return f * s; }

// Indicator of a one-axis cube as a cell vector.
Vec cube_indicator(const DyadicCube& I, int N);
// Indicator of a rectangle on the product grid.
DiscreteFunction rectangle_indicator(const DyadicRectangle& R, int L);

}  // namespace dyad
