#include "dyad/haar_form.hpp"

#include <cmath>
#include <stdexcept>

namespace dyad {

void HaarForm::append(const HaarForm& o) {
    if (o.L_ != L_ || o.w_.id() != w_.id()) throw std::invalid_argument("forms live on different grids");
    e_.insert(e_.end(), o.e_.begin(), o.e_.end());
}

HaarForm HaarForm::scaled(double s) const {
    HaarForm r = *this;
    for (auto& e : r.e_) e.c *= s;
    return r;
}

double HaarForm::form_coeffs(const Mat& C1, const Mat& C2, const Mat& C3) const {
    double s = 0.0;
    for (const auto& e : e_) s += e.c * C1(e.d1[0], e.d2[0]) * C2(e.d1[1], e.d2[1]) * C3(e.d1[2], e.d2[2]);
    return s;
}

double HaarForm::abs_form_coeffs(const Mat& C1, const Mat& C2, const Mat& C3) const {
    double s = 0.0;
    for (const auto& e : e_)
        s += std::fabs(e.c * C1(e.d1[0], e.d2[0]) * C2(e.d1[1], e.d2[1]) * C3(e.d1[2], e.d2[2]));
    return s;
}

Mat HaarForm::apply_coeffs(const Mat& C1, const Mat& C2) const {
    Mat out = Mat::Zero(C1.rows(), C1.cols());
    for (const auto& e : e_) out(e.d1[2], e.d2[2]) += e.c * C1(e.d1[0], e.d2[0]) * C2(e.d1[1], e.d2[1]);
    return out;
}

double HaarForm::form(const DiscreteFunction& f1, const DiscreteFunction& f2, const DiscreteFunction& f3) const {
    ShiftedGrid g(L_, w_);
    return form_coeffs(g.coefficients(f1), g.coefficients(f2), g.coefficients(f3));
}

DiscreteFunction HaarForm::apply(const DiscreteFunction& f1, const DiscreteFunction& f2) const {
    ShiftedGrid g(L_, w_);
    return g.synthesize(apply_coeffs(g.coefficients(f1), g.coefficients(f2)));
}

HaarForm HaarForm::dual(int slot, int axes) const {
    if (slot != 0 && slot != 1) throw std::invalid_argument("dual slot must be 0 or 1");
    HaarForm r = *this;
    for (auto& e : r.e_) {
        if (axes & 1) std::swap(e.d1[slot], e.d1[2]);
        if (axes & 2) std::swap(e.d2[slot], e.d2[2]);
    }
    return r;
}

}  // namespace dyad
