#include "dyad/field.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace dyad {

DiscreteFunction::DiscreteFunction(int L, double fill) : L_(L), v_(Mat::Constant(1 << L, 1 << L, fill)) {}

DiscreteFunction::DiscreteFunction(int L, Mat values) : L_(L), v_(std::move(values)) {
    if (v_.rows() != N() || v_.cols() != N()) throw std::invalid_argument("value array does not match 2^L x 2^L");
}

DiscreteFunction DiscreteFunction::tensor(const Vec& a, const Vec& b) {
    int L = 0;
    while ((1 << L) < a.size()) ++L;
    if (a.size() != b.size() || (1 << L) != a.size()) throw std::invalid_argument("tensor factors must have 2^L entries");
    return DiscreteFunction(L, a * b.transpose());
}

DiscreteFunction DiscreteFunction::random_normal(int L, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    DiscreteFunction f(L);
    for (int i = 0; i < f.N(); ++i)
        for (int j = 0; j < f.N(); ++j) f(i, j) = nd(rng);
    return f;
}

DiscreteFunction DiscreteFunction::from_function(int L, const std::function<double(double, double)>& g) {
    DiscreteFunction f(L);
    double h = 1.0 / f.N();
    for (int i = 0; i < f.N(); ++i)
        for (int j = 0; j < f.N(); ++j) f(i, j) = g((i + 0.5) * h, (j + 0.5) * h);
    return f;
}

double DiscreteFunction::average(const DyadicRectangle& R) const {
    double s = 0.0;
    for (int a = 0; a < R.I.len; ++a)
        for (int b = 0; b < R.J.len; ++b) s += v_((R.I.start + a) % N(), (R.J.start + b) % N());
    return s / (double(R.I.len) * R.J.len);
}

void DiscreteFunction::write(std::ostream& os) const {
    os << "# DiscreteFunction L=" << L_ << " N=" << N() << " layout=row-major\n";
    os << std::setprecision(17);
    for (int i = 0; i < N(); ++i) {
        for (int j = 0; j < N(); ++j) os << (j ? " " : "") << v_(i, j);
        os << "\n";
    }
}

DiscreteFunction DiscreteFunction::read(std::istream& is) {
    std::string line;
    std::getline(is, line);
    auto p = line.find("L=");
    if (line.rfind("# DiscreteFunction", 0) != 0 || p == std::string::npos)
        throw std::runtime_error("bad DiscreteFunction header");
    int L = std::stoi(line.substr(p + 2));
    DiscreteFunction f(L);
    for (int i = 0; i < f.N(); ++i)
        for (int j = 0; j < f.N(); ++j)
            if (!(is >> f(i, j))) throw std::runtime_error("truncated DiscreteFunction body");
    return f;
}

Vec cube_indicator(const DyadicCube& I, int N) {
    Vec v = Vec::Zero(N);
    for (int a = 0; a < I.len; ++a) v[(I.start + a) % N] = 1.0;
    return v;
}

DiscreteFunction rectangle_indicator(const DyadicRectangle& R, int L) {
    int N = 1 << L;
    return DiscreteFunction(L, cube_indicator(R.I, N) * cube_indicator(R.J, N).transpose());
}

}  // namespace dyad
