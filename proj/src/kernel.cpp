#include "dyad/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

namespace dyad {

Vec axis_triple(const Vec& f1, const Vec& f2, const Vec& f3) {
    const Eigen::Index N = f1.size();
    Vec t(N * N * N);
    for (Eigen::Index x = 0; x < N; ++x)
        for (Eigen::Index y = 0; y < N; ++y) {
            double a = f3[x] * f1[y];
            for (Eigen::Index z = 0; z < N; ++z) t[(x * N + y) * N + z] = a * f2[z];
        }
    return t;
}

namespace {

double periodic_difference(int a, int b, int N) {
    int d = ((a - b) % N + N) % N;
    if (d >= N / 2 && N > 1) d -= N;
    return double(d) / N;
}

// ON triple basis: columns axis_triple(b_i, b_j, b_k) over the orthonormal Haar basis
Mat orthonormal_triples(const AxisDictionary& d) {
    Mat B = d.orthonormal_basis();
    int N = d.N();
    Mat T(N * N * N, N * N * N);
    int c = 0;
    for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j)
            for (int k = 0; k < N; ++k) T.col(c++) = axis_triple(B.col(i), B.col(j), B.col(k));
    return T;
}

// columns: slot `s` carries h1 of a cancellative cube, the other slots the constant 1
Mat para_triples(const AxisDictionary& d, int s) {
    int N = d.N();
    Vec one = Vec::Ones(N);
    Mat U(N * N * N, N - 1);
    for (int l = 0; l < d.L(); ++l)
        for (int p = 0; p < (1 << l); ++p) {
            Vec h = d.function(d.h1(l, p));
            U.col((1 << l) - 1 + p) = axis_triple(s == 0 ? h : one, s == 1 ? h : one, s == 2 ? h : one);
        }
    return U;
}

}  // namespace

AxisKernel riesz_axis_kernel(int L, int component) {
    if (component != 0 && component != 1) throw std::invalid_argument("Riesz component must be 0 or 1");
    AxisKernel k(L);
    int N = k.N();
    for (int x = 0; x < N; ++x)
        for (int y = 0; y < N; ++y)
            for (int z = 0; z < N; ++z) {
                if (x == y && x == z) continue;
                double a = periodic_difference(x, y, N), b = periodic_difference(x, z, N);
                double r2 = a * a + b * b;
                k(x, y, z) = (component == 0 ? a : b) / (r2 * std::sqrt(r2));
            }
    return k;
}

double ProbeReport::value() const { return std::max({full, partial[0], partial[1]}); }

KernelTensor::KernelTensor(int L) : L_(L), W_(Mat::Zero(1 << (3 * L), 1 << (3 * L))) {}

KernelTensor KernelTensor::dense_values(int L, const Mat& K) {
    double vol = std::pow(2.0, -6.0 * L);
    return dense_weights(L, K * vol);
}

KernelTensor KernelTensor::dense_weights(int L, Mat W) {
    KernelTensor t;
    t.L_ = L;
    if (W.rows() != (1 << (3 * L)) || W.cols() != (1 << (3 * L))) throw std::invalid_argument("kernel block has wrong size");
    t.W_ = std::move(W);
    return t;
}

KernelTensor KernelTensor::separable(int L, std::vector<std::pair<AxisKernel, AxisKernel>> terms) {
    KernelTensor t;
    t.L_ = L;
    t.separable_ = true;
    double vol = std::pow(2.0, -3.0 * L);
    for (auto& [a, b] : terms) {
        if (a.L != L || b.L != L) throw std::invalid_argument("axis kernel level mismatch");
        t.terms_.emplace_back(a.v * vol, b.v * vol);
    }
    return t;
}

KernelTensor KernelTensor::random(int L, std::mt19937_64& rng) {
    std::normal_distribution<double> nd;
    int n = 1 << (3 * L);
    Mat K(n, n);
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) K(i, j) = nd(rng);
    auto t = dense_values(L, K);
    t.tag = "random";
    return t;
}

KernelTensor KernelTensor::riesz(int L, int i1, int i2) {
    auto t = separable(L, {{riesz_axis_kernel(L, i1), riesz_axis_kernel(L, i2)}});
    t.alpha = 1.0;
    t.tag = "riesz" + std::to_string(i1) + std::to_string(i2);
    return t;
}

KernelTensor KernelTensor::modulated_riesz(int L, int i1, int i2) {
    auto modulate = [L](AxisKernel k) {
        int N = 1 << L;
        for (int x = 0; x < N; ++x) {
            double a = 1.0 + 0.5 * std::cos(2.0 * M_PI * (x + 0.5) / N);
            for (int y = 0; y < N; ++y)
                for (int z = 0; z < N; ++z) k(x, y, z) *= a;
        }
        return k;
    };
    auto t = separable(L, {{modulate(riesz_axis_kernel(L, i1)), modulate(riesz_axis_kernel(L, i2))}});
    t.alpha = 1.0;
    t.tag = "modulated" + std::to_string(i1) + std::to_string(i2);
    return t;
}

KernelTensor KernelTensor::from_form(const HaarForm& h) {
    int L = h.L(), N = 1 << L;
    ShiftedGrid g(L, h.shift());
    std::unordered_map<long long, int> id1, id2;
    std::vector<std::array<int, 3>> t1, t2;
    auto key = [](const std::array<int, 3>& d) { return (static_cast<long long>(d[0]) << 40) | (static_cast<long long>(d[1]) << 20) | d[2]; };
    auto index = [&](std::unordered_map<long long, int>& m, std::vector<std::array<int, 3>>& v, const std::array<int, 3>& d) {
        auto [it, fresh] = m.emplace(key(d), static_cast<int>(v.size()));
        if (fresh) v.push_back(d);
        return it->second;
    };
    std::vector<std::array<int, 2>> pos;
    for (const auto& e : h.entries()) pos.push_back({index(id1, t1, e.d1), index(id2, t2, e.d2)});
    Mat M = Mat::Zero(t1.size(), t2.size());
    for (std::size_t i = 0; i < pos.size(); ++i) M(pos[i][0], pos[i][1]) += h.entries()[i].c;
    auto cols = [&](const AxisDictionary& d, const std::vector<std::array<int, 3>>& ts) {
        Mat A(N * N * N, ts.size());
        for (std::size_t c = 0; c < ts.size(); ++c)
            A.col(c) = axis_triple(d.function(ts[c][0]), d.function(ts[c][1]), d.function(ts[c][2]));
        return A;
    };
    Mat A1 = cols(g.dict(0), t1), A2 = cols(g.dict(1), t2);
    return dense_weights(L, A1 * M * A2.transpose() * std::pow(2.0, -6.0 * L));
}

Mat KernelTensor::weights() const {
    if (!separable_) return W_;
    Mat W = Mat::Zero(triple_size(), triple_size());
    for (const auto& [a, b] : terms_) W += a * b.transpose();
    return W;
}

double KernelTensor::eval(const DiscreteFunction& f1, const DiscreteFunction& f2, const DiscreteFunction& f3) const {
    int N = this->N();
    double s = 0.0;
    Vec row(triple_size());
    for (int x = 0; x < N; ++x)
        for (int y = 0; y < N; ++y)
            for (int z = 0; z < N; ++z) {
                row = axis_triple(f1.values().row(y).transpose(), f2.values().row(z).transpose(),
                                  f3.values().row(x).transpose());
                int t1 = (x * N + y) * N + z;
                if (!separable_) {
                    s += W_.row(t1).dot(row);
                } else {
                    for (const auto& [a, b] : terms_) s += a[t1] * b.dot(row);
                }
            }
    return s;
}

double KernelTensor::pair(const Vec& t1, const Vec& t2) const {
    if (!separable_) return t1.dot(W_ * t2);
    double s = 0.0;
    for (const auto& [a, b] : terms_) s += a.dot(t1) * b.dot(t2);
    return s;
}

Mat KernelTensor::pair(const Mat& U1, const Mat& U2) const {
    if (!separable_) return U1.transpose() * (W_ * U2);
    Mat out = Mat::Zero(U1.cols(), U2.cols());
    for (const auto& [a, b] : terms_) out += (U1.transpose() * a) * (b.transpose() * U2);
    return out;
}

ProbeReport KernelTensor::probe(const GridShift& w) const {
    ShiftedGrid g(L_, w);
    ProbeReport r;
    std::array<Mat, 3> P1, P2;
    for (int s = 0; s < 3; ++s) {
        P1[s] = para_triples(g.dict(0), s);
        P2[s] = para_triples(g.dict(1), s);
    }
    Mat B1 = orthonormal_triples(g.dict(0)), B2 = orthonormal_triples(g.dict(1));
    for (int s1 = 0; s1 < 3; ++s1) {
        for (int s2 = 0; s2 < 3; ++s2) r.full = std::max(r.full, pair(P1[s1], P2[s2]).cwiseAbs().maxCoeff());
        r.partial[0] = std::max(r.partial[0], pair(P1[s1], B2).cwiseAbs().maxCoeff());
        r.partial[1] = std::max(r.partial[1], pair(B1, P2[s1]).cwiseAbs().maxCoeff());
    }
    return r;
}

void KernelTensor::write(std::ostream& os) const {
    int n = triple_size();
    os << "dyad-kernel L " << L_ << " rows " << n << " cols " << n << " alpha " << alpha << " size "
       << size_constant << " tag " << tag << "\n";
    Mat K = weights() * std::pow(2.0, 6.0 * L_);
    os.precision(17);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) os << (j ? " " : "") << K(i, j);
        os << "\n";
    }
}

KernelTensor KernelTensor::read(std::istream& is) {
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty kernel file");
    std::istringstream h(line);
    std::string magic, k;
    int L = -1, rows = 0, cols = 0;
    double alpha = 1.0, size = 1.0;
    std::string tag = "custom";
    h >> magic;
    if (magic != "dyad-kernel") throw std::runtime_error("not a kernel file");
    while (h >> k) {
        if (k == "L") h >> L;
        else if (k == "rows") h >> rows;
        else if (k == "cols") h >> cols;
        else if (k == "alpha") h >> alpha;
        else if (k == "size") h >> size;
        else if (k == "tag") h >> tag;
    }
    if (L < 0 || rows != (1 << (3 * L)) || cols != rows) throw std::runtime_error("kernel header has inconsistent dims");
    Mat K(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            if (!(is >> K(i, j))) throw std::runtime_error("kernel block truncated");
    auto t = dense_values(L, K);
    t.alpha = alpha;
    t.size_constant = size;
    t.tag = tag;
    return t;
}

KernelTensor KernelTensor::operator+(const KernelTensor& o) const {
    if (o.L_ != L_) throw std::invalid_argument("kernel level mismatch");
    if (separable_ && o.separable_) {
        KernelTensor t = *this;
        t.terms_.insert(t.terms_.end(), o.terms_.begin(), o.terms_.end());
        return t;
    }
    KernelTensor t = dense_weights(L_, weights() + o.weights());
    t.alpha = std::min(alpha, o.alpha);
    return t;
}

KernelTensor KernelTensor::scaled(double s) const {
    KernelTensor t = *this;
    t.W_ *= s;
    for (auto& ab : t.terms_) ab.first *= s;
    return t;
}

}  // namespace dyad
