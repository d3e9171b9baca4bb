#include "ifs/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ifs {

Matrix Matrix::identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
}

double Matrix::max_asymmetry() const {
    double worst = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = i + 1; j < cols; ++j)
            worst = std::max(worst, std::abs(at(i, j) - at(j, i)));
    return worst;
}

double dot(const Vector& a, const Vector& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("dot: length mismatch " + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()));
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

Vector axpy(double alpha, const Vector& x, const Vector& y) {
    if (x.size() != y.size())
        throw std::invalid_argument("axpy: length mismatch " + std::to_string(x.size()) +
                                    " vs " + std::to_string(y.size()));
    Vector out(y);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] += alpha * x[i];
    return out;
}

double norm2(const Vector& v) {
    return std::sqrt(dot(v, v));
}

Vector matvec(const Matrix& a, const Vector& x) {
    if (a.cols != x.size())
        throw std::invalid_argument("matvec: dimension mismatch");
    Vector out(a.rows, 0.0);
    for (std::size_t i = 0; i < a.rows; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols; ++j) s += a.at(i, j) * x[j];
        out[i] = s;
    }
    return out;
}

Vector solve_spd(const Matrix& a, const Vector& b, double damping) {
    if (a.rows != a.cols)
        throw std::invalid_argument("solve_spd: matrix not square");
    if (a.rows != b.size())
        throw std::invalid_argument("solve_spd: rhs length mismatch");
    if (damping < 0.0)
        throw std::invalid_argument("solve_spd: damping must be >= 0");

    const std::size_t n = a.rows;
    Matrix l(a);
    for (std::size_t i = 0; i < n; ++i) l.at(i, i) += damping;

    // in-place Cholesky, lower triangle
    for (std::size_t j = 0; j < n; ++j) {
        double d = l.at(j, j);
        for (std::size_t k = 0; k < j; ++k) d -= l.at(j, k) * l.at(j, k);
        if (d <= 0.0 || !std::isfinite(d))
            throw std::runtime_error("solve_spd: not positive definite after damping, pivot " +
                                     std::to_string(j));
        d = std::sqrt(d);
        l.at(j, j) = d;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = l.at(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= l.at(i, k) * l.at(j, k);
            l.at(i, j) = s / d;
        }
    }

    // forward then backward substitution
    Vector y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l.at(i, k) * y[k];
        y[i] = s / l.at(i, i);
    }
    Vector x(n, 0.0);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t k = ii + 1; k < n; ++k) s -= l.at(k, ii) * x[k];
        x[ii] = s / l.at(ii, ii);
    }
    return x;
}

std::vector<std::size_t> sample_multinomial(RngStream& rng, const Vector& weights,
                                            std::size_t k, bool replacement) {
    std::size_t positive = 0;
    for (double w : weights) {
        if (w < 0.0 || !std::isfinite(w))
            throw std::invalid_argument("sample_multinomial: weights must be finite and nonnegative");
        if (w > 0.0) ++positive;
    }
    if (positive == 0)
        throw std::invalid_argument("sample_multinomial: degenerate distribution, all weights zero");
    if (!replacement && k > positive)
        throw std::invalid_argument("sample_multinomial: k = " + std::to_string(k) +
                                    " exceeds " + std::to_string(positive) + " positive weights");

    Vector w(weights);
    std::vector<std::size_t> out;
    out.reserve(k);
    for (std::size_t draw = 0; draw < k; ++draw) {
        double total = 0.0;
        for (double wi : w) total += wi;
        double u = rng.uniform() * total;
        std::size_t pick = w.size();
        double acc = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            if (w[i] <= 0.0) continue;
            acc += w[i];
            if (u < acc) {
                pick = i;
                break;
            }
        }
        if (pick == w.size()) {
            // u landed on the accumulated rounding tail; take the last positive
            for (std::size_t i = w.size(); i-- > 0;) {
                if (w[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        }
        out.push_back(pick);
        if (!replacement) w[pick] = 0.0;
    }
    return out;
}

} // namespace ifs
