#pragma once

#include <cstddef>
#include <vector>

#include "ifs/rng.hpp"

namespace ifs {

using Vector = std::vector<double>;

// Dense row-major matrix of doubles.
struct Matrix {
    std::vector<double> data;
    std::size_t rows = 0;
    std::size_t cols = 0;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : data(r * c, 0.0), rows(r), cols(c) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    static Matrix identity(std::size_t n);

    // max_{i,j} |A_ij - A_ji|
    double max_asymmetry() const;
};

double dot(const Vector& a, const Vector& b);

// alpha * x + y, inputs unmodified
Vector axpy(double alpha, const Vector& x, const Vector& y);

double norm2(const Vector& v);

// Matrix-vector product A * x.
Vector matvec(const Matrix& a, const Vector& x);

// Solves (A + damping*I) x = b by Cholesky factorization. A must be
// symmetric; throws if a pivot fails, naming its index.
Vector solve_spd(const Matrix& a, const Vector& b, double damping);

// Draws k indices proportional to the given nonnegative weights.
// Normalization is internal; without replacement the drawn weights are
// zeroed between draws so indices are distinct.
std::vector<std::size_t> sample_multinomial(RngStream& rng, const Vector& weights,
                                            std::size_t k, bool replacement);

} // namespace ifs
