#pragma once

// Shared test-only helpers: independent oracles (finite differences, Newton
// minimization, chi-square) kept apart from the implementation they check.

#include <cmath>
#include <cstddef>
#include <vector>

#include "ifs/linalg.hpp"
#include "ifs/model.hpp"

namespace test_support {

inline double rel_err(const ifs::Vector& got, const ifs::Vector& want) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < got.size(); ++i) {
        num += (got[i] - want[i]) * (got[i] - want[i]);
        den += want[i] * want[i];
    }
    return std::sqrt(num) / (std::sqrt(den) + 1e-300);
}

inline double cosine(const ifs::Vector& a, const ifs::Vector& b) {
    return ifs::dot(a, b) / (ifs::norm2(a) * ifs::norm2(b) + 1e-300);
}

// central finite difference of the loss along coordinate j
inline double fd_grad_coord(const ifs::ModelSpec& spec, const ifs::ParameterVector& theta,
                            const std::vector<double>& x, int label, std::size_t j,
                            double h = 1e-5) {
    ifs::ParameterVector tp(theta), tm(theta);
    tp[j] += h;
    tm[j] -= h;
    return (ifs::loss(spec, tp, x, label) - ifs::loss(spec, tm, x, label)) / (2.0 * h);
}

// central finite difference of the mean gradient along direction v
inline ifs::Vector fd_hvp(const ifs::ModelSpec& spec, const ifs::ParameterVector& theta,
                          const ifs::Dataset& ds, const std::vector<std::size_t>& batch,
                          const ifs::Vector& v, double h = 1e-5) {
    ifs::ParameterVector tp = ifs::axpy(h, v, theta);
    ifs::ParameterVector tm = ifs::axpy(-h, v, theta);
    ifs::Vector gp = ifs::mean_grad(spec, tp, ds, batch);
    ifs::Vector gm = ifs::mean_grad(spec, tm, ds, batch);
    ifs::Vector out(theta.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (gp[i] - gm[i]) / (2.0 * h);
    return out;
}

// Newton's method to the strict empirical-risk minimizer; only valid for
// convex (no-hidden-layer) models.
inline ifs::ParameterVector newton_minimize(const ifs::ModelSpec& spec,
                                            const ifs::Dataset& ds,
                                            ifs::ParameterVector theta,
                                            double grad_tol = 1e-12, int max_iter = 100) {
    std::vector<std::size_t> idx(ds.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (int it = 0; it < max_iter; ++it) {
        ifs::Vector g = ifs::mean_grad(spec, theta, ds, idx);
        if (ifs::norm2(g) < grad_tol) break;
        ifs::Matrix h = ifs::dense_hessian(spec, theta, ds, idx);
        ifs::Vector step = ifs::solve_spd(h, g, 0.0);
        // backtracking keeps full Newton steps from overshooting early on
        double base = ifs::mean_loss(spec, theta, ds);
        double t = 1.0;
        ifs::ParameterVector cand = theta;
        for (int bt = 0; bt < 60; ++bt) {
            cand = ifs::axpy(-t, step, theta);
            if (ifs::mean_loss(spec, cand, ds) <= base) break;
            t *= 0.5;
        }
        theta = cand;
    }
    return theta;
}

// chi-square statistic for observed counts against expected probabilities
inline double chi_square(const std::vector<std::size_t>& counts,
                         const std::vector<double>& probs, std::size_t trials) {
    double stat = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        double expected = probs[i] * static_cast<double>(trials);
        double d = static_cast<double>(counts[i]) - expected;
        stat += d * d / expected;
    }
    return stat;
}

// builds a small labeled blob dataset directly (no harness dependency)
inline ifs::Dataset make_blobs(int classes, int per_class, int dim, double spread,
                               std::uint64_t seed) {
    ifs::Dataset ds;
    ds.split = "train";
    for (int c = 0; c < classes; ++c) {
        ifs::RngStream center_rng(seed, 100ull + c);
        std::vector<double> center(dim);
        for (double& v : center) v = 3.0 * center_rng.normal();
        ifs::RngStream point_rng(seed, 200ull + c);
        for (int i = 0; i < per_class; ++i) {
            std::vector<double> x(dim);
            for (int j = 0; j < dim; ++j) x[j] = center[j] + spread * point_rng.normal();
            ds.inputs.push_back(std::move(x));
            ds.labels.push_back(c);
        }
    }
    return ds;
}

inline std::vector<std::size_t> all_indices(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

} // namespace test_support
