#include "ifs/influence.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ifs {

void LissaConfig::validate() const {
    if (delta <= 0.0) throw std::invalid_argument("LissaConfig: delta must be > 0");
    if (max_iters < 1) throw std::invalid_argument("LissaConfig: max_iters must be >= 1");
    if (damping < 0.0) throw std::invalid_argument("LissaConfig: damping must be >= 0");
    if (scale < 0.0) throw std::invalid_argument("LissaConfig: scale must be >= 0");
    if (batch_size < 0) throw std::invalid_argument("LissaConfig: batch_size must be >= 0");
}

void RemovalConfig::validate() const {
    if (tau <= 0.0) throw std::invalid_argument("RemovalConfig: tau must be > 0");
    lissa.validate();
}

Vector mean_hvp(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                const std::vector<std::size_t>& sample, const Vector& v) {
    if (sample.empty()) throw std::invalid_argument("mean_hvp: empty sample set");
    return hvp(spec, theta, ds, sample, v);
}

double estimate_top_eigenvalue(const ModelSpec& spec, const ParameterVector& theta,
                               const Dataset& ds, const std::vector<std::size_t>& sample,
                               double damping, int iterations) {
    const std::size_t p = theta.size();
    // fixed deterministic start vector; p >= 1
    Vector u(p);
    RngStream rng(0x9E3779B97F4A7C15ULL, 0x70775F31ULL);
    for (double& x : u) x = rng.normal();
    double nu = norm2(u);
    for (double& x : u) x /= nu;

    double eig = damping;
    for (int it = 0; it < iterations; ++it) {
        Vector hu = mean_hvp(spec, theta, ds, sample, u);
        if (damping > 0.0) hu = axpy(damping, u, hu);
        double nrm = norm2(hu);
        if (nrm <= 1e-300) break;
        eig = std::abs(dot(u, hu));
        for (std::size_t i = 0; i < p; ++i) u[i] = hu[i] / nrm;
    }
    return eig;
}

IhvpResult lissa_ihvp(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                      const std::vector<std::size_t>& sample, const Vector& v,
                      const LissaConfig& cfg, RngStream& rng) {
    cfg.validate();
    if (sample.empty()) throw std::invalid_argument("lissa_ihvp: empty sample set");
    if (v.size() != theta.size()) throw std::invalid_argument("lissa_ihvp: v length mismatch");

    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t p = theta.size();

    double sigma = cfg.scale;
    std::uint64_t cost_units = 0;
    if (sigma <= 0.0) {
        const int power_iters = 30;
        sigma = 1.1 * estimate_top_eigenvalue(spec, theta, ds, sample, cfg.damping, power_iters);
        cost_units += static_cast<std::uint64_t>(power_iters) * sample.size() * p;
        if (sigma <= 0.0) sigma = 1.0;
    }

    const std::size_t per_iter = cfg.batch_size == 0
                                     ? sample.size()
                                     : static_cast<std::size_t>(cfg.batch_size);

    // iterate: I_k = v + I_{k-1} - (H_S + lambda I) I_{k-1} / sigma
    Vector prev(v);
    Vector cur(p, 0.0);
    IhvpResult result;
    result.peak_bytes = 4ull * sizeof(double) * p +
                        per_iter * activation_workspace_bytes(spec);

    for (int k = 1; k <= cfg.max_iters; ++k) {
        Vector hprev;
        if (cfg.batch_size == 0) {
            hprev = mean_hvp(spec, theta, ds, sample, prev);
        } else {
            std::vector<std::size_t> batch(per_iter);
            for (auto& b : batch) b = sample[rng.uniform_int(sample.size())];
            hprev = mean_hvp(spec, theta, ds, batch, prev);
        }
        cost_units += static_cast<std::uint64_t>(per_iter) * p;

        double residual_sq = 0.0;
        double cur_norm_sq = 0.0;
        for (std::size_t i = 0; i < p; ++i) {
            cur[i] = v[i] + prev[i] - (hprev[i] + cfg.damping * prev[i]) / sigma;
            double diff = cur[i] - prev[i];
            residual_sq += diff * diff;
            cur_norm_sq += cur[i] * cur[i];
        }
        result.iterations = k;
        result.residual = std::sqrt(residual_sq);
        result.residual_history.push_back(result.residual);

        if (std::sqrt(cur_norm_sq) > 1e12 || !std::isfinite(result.residual))
            throw std::runtime_error(
                "lissa_ihvp: iterate diverged at iteration " + std::to_string(k) +
                "; increase scale (sigma) or damping (lambda)");

        if (result.residual <= cfg.delta) {
            result.converged = true;
            break;
        }
        std::swap(prev, cur);
    }

    const Vector& final_iterate = result.converged ? cur : prev;
    result.vector.resize(p);
    for (std::size_t i = 0; i < p; ++i) result.vector[i] = final_iterate[i] / sigma;
    result.cost_units = cost_units;
    result.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return result;
}

Vector direct_ihvp_oracle(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                          const std::vector<std::size_t>& sample, const Vector& v,
                          double damping) {
    Matrix h = dense_hessian(spec, theta, ds, sample);
    return solve_spd(h, v, damping);
}

IhvpResult influence_vector(const ModelSpec& spec, const ParameterVector& theta,
                            const Dataset& ds, const std::vector<std::size_t>& sample,
                            const std::vector<double>& x, int label, const LissaConfig& cfg,
                            RngStream& rng) {
    Vector g = grad(spec, theta, x, label);
    IhvpResult result = lissa_ihvp(spec, theta, ds, sample, g, cfg, rng);
    for (double& val : result.vector) val = -val;
    return result;
}

RemovalEdit class_removal_edit(const ModelSpec& spec, const ParameterVector& theta,
                               const Dataset& ds, const std::vector<std::size_t>& sample,
                               const std::vector<std::size_t>& removed,
                               const RemovalConfig& cfg, RngStream& rng) {
    cfg.validate();
    if (removed.empty()) throw std::invalid_argument("class_removal_edit: removed set is empty");
    if (sample.empty()) throw std::invalid_argument("class_removal_edit: sample set is empty");

    RemovalEdit edit;
    for (std::size_t r : removed) {
        for (std::size_t s : sample) {
            if (r == s) {
                edit.sample_overlap_warning = true;
                break;
            }
        }
        if (edit.sample_overlap_warning) break;
    }

    const double n = static_cast<double>(ds.size());
    const std::size_t p = theta.size();

    if (cfg.per_point) {
        Vector step(p, 0.0);
        IhvpResult merged;
        bool all_converged = true;
        for (std::size_t r : removed) {
            Vector g = grad(spec, theta, ds.inputs[r], ds.labels[r]);
            IhvpResult one = lissa_ihvp(spec, theta, ds, sample, g, cfg.lissa, rng);
            for (std::size_t i = 0; i < p; ++i) step[i] += one.vector[i];
            merged.iterations += one.iterations;
            all_converged = all_converged && one.converged;
            merged.residual = std::max(merged.residual, one.residual);
            merged.wall_time_s += one.wall_time_s;
            merged.peak_bytes = std::max(merged.peak_bytes, one.peak_bytes);
            merged.cost_units += one.cost_units;
        }
        merged.converged = all_converged;
        merged.vector = step;
        edit.ihvp = std::move(merged);
    } else {
        Vector g(p, 0.0);
        for (std::size_t r : removed) {
            Vector gi = grad(spec, theta, ds.inputs[r], ds.labels[r]);
            for (std::size_t i = 0; i < p; ++i) g[i] += gi[i];
        }
        edit.ihvp = lissa_ihvp(spec, theta, ds, sample, g, cfg.lissa, rng);
    }

    edit.theta_edited = theta;
    const double step_scale = cfg.tau / n;
    for (std::size_t i = 0; i < p; ++i)
        edit.theta_edited[i] += step_scale * edit.ihvp.vector[i];
    return edit;
}

} // namespace ifs
