#pragma once

#include <cstdint>
#include <vector>

#include "ifs/linalg.hpp"
#include "ifs/model.hpp"
#include "ifs/samplers.hpp"

namespace ifs {

struct LissaConfig {
    double delta = 1e-6;   // stop when ||I_{k+1} - I_k|| <= delta
    int max_iters = 5000;
    double damping = 0.01; // lambda, added to the sampled Hessian
    double scale = 0.0;    // sigma; 0 = auto (1.1 x power-iteration top eigenvalue)
    int batch_size = 0;    // examples per iteration drawn from S; 0 = full set

    void validate() const;
};

struct IhvpResult {
    Vector vector;
    int iterations = 0;
    bool converged = false;
    double residual = 0.0;
    double wall_time_s = 0.0;
    std::uint64_t peak_bytes = 0;
    std::vector<double> residual_history; // ||I_k - I_{k-1}|| per iteration
    // deterministic cost model: hvp example-evaluations x parameter count
    std::uint64_t cost_units = 0;

    // cost model expressed on a nominal 1 Gflop-equivalent scale; this is
    // the reproducible stand-in for wall time in serialized results
    double model_time_s() const { return static_cast<double>(cost_units) * 1e-9; }
};

struct RemovalConfig {
    double tau = 1.0; // update scale on top of the theoretical 1/n step
    int removed_class = 0;
    LissaConfig lissa;
    bool per_point = false; // one iHVP per removed example instead of one group solve

    void validate() const;
};

struct RemovalEdit {
    ParameterVector theta_edited;
    IhvpResult ihvp;
    bool sample_overlap_warning = false; // removed set intersected S
};

// (1/|S|) sum of Hessian-vector products over the sample set.
Vector mean_hvp(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                const std::vector<std::size_t>& sample, const Vector& v);

// Damped, scaled LiSSA iteration; converges to (H_S + lambda I)^{-1} v.
IhvpResult lissa_ihvp(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                      const std::vector<std::size_t>& sample, const Vector& v,
                      const LissaConfig& cfg, RngStream& rng);

// Exact small-p path: solve_spd over the dense sampled Hessian.
Vector direct_ihvp_oracle(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                          const std::vector<std::size_t>& sample, const Vector& v,
                          double damping);

// Influence vector I(z) = -(H_S + lambda I)^{-1} grad l(z).
IhvpResult influence_vector(const ModelSpec& spec, const ParameterVector& theta,
                            const Dataset& ds, const std::vector<std::size_t>& sample,
                            const std::vector<double>& x, int label, const LissaConfig& cfg,
                            RngStream& rng);

// theta' = theta + (tau/n) * (H_S + lambda I)^{-1} sum_{z in removed} grad l(z).
RemovalEdit class_removal_edit(const ModelSpec& spec, const ParameterVector& theta,
                               const Dataset& ds, const std::vector<std::size_t>& sample,
                               const std::vector<std::size_t>& removed,
                               const RemovalConfig& cfg, RngStream& rng);

// Power-iteration estimate of the top eigenvalue of (H_S + lambda I).
double estimate_top_eigenvalue(const ModelSpec& spec, const ParameterVector& theta,
                               const Dataset& ds, const std::vector<std::size_t>& sample,
                               double damping, int iterations = 30);

} // namespace ifs
