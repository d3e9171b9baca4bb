#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ifs/influence.hpp"
#include "ifs/model.hpp"

namespace ifs {

// One trial's evaluation. RTE carries the deterministic cost-model seconds
// derived from iHVP telemetry; measured wall time lives in the telemetry and
// the run manifest.
struct MetricsReport {
    double self_loss = 0.0;       // SL, sum over removed points
    double exclusive_loss = 0.0;  // EL, mean over retained test points
    double self_accuracy = 0.0;   // SA
    double exclusive_accuracy = 0.0; // EA
    double f1 = 0.0;
    double rte_s = 0.0;
    std::uint64_t me_bytes = 0;
    std::uint64_t trial_seed = 0;
    std::string sampler;
    int sample_count = 0;
};

struct AggregateRow {
    std::string sampler;
    int sample_count = 0;
    int repetitions = 0;
    double sl_mean = 0.0, sl_sd = 0.0;
    double el_mean = 0.0, el_sd = 0.0;
    double sa_mean = 0.0, sa_sd = 0.0;
    double ea_mean = 0.0, ea_sd = 0.0;
    double f1_mean = 0.0, f1_sd = 0.0;
    double rte_mean = 0.0, rte_sd = 0.0;
    double me_mean = 0.0, me_sd = 0.0;
};

// Sum of losses over the removed set (a sum, not a mean).
double self_loss(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                 const std::vector<std::size_t>& removed);

// Mean loss over test examples of non-removed classes.
double exclusive_loss(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                      const std::vector<std::size_t>& retained);

// Fraction of argmax-correct predictions; ties break to the lowest class id.
double accuracy(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                const std::vector<std::size_t>& subset);

// F1 = 2 EA (1 - SA) / (1 + EA - SA), with 0/0 (EA = 0, SA = 1) defined as 0.
double f1_unlearning(double exclusive_accuracy, double self_accuracy);

// Mean wall time across the trial's influence computations.
double measure_rte(const std::vector<double>& wall_times_s);

// Max peak-bytes across the trial's influence computations.
std::uint64_t measure_me(const std::vector<std::uint64_t>& peak_bytes);

// Mean and sample SD (n-1) per metric over a homogeneous group of reports.
AggregateRow aggregate(const std::vector<MetricsReport>& reports);

} // namespace ifs
