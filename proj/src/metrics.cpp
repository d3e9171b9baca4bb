#include "ifs/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ifs {

double self_loss(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                 const std::vector<std::size_t>& removed) {
    if (removed.empty()) throw std::invalid_argument("self_loss: empty removed set");
    double total = 0.0;
    for (std::size_t i : removed)
        total += loss(spec, theta, ds.inputs[i], ds.labels[i]);
    return total;
}

double exclusive_loss(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                      const std::vector<std::size_t>& retained) {
    if (retained.empty()) throw std::invalid_argument("exclusive_loss: empty retained set");
    double total = 0.0;
    for (std::size_t i : retained)
        total += loss(spec, theta, ds.inputs[i], ds.labels[i]);
    return total / static_cast<double>(retained.size());
}

double accuracy(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                const std::vector<std::size_t>& subset) {
    if (subset.empty()) throw std::invalid_argument("accuracy: empty subset");
    std::size_t correct = 0;
    for (std::size_t i : subset) {
        Vector logits = forward(spec, theta, ds.inputs[i]);
        std::size_t arg = 0;
        for (std::size_t j = 1; j < logits.size(); ++j)
            if (logits[j] > logits[arg]) arg = j;
        if (static_cast<int>(arg) == ds.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(subset.size());
}

double f1_unlearning(double exclusive_accuracy, double self_accuracy) {
    if (exclusive_accuracy < 0.0 || exclusive_accuracy > 1.0 ||
        self_accuracy < 0.0 || self_accuracy > 1.0)
        throw std::invalid_argument("f1_unlearning: EA and SA must be in [0, 1]");
    const double denom = 1.0 + exclusive_accuracy - self_accuracy;
    if (denom <= 0.0) return 0.0; // only EA = 0, SA = 1
    return 2.0 * exclusive_accuracy * (1.0 - self_accuracy) / denom;
}

double measure_rte(const std::vector<double>& wall_times_s) {
    if (wall_times_s.empty()) throw std::invalid_argument("measure_rte: empty telemetry");
    double total = 0.0;
    for (double t : wall_times_s) total += t;
    return total / static_cast<double>(wall_times_s.size());
}

std::uint64_t measure_me(const std::vector<std::uint64_t>& peak_bytes) {
    if (peak_bytes.empty()) throw std::invalid_argument("measure_me: empty telemetry");
    return *std::max_element(peak_bytes.begin(), peak_bytes.end());
}

namespace {

struct MeanSd {
    double mean = 0.0;
    double sd = 0.0;
};

template <class Get>
MeanSd mean_sd(const std::vector<MetricsReport>& reports, Get get) {
    const std::size_t n = reports.size();
    double mean = 0.0;
    for (const auto& r : reports) mean += get(r);
    mean /= static_cast<double>(n);
    MeanSd out{mean, 0.0};
    if (n >= 2) {
        double ss = 0.0;
        for (const auto& r : reports) {
            double d = get(r) - mean;
            ss += d * d;
        }
        out.sd = std::sqrt(ss / static_cast<double>(n - 1));
    }
    return out;
}

} // namespace

AggregateRow aggregate(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("aggregate: no reports");
    for (const auto& r : reports) {
        if (r.sampler != reports.front().sampler || r.sample_count != reports.front().sample_count)
            throw std::invalid_argument("aggregate: heterogeneous group (sampler or count differs)");
    }
    AggregateRow row;
    row.sampler = reports.front().sampler;
    row.sample_count = reports.front().sample_count;
    row.repetitions = static_cast<int>(reports.size());

    auto sl = mean_sd(reports, [](const MetricsReport& r) { return r.self_loss; });
    auto el = mean_sd(reports, [](const MetricsReport& r) { return r.exclusive_loss; });
    auto sa = mean_sd(reports, [](const MetricsReport& r) { return r.self_accuracy; });
    auto ea = mean_sd(reports, [](const MetricsReport& r) { return r.exclusive_accuracy; });
    auto f1 = mean_sd(reports, [](const MetricsReport& r) { return r.f1; });
    auto rte = mean_sd(reports, [](const MetricsReport& r) { return r.rte_s; });
    auto me = mean_sd(reports, [](const MetricsReport& r) { return static_cast<double>(r.me_bytes); });

    row.sl_mean = sl.mean; row.sl_sd = sl.sd;
    row.el_mean = el.mean; row.el_sd = el.sd;
    row.sa_mean = sa.mean; row.sa_sd = sa.sd;
    row.ea_mean = ea.mean; row.ea_sd = ea.sd;
    row.f1_mean = f1.mean; row.f1_sd = f1.sd;
    row.rte_mean = rte.mean; row.rte_sd = rte.sd;
    row.me_mean = me.mean; row.me_sd = me.sd;
    return row;
}

} // namespace ifs
