#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ifs/influence.hpp"
#include "ifs/metrics.hpp"
#include "ifs/model.hpp"
#include "ifs/samplers.hpp"

namespace ifs {

struct SyntheticSpec {
    int classes = 4;
    int per_class = 200;
    int dim = 10;
    double spread = 1.0;
    std::uint64_t seed = 7;
};

struct DatasetConfig {
    std::string type = "synthetic"; // "synthetic" or "csv"
    std::string path;
    SyntheticSpec synthetic;
    double train_fraction = 0.8;
};

struct SamplerOptions {
    int centroids = 0; // 0 = one per class
    double eps = 0.05;
    FeatureMode feature_mode = FeatureMode::kIntrinsic;
    std::string feature_file;
};

struct ExperimentConfig {
    DatasetConfig dataset;
    ModelSpec model;
    TrainConfig train_cfg;
    std::string checkpoint; // when set, loaded instead of training
    int removed_class = 0;
    std::vector<SamplerId> samplers;
    std::vector<int> sample_counts;
    int repetitions = 25;
    std::uint64_t base_seed = 42;
    LissaConfig lissa;
    double tau = 1.0;
    bool per_point = false;
    SamplerOptions sampler_options;
    std::string output_dir = "out";
    int threads = 1;

    void validate() const;
};

// Strict JSON config: unknown keys are rejected, defaults are resolved.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& json_text);
std::string serialize_config(const ExperimentConfig& cfg);
std::string config_digest(const ExperimentConfig& cfg);

struct DatasetPair {
    Dataset train;
    Dataset test;
    int num_classes = 0;
};

// CSV (last column = integer label) or deterministic Gaussian blobs, split
// 80/20 (config fraction) by seeded shuffle.
DatasetPair load_dataset(const DatasetConfig& cfg);

struct TrialRow {
    MetricsReport report;
    int repetition = 0;
    std::string status = "ok"; // "ok" or the failure message
};

struct ResultTable {
    std::vector<TrialRow> trials; // baseline row first, then key order
    std::vector<AggregateRow> aggregates;
    std::string digest;
    double total_wall_s = 0.0;
    double mean_trial_wall_s = 0.0;
};

ResultTable run_experiment(const ExperimentConfig& cfg);

// Writes trials.csv, aggregate.csv, and manifest.json into dir.
void emit_results(const ResultTable& table, const ExperimentConfig& cfg, const std::string& dir);

// Per-trial stream derivation: (base seed, sampler, count, repetition).
// Deterministic samplers omit the repetition so the set is stable across
// repetitions.
std::uint64_t trial_stream_id(SamplerId sampler, int count, int repetition);

} // namespace ifs
