#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ifs/linalg.hpp"

namespace ifs {

enum class Activation { kTanh, kRelu };

std::string activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// Fully connected classifier: layer_sizes = {input d, hidden..., output Y}.
// Parameters are stored layer by layer, weights (out x in, row-major) then
// bias. l2_penalty is bound to the spec so loss/grad/hvp all see the same
// regularized objective.
struct ModelSpec {
    std::vector<int> layer_sizes;
    Activation activation = Activation::kTanh;
    double l2_penalty = 0.0;

    int input_dim() const { return layer_sizes.front(); }
    int num_classes() const { return layer_sizes.back(); }
    int num_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
    int param_count() const;
    void validate() const;
};

struct Dataset {
    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;
    std::string split; // "train" or "test"

    std::size_t size() const { return inputs.size(); }
    int dim() const { return inputs.empty() ? 0 : static_cast<int>(inputs.front().size()); }
    void validate(int num_classes) const;
};

using ParameterVector = Vector;

struct TrainConfig {
    double learning_rate = 0.1;
    int epochs = 50;
    int batch_size = 32;
    std::uint64_t seed = 0;
};

struct TrainResult {
    ParameterVector params;
    double final_loss = 0.0;
    double train_accuracy = 0.0;
};

ParameterVector init_model(const ModelSpec& spec, std::uint64_t seed);

Vector forward(const ModelSpec& spec, const ParameterVector& theta,
               const std::vector<double>& x);

double loss(const ModelSpec& spec, const ParameterVector& theta,
            const std::vector<double>& x, int label);

double mean_loss(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds);

Vector grad(const ModelSpec& spec, const ParameterVector& theta,
            const std::vector<double>& x, int label);

// Mean gradient over the given dataset indices.
Vector mean_grad(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                 const std::vector<std::size_t>& indices);

// Exact mean Hessian-vector product over a batch, forward-over-reverse.
Vector hvp(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
           const std::vector<std::size_t>& batch, const Vector& v);

// Oracle path: assembles the p x p Hessian from hvp on basis vectors.
// Guarded to p <= 2000.
Matrix dense_hessian(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds,
                     const std::vector<std::size_t>& batch);

Vector penultimate_features(const ModelSpec& spec, const ParameterVector& theta,
                            const std::vector<double>& x);

Vector softmax_scores(const ModelSpec& spec, const ParameterVector& theta,
                      const std::vector<double>& x);

TrainResult train(const ModelSpec& spec, const Dataset& ds, const TrainConfig& cfg);

double dataset_accuracy(const ModelSpec& spec, const ParameterVector& theta, const Dataset& ds);

// Binary checkpoint: format-version byte, header (layer sizes, activation,
// l2_penalty), then parameter doubles, all little-endian.
void save_checkpoint(const std::string& path, const ModelSpec& spec, const ParameterVector& theta);
std::pair<ModelSpec, ParameterVector> load_checkpoint(const std::string& path);

// Analytic per-example activation workspace bytes for one dual-mode
// gradient pass; feeds the peak-memory accounting.
std::uint64_t activation_workspace_bytes(const ModelSpec& spec);

} // namespace ifs
