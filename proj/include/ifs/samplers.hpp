#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ifs/linalg.hpp"
#include "ifs/model.hpp"

namespace ifs {

enum class SamplerId { kRandom, kExtTopK, kIntTopK, kExtDistance, kIntDistance, kLogit };

std::string sampler_name(SamplerId id);
SamplerId sampler_from_name(const std::string& name);

enum class FeatureSource { kIntrinsic, kExtrinsic, kRawInput };

struct FeatureMatrix {
    std::vector<std::vector<double>> rows;
    FeatureSource source = FeatureSource::kRawInput;

    std::size_t size() const { return rows.size(); }
    int dim() const { return rows.empty() ? 0 : static_cast<int>(rows.front().size()); }
    void validate() const;
};

struct KMeansResult {
    std::vector<std::vector<double>> centroids;
    std::vector<int> assignments;
    double inertia = 0.0;
    int iterations = 0;
};

// Indices into the training set plus provenance.
struct SampleSet {
    std::vector<std::size_t> indices;
    SamplerId sampler = SamplerId::kRandom;
    std::uint64_t seed = 0;
    int per_group = 0; // k, or the requested size for random
    int groups = 1;    // C for feature samplers, Y for logit
};

// Lloyd iterations from k-means++ seeding; empty clusters are re-seeded to
// the farthest point from its assigned centroid.
KMeansResult kmeans(const FeatureMatrix& feats, int centroids, int max_iter, double tol,
                    RngStream& rng);

SampleSet sample_random(std::size_t n, std::size_t size, RngStream& rng);

// k nearest points per k-means centroid; fully deterministic given the rng
// seed, ties break to the lowest dataset index.
SampleSet sample_topk(const FeatureMatrix& feats, int centroids, int k, RngStream& rng);

// Multinomial per centroid with weight 1 / (d - (d_min - eps)); draws are
// without replacement and cross-centroid duplicates are redrawn.
SampleSet sample_distance_weighted(const FeatureMatrix& feats, int centroids, int k,
                                   double eps, RngStream& rng);

// Raw distance-to-centroid weights for one centroid (unnormalized).
Vector distance_weights(const Vector& distances, double eps);

// Multinomial per class over softmax scores; k draws per class without
// replacement, cross-class duplicates redrawn.
SampleSet sample_logit(const std::vector<std::vector<double>>& scores, int k, RngStream& rng);

enum class FeatureMode { kIntrinsic, kExtrinsic, kRaw };

FeatureMode feature_mode_from_name(const std::string& name);
std::string feature_mode_name(FeatureMode mode);

// intrinsic -> penultimate activations per example; extrinsic -> rows loaded
// from feature_file; raw -> dataset inputs as-is.
FeatureMatrix extract_features(FeatureMode mode, const ModelSpec& spec,
                               const ParameterVector& theta, const Dataset& ds,
                               const std::string& feature_file = "");

// Feature file: header line "n f", then n whitespace-separated float rows.
void save_features(const std::string& path, const FeatureMatrix& feats);
FeatureMatrix load_features(const std::string& path);

} // namespace ifs
