#include "ifs/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace ifs {

namespace {

double sq_dist(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

void check_budget(std::size_t wanted, std::size_t n, const std::string& who) {
    if (wanted > n)
        throw std::invalid_argument(who + ": requested " + std::to_string(wanted) +
                                    " samples from " + std::to_string(n) + " points");
}

} // namespace

std::string sampler_name(SamplerId id) {
    switch (id) {
    case SamplerId::kRandom: return "random";
    case SamplerId::kExtTopK: return "ext_topk";
    case SamplerId::kIntTopK: return "int_topk";
    case SamplerId::kExtDistance: return "ext_distance";
    case SamplerId::kIntDistance: return "int_distance";
    case SamplerId::kLogit: return "logit";
    }
    throw std::logic_error("sampler_name: bad id");
}

SamplerId sampler_from_name(const std::string& name) {
    if (name == "random") return SamplerId::kRandom;
    if (name == "ext_topk") return SamplerId::kExtTopK;
    if (name == "int_topk") return SamplerId::kIntTopK;
    if (name == "ext_distance") return SamplerId::kExtDistance;
    if (name == "int_distance") return SamplerId::kIntDistance;
    if (name == "logit") return SamplerId::kLogit;
    throw std::invalid_argument("unknown sampler: " + name);
}

void FeatureMatrix::validate() const {
    if (rows.empty()) throw std::invalid_argument("FeatureMatrix: empty");
    const std::size_t f = rows.front().size();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != f)
            throw std::invalid_argument("FeatureMatrix: ragged row " + std::to_string(i));
        for (double v : rows[i])
            if (!std::isfinite(v))
                throw std::invalid_argument("FeatureMatrix: non-finite value in row " +
                                            std::to_string(i));
    }
}

KMeansResult kmeans(const FeatureMatrix& feats, int centroids, int max_iter, double tol,
                    RngStream& rng) {
    feats.validate();
    const std::size_t n = feats.size();
    if (centroids <= 0) throw std::invalid_argument("kmeans: C must be positive");
    if (static_cast<std::size_t>(centroids) > n)
        throw std::invalid_argument("kmeans: C = " + std::to_string(centroids) +
                                    " exceeds n = " + std::to_string(n));
    if (max_iter < 1) throw std::invalid_argument("kmeans: max_iter must be >= 1");

    KMeansResult result;
    result.centroids.reserve(centroids);

    // k-means++ seeding
    result.centroids.push_back(feats.rows[rng.uniform_int(n)]);
    Vector d2(n, std::numeric_limits<double>::max());
    while (result.centroids.size() < static_cast<std::size_t>(centroids)) {
        const auto& last = result.centroids.back();
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], sq_dist(feats.rows[i], last));
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t pick;
        if (total <= 0.0) {
            pick = rng.uniform_int(n); // all points coincide with a centroid
        } else {
            pick = sample_multinomial(rng, d2, 1, true).front();
        }
        result.centroids.push_back(feats.rows[pick]);
    }

    result.assignments.assign(n, 0);
    const int f = feats.dim();
    for (int iter = 0; iter < max_iter; ++iter) {
        result.iterations = iter + 1;
        // assign, ties to lowest centroid index
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            int best = 0;
            double best_d = sq_dist(feats.rows[i], result.centroids[0]);
            for (int c = 1; c < centroids; ++c) {
                double d = sq_dist(feats.rows[i], result.centroids[c]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            result.assignments[i] = best;
            inertia += best_d;
        }
        result.inertia = inertia;

        // update
        std::vector<std::vector<double>> sums(centroids, std::vector<double>(f, 0.0));
        std::vector<std::size_t> counts(centroids, 0);
        for (std::size_t i = 0; i < n; ++i) {
            int c = result.assignments[i];
            ++counts[c];
            for (int j = 0; j < f; ++j) sums[c][j] += feats.rows[i][j];
        }
        double shift = 0.0;
        for (int c = 0; c < centroids; ++c) {
            if (counts[c] == 0) {
                // re-seed to the point farthest from its assigned centroid
                std::size_t far = 0;
                double far_d = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    double d = sq_dist(feats.rows[i], result.centroids[result.assignments[i]]);
                    if (d > far_d) {
                        far_d = d;
                        far = i;
                    }
                }
                shift = std::max(shift, std::sqrt(sq_dist(result.centroids[c], feats.rows[far])));
                result.centroids[c] = feats.rows[far];
                continue;
            }
            std::vector<double> mean(f);
            for (int j = 0; j < f; ++j) mean[j] = sums[c][j] / static_cast<double>(counts[c]);
            shift = std::max(shift, std::sqrt(sq_dist(result.centroids[c], mean)));
            result.centroids[c] = std::move(mean);
        }
        if (shift <= tol) break;
    }

    // final assignment and inertia for the converged centroids
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        int best = 0;
        double best_d = sq_dist(feats.rows[i], result.centroids[0]);
        for (int c = 1; c < centroids; ++c) {
            double d = sq_dist(feats.rows[i], result.centroids[c]);
            if (d < best_d) {
                best_d = d;
                best = c;
            }
        }
        result.assignments[i] = best;
        inertia += best_d;
    }
    result.inertia = inertia;
    return result;
}

SampleSet sample_random(std::size_t n, std::size_t size, RngStream& rng) {
    check_budget(size, n, "sample_random");
    // partial Fisher-Yates over the index range
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < size; ++i) {
        std::size_t j = i + rng.uniform_int(n - i);
        std::swap(pool[i], pool[j]);
    }
    SampleSet s;
    s.indices.assign(pool.begin(), pool.begin() + size);
    s.sampler = SamplerId::kRandom;
    s.seed = rng.seed();
    s.per_group = static_cast<int>(size);
    s.groups = 1;
    return s;
}

SampleSet sample_topk(const FeatureMatrix& feats, int centroids, int k, RngStream& rng) {
    feats.validate();
    const std::size_t n = feats.size();
    if (k <= 0) throw std::invalid_argument("sample_topk: k must be positive");
    check_budget(static_cast<std::size_t>(k) * centroids, n, "sample_topk");

    KMeansResult km = kmeans(feats, centroids, 100, 1e-9, rng);

    // distance tables per centroid
    std::vector<Vector> dist(centroids, Vector(n));
    for (int c = 0; c < centroids; ++c)
        for (std::size_t i = 0; i < n; ++i)
            dist[c][i] = std::sqrt(sq_dist(feats.rows[i], km.centroids[c]));

    std::vector<bool> taken(n, false);
    std::vector<std::vector<std::size_t>> chosen(centroids);

    // each point belongs to its nearest centroid first
    auto by_distance = [&](int c, const std::vector<std::size_t>& candidates) {
        std::vector<std::size_t> sorted(candidates);
        std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
            if (dist[c][a] != dist[c][b]) return dist[c][a] < dist[c][b];
            return a < b;
        });
        return sorted;
    };

    std::vector<std::vector<std::size_t>> members(centroids);
    for (std::size_t i = 0; i < n; ++i) members[km.assignments[i]].push_back(i);

    for (int c = 0; c < centroids; ++c) {
        auto sorted = by_distance(c, members[c]);
        for (std::size_t idx : sorted) {
            if (chosen[c].size() == static_cast<std::size_t>(k)) break;
            chosen[c].push_back(idx);
            taken[idx] = true;
        }
    }
    // short centroids fill from the nearest unclaimed points
    for (int c = 0; c < centroids; ++c) {
        if (chosen[c].size() == static_cast<std::size_t>(k)) continue;
        std::vector<std::size_t> remaining;
        for (std::size_t i = 0; i < n; ++i)
            if (!taken[i]) remaining.push_back(i);
        auto sorted = by_distance(c, remaining);
        for (std::size_t idx : sorted) {
            if (chosen[c].size() == static_cast<std::size_t>(k)) break;
            chosen[c].push_back(idx);
            taken[idx] = true;
        }
    }

    SampleSet s;
    for (int c = 0; c < centroids; ++c)
        s.indices.insert(s.indices.end(), chosen[c].begin(), chosen[c].end());
    s.sampler = feats.source == FeatureSource::kExtrinsic ? SamplerId::kExtTopK
                                                          : SamplerId::kIntTopK;
    s.seed = rng.seed();
    s.per_group = k;
    s.groups = centroids;
    return s;
}

Vector distance_weights(const Vector& distances, double eps) {
    if (eps <= 0.0) throw std::invalid_argument("distance_weights: eps must be > 0");
    if (distances.empty()) throw std::invalid_argument("distance_weights: empty");
    double d_min = *std::min_element(distances.begin(), distances.end());
    Vector w(distances.size());
    for (std::size_t i = 0; i < distances.size(); ++i)
        w[i] = 1.0 / (distances[i] - (d_min - eps));
    return w;
}

namespace {

// Draws k distinct indices per group from group-specific weights while
// rejecting indices already claimed by earlier groups.
SampleSet grouped_multinomial(const std::vector<Vector>& group_weights, int k,
                              std::size_t n, RngStream& rng) {
    const int groups = static_cast<int>(group_weights.size());
    std::vector<bool> taken(n, false);
    SampleSet s;
    for (int g = 0; g < groups; ++g) {
        Vector w = group_weights[g];
        for (std::size_t i = 0; i < n; ++i)
            if (taken[i]) w[i] = 0.0;
        auto picks = sample_multinomial(rng, w, k, false);
        for (std::size_t idx : picks) {
            taken[idx] = true;
            s.indices.push_back(idx);
        }
    }
    s.per_group = k;
    s.groups = groups;
    s.seed = rng.seed();
    return s;
}

} // namespace

SampleSet sample_distance_weighted(const FeatureMatrix& feats, int centroids, int k,
                                   double eps, RngStream& rng) {
    feats.validate();
    if (eps <= 0.0) throw std::invalid_argument("sample_distance_weighted: eps must be > 0");
    if (k <= 0) throw std::invalid_argument("sample_distance_weighted: k must be positive");
    const std::size_t n = feats.size();
    check_budget(static_cast<std::size_t>(k) * centroids, n, "sample_distance_weighted");

    KMeansResult km = kmeans(feats, centroids, 100, 1e-9, rng);
    std::vector<Vector> weights(centroids);
    for (int c = 0; c < centroids; ++c) {
        Vector d(n);
        for (std::size_t i = 0; i < n; ++i)
            d[i] = std::sqrt(sq_dist(feats.rows[i], km.centroids[c]));
        weights[c] = distance_weights(d, eps);
    }

    SampleSet s = grouped_multinomial(weights, k, n, rng);
    s.sampler = feats.source == FeatureSource::kExtrinsic ? SamplerId::kExtDistance
                                                          : SamplerId::kIntDistance;
    return s;
}

SampleSet sample_logit(const std::vector<std::vector<double>>& scores, int k, RngStream& rng) {
    if (scores.empty()) throw std::invalid_argument("sample_logit: empty score table");
    const std::size_t n = scores.size();
    const std::size_t y_count = scores.front().size();
    if (y_count < 2) throw std::invalid_argument("sample_logit: need at least two classes");
    for (std::size_t i = 0; i < n; ++i) {
        if (scores[i].size() != y_count)
            throw std::invalid_argument("sample_logit: ragged score row " + std::to_string(i));
        double sum = 0.0;
        for (double v : scores[i]) {
            if (v < 0.0 || !std::isfinite(v))
                throw std::invalid_argument("sample_logit: invalid score in row " +
                                            std::to_string(i));
            sum += v;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("sample_logit: row " + std::to_string(i) +
                                        " does not sum to 1");
    }
    if (k <= 0) throw std::invalid_argument("sample_logit: k must be positive");
    check_budget(static_cast<std::size_t>(k) * y_count, n, "sample_logit");

    std::vector<Vector> weights(y_count, Vector(n));
    for (std::size_t y = 0; y < y_count; ++y)
        for (std::size_t i = 0; i < n; ++i)
            weights[y][i] = scores[i][y];

    SampleSet s = grouped_multinomial(weights, k, n, rng);
    s.sampler = SamplerId::kLogit;
    return s;
}

FeatureMode feature_mode_from_name(const std::string& name) {
    if (name == "intrinsic") return FeatureMode::kIntrinsic;
    if (name == "extrinsic") return FeatureMode::kExtrinsic;
    if (name == "raw") return FeatureMode::kRaw;
    throw std::invalid_argument("unknown feature mode: " + name);
}

std::string feature_mode_name(FeatureMode mode) {
    switch (mode) {
    case FeatureMode::kIntrinsic: return "intrinsic";
    case FeatureMode::kExtrinsic: return "extrinsic";
    case FeatureMode::kRaw: return "raw";
    }
    throw std::logic_error("feature_mode_name: bad mode");
}

FeatureMatrix extract_features(FeatureMode mode, const ModelSpec& spec,
                               const ParameterVector& theta, const Dataset& ds,
                               const std::string& feature_file) {
    FeatureMatrix feats;
    switch (mode) {
    case FeatureMode::kIntrinsic:
        feats.source = FeatureSource::kIntrinsic;
        feats.rows.reserve(ds.size());
        for (const auto& x : ds.inputs)
            feats.rows.push_back(penultimate_features(spec, theta, x));
        break;
    case FeatureMode::kExtrinsic:
        feats = load_features(feature_file);
        feats.source = FeatureSource::kExtrinsic;
        if (feats.size() != ds.size())
            throw std::invalid_argument("extract_features: feature file has " +
                                        std::to_string(feats.size()) + " rows, dataset has " +
                                        std::to_string(ds.size()));
        break;
    case FeatureMode::kRaw:
        feats.source = FeatureSource::kRawInput;
        feats.rows = ds.inputs;
        break;
    }
    feats.validate();
    return feats;
}

void save_features(const std::string& path, const FeatureMatrix& feats) {
    feats.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("save_features: cannot open " + path);
    out << feats.size() << " " << feats.dim() << "\n";
    char buf[64];
    for (const auto& row : feats.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", row[j]);
            out << (j ? " " : "") << buf;
        }
        out << "\n";
    }
    if (!out) throw std::runtime_error("save_features: write failed for " + path);
}

FeatureMatrix load_features(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_features: cannot open " + path);
    std::size_t n = 0, f = 0;
    if (!(in >> n >> f) || n == 0 || f == 0)
        throw std::runtime_error("load_features: bad header in " + path);
    FeatureMatrix feats;
    feats.rows.assign(n, std::vector<double>(f));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j)
            if (!(in >> feats.rows[i][j]))
                throw std::runtime_error("load_features: truncated row " + std::to_string(i) +
                                         " in " + path);
    feats.validate();
    return feats;
}

} // namespace ifs
