#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "ifs/samplers.hpp"
#include "support.hpp"

using namespace ifs;
using namespace test_support;

namespace {

FeatureMatrix line_points() {
    FeatureMatrix f;
    f.rows = {{0.0}, {1.0}, {10.0}, {11.0}};
    return f;
}

std::set<std::size_t> as_set(const std::vector<std::size_t>& idx) {
    return {idx.begin(), idx.end()};
}

} // namespace

TEST_CASE("kmeans separates two 1-D clusters") {
    RngStream rng(3, 0);
    auto km = kmeans(line_points(), 2, 50, 1e-9, rng);
    std::vector<double> centers{km.centroids[0][0], km.centroids[1][0]};
    std::sort(centers.begin(), centers.end());
    CHECK(centers[0] == doctest::Approx(0.5));
    CHECK(centers[1] == doctest::Approx(10.5));
    CHECK(km.assignments[0] == km.assignments[1]);
    CHECK(km.assignments[2] == km.assignments[3]);
    CHECK(km.assignments[0] != km.assignments[2]);
}

TEST_CASE("kmeans with C == n puts every point on its own centroid") {
    RngStream rng(4, 0);
    auto km = kmeans(line_points(), 4, 50, 1e-9, rng);
    CHECK(km.inertia == doctest::Approx(0.0));
    std::set<int> assigned(km.assignments.begin(), km.assignments.end());
    CHECK(assigned.size() == 4);
}

TEST_CASE("kmeans centroid set is invariant under dataset duplication") {
    FeatureMatrix doubled;
    for (int rep = 0; rep < 2; ++rep)
        for (const auto& row : line_points().rows) doubled.rows.push_back(row);
    RngStream rng1(5, 0), rng2(5, 0);
    auto km1 = kmeans(line_points(), 2, 100, 1e-12, rng1);
    auto km2 = kmeans(doubled, 2, 100, 1e-12, rng2);
    std::vector<double> c1{km1.centroids[0][0], km1.centroids[1][0]};
    std::vector<double> c2{km2.centroids[0][0], km2.centroids[1][0]};
    std::sort(c1.begin(), c1.end());
    std::sort(c2.begin(), c2.end());
    CHECK(c1[0] == doctest::Approx(c2[0]));
    CHECK(c1[1] == doctest::Approx(c2[1]));
}

TEST_CASE("kmeans guards") {
    RngStream rng(6, 0);
    CHECK_THROWS_AS(kmeans(line_points(), 5, 10, 1e-9, rng), std::invalid_argument);
    CHECK_THROWS_AS(kmeans(line_points(), 0, 10, 1e-9, rng), std::invalid_argument);
    CHECK_THROWS_AS(kmeans(line_points(), 2, 0, 1e-9, rng), std::invalid_argument);
}

TEST_CASE("kmeans is deterministic in its inputs") {
    Dataset blobs = make_blobs(3, 30, 4, 1.0, 17);
    FeatureMatrix f;
    f.rows = blobs.inputs;
    RngStream a(9, 2), b(9, 2);
    auto km1 = kmeans(f, 3, 100, 1e-9, a);
    auto km2 = kmeans(f, 3, 100, 1e-9, b);
    CHECK(km1.centroids == km2.centroids);
    CHECK(km1.assignments == km2.assignments);
    CHECK(km1.inertia == km2.inertia);
}

TEST_CASE("sample_random basics") {
    RngStream rng(7, 0);
    auto all = sample_random(6, 6, rng);
    CHECK(as_set(all.indices).size() == 6);

    RngStream a(8, 1), b(8, 1);
    CHECK(sample_random(50, 10, a).indices == sample_random(50, 10, b).indices);

    RngStream rng2(9, 0);
    CHECK_THROWS_AS(sample_random(5, 6, rng2), std::invalid_argument);
}

TEST_CASE("sample_random single-draw frequencies are uniform") {
    RngStream rng(11, 0);
    std::vector<std::size_t> counts(10, 0);
    const std::size_t trials = 10000;
    for (std::size_t t = 0; t < trials; ++t)
        ++counts[sample_random(10, 1, rng).indices.front()];
    for (std::size_t c : counts)
        CHECK(static_cast<double>(c) / trials == doctest::Approx(0.1).epsilon(0.12));
}

TEST_CASE("sample_topk reproduces the hand-run 1-D example") {
    RngStream rng(12, 0);
    auto s = sample_topk(line_points(), 2, 1, rng);
    CHECK(as_set(s.indices) == std::set<std::size_t>{0, 2});
}

TEST_CASE("sample_topk exhaustive and single-centroid cases") {
    RngStream rng(13, 0);
    auto s = sample_topk(line_points(), 2, 2, rng);
    CHECK(as_set(s.indices) == std::set<std::size_t>{0, 1, 2, 3});

    // k = 1, C = 1: point nearest the grand centroid (5.5) -> index 1 (d 4.5)
    RngStream rng2(13, 1);
    auto g = sample_topk(line_points(), 1, 1, rng2);
    CHECK(g.indices == std::vector<std::size_t>{1});
}

TEST_CASE("sample_topk is deterministic given the seed") {
    Dataset blobs = make_blobs(4, 25, 6, 1.0, 19);
    FeatureMatrix f;
    f.rows = blobs.inputs;
    RngStream a(21, 3), b(21, 3);
    auto s1 = sample_topk(f, 4, 5, a);
    auto s2 = sample_topk(f, 4, 5, b);
    CHECK(s1.indices == s2.indices);
    CHECK(s1.indices.size() == 20);
    CHECK(as_set(s1.indices).size() == 20);
}

TEST_CASE("distance weights match the hand computation") {
    Vector w = distance_weights({1.0, 2.0, 3.0}, 0.5);
    CHECK(w[0] == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
    CHECK(w[2] == doctest::Approx(0.4).epsilon(1e-12));
    double total = w[0] + w[1] + w[2];
    CHECK(w[0] / total == doctest::Approx(0.65217).epsilon(1e-4));
    CHECK(w[1] / total == doctest::Approx(0.21739).epsilon(1e-4));
    CHECK(w[2] / total == doctest::Approx(0.13043).epsilon(1e-4));
}

TEST_CASE("distance weight properties") {
    RngStream rng(30, 0);
    for (int trial = 0; trial < 50; ++trial) {
        Vector d(8);
        for (auto& v : d) v = rng.uniform() * 10.0;
        double eps = rng.uniform() + 0.01;
        Vector w = distance_weights(d, eps);
        std::size_t mi = 0;
        for (std::size_t i = 1; i < d.size(); ++i)
            if (d[i] < d[mi]) mi = i;
        for (std::size_t i = 0; i < w.size(); ++i) {
            CHECK(w[i] > 0.0);
            CHECK(w[i] <= w[mi] + 1e-15);
        }
        CHECK(w[mi] == doctest::Approx(1.0 / eps).epsilon(1e-12));
    }
}

TEST_CASE("large eps drives distance weights toward uniform") {
    Vector d{0.3, 1.7, 4.2, 2.8, 0.9};
    Vector w = distance_weights(d, 1e6);
    double total = 0.0;
    for (double v : w) total += v;
    double tv = 0.0;
    for (double v : w) tv += std::abs(v / total - 0.2);
    CHECK(tv * 0.5 <= 1e-4);
}

TEST_CASE("distance-weighted sampler yields distinct indices of full cardinality") {
    Dataset blobs = make_blobs(3, 20, 3, 1.0, 23);
    FeatureMatrix f;
    f.rows = blobs.inputs;
    RngStream rng(31, 0);
    auto s = sample_distance_weighted(f, 3, 6, 0.1, rng);
    CHECK(s.indices.size() == 18);
    CHECK(as_set(s.indices).size() == 18);
    RngStream rng2(31, 1);
    CHECK_THROWS_AS(sample_distance_weighted(f, 3, 6, -1.0, rng2), std::invalid_argument);
    RngStream rng3(31, 2);
    CHECK_THROWS_AS(sample_distance_weighted(f, 3, 21, 0.1, rng3), std::invalid_argument);
}

TEST_CASE("logit sampler restricts to the predicted class under one-hot scores") {
    // 6 points, classes 0/1; scores fully confident
    std::vector<std::vector<double>> scores{{1, 0}, {1, 0}, {0, 1}, {0, 1}, {1, 0}, {0, 1}};
    RngStream rng(41, 0);
    auto s = sample_logit(scores, 2, rng);
    CHECK(s.indices.size() == 4);
    std::set<std::size_t> class0{0, 1, 4}, class1{2, 3, 5};
    // first k draws came from class 0's multinomial, next k from class 1's
    CHECK(class0.count(s.indices[0]));
    CHECK(class0.count(s.indices[1]));
    CHECK(class1.count(s.indices[2]));
    CHECK(class1.count(s.indices[3]));
}

TEST_CASE("logit sampler single-draw frequencies match the analytic multinomial") {
    std::vector<std::vector<double>> scores{
        {0.9, 0.1}, {0.7, 0.3}, {0.2, 0.8}, {0.2, 0.8}};
    RngStream rng(43, 0);
    const std::size_t trials = 100000;
    std::size_t count0 = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        Vector w{0.9, 0.7, 0.2, 0.2};
        auto idx = sample_multinomial(rng, w, 1, false);
        if (idx.front() == 0) ++count0;
    }
    CHECK(static_cast<double>(count0) / trials == doctest::Approx(0.45).epsilon(0.025));
}

TEST_CASE("logit sampler validates rows and budget") {
    RngStream rng(44, 0);
    std::vector<std::vector<double>> bad{{0.4, 0.4}};
    CHECK_THROWS_AS(sample_logit(bad, 1, rng), std::invalid_argument);
    std::vector<std::vector<double>> ok{{0.5, 0.5}, {0.5, 0.5}};
    CHECK_THROWS_AS(sample_logit(ok, 2, rng), std::invalid_argument); // 2*2 > 2
}

TEST_CASE("stochastic sampler frequencies match across the analytic multinomial") {
    // total-variation check on single draws for a small weighted instance
    Vector w{0.5, 0.25, 0.15, 0.1};
    RngStream rng(45, 0);
    const std::size_t trials = 50000;
    std::vector<std::size_t> counts(4, 0);
    for (std::size_t t = 0; t < trials; ++t)
        ++counts[sample_multinomial(rng, w, 1, false).front()];
    double tv = 0.0;
    for (std::size_t i = 0; i < 4; ++i)
        tv += std::abs(static_cast<double>(counts[i]) / trials - w[i]);
    CHECK(tv * 0.5 <= 0.02);
}

TEST_CASE("extract_features modes") {
    ModelSpec spec;
    spec.layer_sizes = {2, 3, 2};
    auto theta = init_model(spec, 1);
    Dataset ds = make_blobs(2, 5, 2, 1.0, 29);

    auto intrinsic = extract_features(FeatureMode::kIntrinsic, spec, theta, ds);
    CHECK(intrinsic.size() == ds.size());
    CHECK(intrinsic.dim() == 3);
    CHECK(intrinsic.source == FeatureSource::kIntrinsic);

    auto raw = extract_features(FeatureMode::kRaw, spec, theta, ds);
    CHECK(raw.rows == ds.inputs);

    const std::string path = "test_features.txt";
    FeatureMatrix file_feats;
    RngStream rng(46, 0);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        std::vector<double> row(16);
        for (auto& v : row) v = rng.normal();
        file_feats.rows.push_back(std::move(row));
    }
    save_features(path, file_feats);
    auto ext = extract_features(FeatureMode::kExtrinsic, spec, theta, ds, path);
    CHECK(ext.size() == ds.size());
    CHECK(ext.dim() == 16);
    CHECK(ext.source == FeatureSource::kExtrinsic);
    for (std::size_t i = 0; i < ds.size(); ++i)
        for (std::size_t j = 0; j < 16; ++j)
            CHECK(ext.rows[i][j] == doctest::Approx(file_feats.rows[i][j]).epsilon(1e-15));

    // row-count mismatch
    Dataset longer = make_blobs(2, 6, 2, 1.0, 29);
    CHECK_THROWS_AS(extract_features(FeatureMode::kExtrinsic, spec, theta, longer, path),
                    std::invalid_argument);
    std::filesystem::remove(path);
}
