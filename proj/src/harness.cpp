#include "ifs/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace ifs {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed,
                         const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw std::invalid_argument("config: unknown key \"" + it.key() + "\" in " + where);
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

void ExperimentConfig::validate() const {
    if (checkpoint.empty()) model.validate();
    if (removed_class < 0 ||
        (!model.layer_sizes.empty() && removed_class >= model.num_classes()))
        throw std::invalid_argument("config: removed_class out of range");
    if (samplers.empty()) throw std::invalid_argument("config: samplers list is empty");
    if (sample_counts.empty()) throw std::invalid_argument("config: sample_counts is empty");
    for (int c : sample_counts)
        if (c < 1) throw std::invalid_argument("config: sample counts must be positive");
    if (repetitions < 1) throw std::invalid_argument("config: repetitions must be >= 1");
    if (tau <= 0.0) throw std::invalid_argument("config: tau must be > 0");
    if (threads < 1) throw std::invalid_argument("config: threads must be >= 1");
    if (sampler_options.eps <= 0.0) throw std::invalid_argument("config: eps must be > 0");
    if (sampler_options.centroids < 0)
        throw std::invalid_argument("config: centroids must be >= 0");
    lissa.validate();
    if (dataset.type != "synthetic" && dataset.type != "csv")
        throw std::invalid_argument("config: dataset.type must be synthetic or csv");
    if (dataset.type == "csv" && dataset.path.empty())
        throw std::invalid_argument("config: dataset.path required for csv datasets");
    if (dataset.train_fraction <= 0.0 || dataset.train_fraction >= 1.0)
        throw std::invalid_argument("config: train_fraction must be in (0, 1)");
}

ExperimentConfig parse_config(const std::string& json_text) {
    json root = json::parse(json_text);
    reject_unknown_keys(root,
                        {"dataset", "model", "removed_class", "samplers", "sample_counts",
                         "repetitions", "base_seed", "lissa", "removal", "sampler_options",
                         "output_dir", "threads"},
                        "top level");
    ExperimentConfig cfg;

    if (root.contains("dataset")) {
        const json& d = root["dataset"];
        reject_unknown_keys(d,
                            {"type", "path", "train_fraction", "classes", "per_class", "dim",
                             "spread", "seed"},
                            "dataset");
        cfg.dataset.type = d.value("type", cfg.dataset.type);
        cfg.dataset.path = d.value("path", cfg.dataset.path);
        cfg.dataset.train_fraction = d.value("train_fraction", cfg.dataset.train_fraction);
        cfg.dataset.synthetic.classes = d.value("classes", cfg.dataset.synthetic.classes);
        cfg.dataset.synthetic.per_class = d.value("per_class", cfg.dataset.synthetic.per_class);
        cfg.dataset.synthetic.dim = d.value("dim", cfg.dataset.synthetic.dim);
        cfg.dataset.synthetic.spread = d.value("spread", cfg.dataset.synthetic.spread);
        cfg.dataset.synthetic.seed = d.value("seed", cfg.dataset.synthetic.seed);
    }

    // defaults: desk-scale blob experiment
    cfg.model.layer_sizes = {10, 32, 4};
    cfg.model.activation = Activation::kTanh;
    cfg.model.l2_penalty = 1e-3;
    if (root.contains("model")) {
        const json& m = root["model"];
        reject_unknown_keys(m, {"layers", "activation", "l2_penalty", "train", "checkpoint"},
                            "model");
        if (m.contains("layers")) cfg.model.layer_sizes = m["layers"].get<std::vector<int>>();
        if (m.contains("activation"))
            cfg.model.activation = activation_from_name(m["activation"].get<std::string>());
        cfg.model.l2_penalty = m.value("l2_penalty", cfg.model.l2_penalty);
        cfg.checkpoint = m.value("checkpoint", cfg.checkpoint);
        if (m.contains("train")) {
            const json& t = m["train"];
            reject_unknown_keys(t, {"learning_rate", "epochs", "batch_size", "seed"},
                                "model.train");
            cfg.train_cfg.learning_rate = t.value("learning_rate", cfg.train_cfg.learning_rate);
            cfg.train_cfg.epochs = t.value("epochs", cfg.train_cfg.epochs);
            cfg.train_cfg.batch_size = t.value("batch_size", cfg.train_cfg.batch_size);
            cfg.train_cfg.seed = t.value("seed", cfg.train_cfg.seed);
        }
    }

    cfg.removed_class = root.value("removed_class", 3);
    if (root.contains("samplers")) {
        for (const auto& s : root["samplers"])
            cfg.samplers.push_back(sampler_from_name(s.get<std::string>()));
    } else {
        cfg.samplers = {SamplerId::kRandom, SamplerId::kIntTopK, SamplerId::kIntDistance,
                        SamplerId::kLogit};
    }
    cfg.sample_counts = root.value("sample_counts", std::vector<int>{25, 50, 100, 200});
    cfg.repetitions = root.value("repetitions", 25);
    cfg.base_seed = root.value("base_seed", std::uint64_t{42});

    if (root.contains("lissa")) {
        const json& l = root["lissa"];
        reject_unknown_keys(l, {"delta", "max_iters", "damping", "scale", "batch_size"}, "lissa");
        cfg.lissa.delta = l.value("delta", cfg.lissa.delta);
        cfg.lissa.max_iters = l.value("max_iters", cfg.lissa.max_iters);
        cfg.lissa.damping = l.value("damping", cfg.lissa.damping);
        cfg.lissa.scale = l.value("scale", cfg.lissa.scale);
        cfg.lissa.batch_size = l.value("batch_size", cfg.lissa.batch_size);
    }

    if (root.contains("removal")) {
        const json& r = root["removal"];
        reject_unknown_keys(r, {"tau", "per_point"}, "removal");
        cfg.tau = r.value("tau", cfg.tau);
        cfg.per_point = r.value("per_point", cfg.per_point);
    }

    if (root.contains("sampler_options")) {
        const json& s = root["sampler_options"];
        reject_unknown_keys(s, {"centroids", "eps", "feature_mode", "feature_file"},
                            "sampler_options");
        cfg.sampler_options.centroids = s.value("centroids", cfg.sampler_options.centroids);
        cfg.sampler_options.eps = s.value("eps", cfg.sampler_options.eps);
        if (s.contains("feature_mode"))
            cfg.sampler_options.feature_mode =
                feature_mode_from_name(s["feature_mode"].get<std::string>());
        cfg.sampler_options.feature_file =
            s.value("feature_file", cfg.sampler_options.feature_file);
    }

    cfg.output_dir = root.value("output_dir", cfg.output_dir);
    cfg.threads = root.value("threads", cfg.threads);
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string serialize_config(const ExperimentConfig& cfg) {
    json root;
    root["dataset"] = {{"type", cfg.dataset.type},
                       {"path", cfg.dataset.path},
                       {"train_fraction", cfg.dataset.train_fraction},
                       {"classes", cfg.dataset.synthetic.classes},
                       {"per_class", cfg.dataset.synthetic.per_class},
                       {"dim", cfg.dataset.synthetic.dim},
                       {"spread", cfg.dataset.synthetic.spread},
                       {"seed", cfg.dataset.synthetic.seed}};
    json model = {{"layers", cfg.model.layer_sizes},
                  {"activation", activation_name(cfg.model.activation)},
                  {"l2_penalty", cfg.model.l2_penalty},
                  {"train",
                   {{"learning_rate", cfg.train_cfg.learning_rate},
                    {"epochs", cfg.train_cfg.epochs},
                    {"batch_size", cfg.train_cfg.batch_size},
                    {"seed", cfg.train_cfg.seed}}}};
    if (!cfg.checkpoint.empty()) model["checkpoint"] = cfg.checkpoint;
    root["model"] = model;
    root["removed_class"] = cfg.removed_class;
    std::vector<std::string> names;
    for (SamplerId s : cfg.samplers) names.push_back(sampler_name(s));
    root["samplers"] = names;
    root["sample_counts"] = cfg.sample_counts;
    root["repetitions"] = cfg.repetitions;
    root["base_seed"] = cfg.base_seed;
    root["lissa"] = {{"delta", cfg.lissa.delta},
                     {"max_iters", cfg.lissa.max_iters},
                     {"damping", cfg.lissa.damping},
                     {"scale", cfg.lissa.scale},
                     {"batch_size", cfg.lissa.batch_size}};
    root["removal"] = {{"tau", cfg.tau}, {"per_point", cfg.per_point}};
    root["sampler_options"] = {{"centroids", cfg.sampler_options.centroids},
                               {"eps", cfg.sampler_options.eps},
                               {"feature_mode", feature_mode_name(cfg.sampler_options.feature_mode)},
                               {"feature_file", cfg.sampler_options.feature_file}};
    root["output_dir"] = cfg.output_dir;
    root["threads"] = cfg.threads;
    return root.dump(2);
}

std::string config_digest(const ExperimentConfig& cfg) {
    const std::string text = serialize_config(cfg);
    std::uint64_t h = fnv1a64(text.data(), text.size());
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

DatasetPair split_dataset(std::vector<std::vector<double>> inputs, std::vector<int> labels,
                          int num_classes, double train_fraction, std::uint64_t split_seed) {
    const std::size_t n = inputs.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    RngStream rng(split_seed, 0x5EEDULL);
    for (std::size_t i = n; i > 1; --i) {
        std::size_t j = rng.uniform_int(i);
        std::swap(order[i - 1], order[j]);
    }
    const std::size_t n_train = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(n))));

    DatasetPair pair;
    pair.num_classes = num_classes;
    pair.train.split = "train";
    pair.test.split = "test";
    for (std::size_t i = 0; i < n; ++i) {
        Dataset& dst = i < n_train ? pair.train : pair.test;
        dst.inputs.push_back(std::move(inputs[order[i]]));
        dst.labels.push_back(labels[order[i]]);
    }
    pair.train.validate(num_classes);
    pair.test.validate(num_classes);
    return pair;
}

DatasetPair make_synthetic(const SyntheticSpec& spec, double train_fraction) {
    if (spec.classes < 2) throw std::invalid_argument("synthetic: need >= 2 classes");
    if (spec.per_class < 2) throw std::invalid_argument("synthetic: need >= 2 points per class");
    if (spec.dim < 1) throw std::invalid_argument("synthetic: dim must be positive");
    if (spec.spread <= 0.0) throw std::invalid_argument("synthetic: spread must be > 0");

    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;
    for (int c = 0; c < spec.classes; ++c) {
        RngStream center_rng(spec.seed, 1000ull + static_cast<std::uint64_t>(c));
        std::vector<double> center(spec.dim);
        for (double& v : center) v = 3.0 * center_rng.normal();
        RngStream point_rng(spec.seed, 2000ull + static_cast<std::uint64_t>(c));
        for (int i = 0; i < spec.per_class; ++i) {
            std::vector<double> x(spec.dim);
            for (int j = 0; j < spec.dim; ++j)
                x[j] = center[j] + spec.spread * point_rng.normal();
            inputs.push_back(std::move(x));
            labels.push_back(c);
        }
    }
    return split_dataset(std::move(inputs), std::move(labels), spec.classes, train_fraction,
                         spec.seed);
}

DatasetPair load_csv(const std::string& path, double train_fraction) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("load_dataset: cannot open " + path);
    std::vector<std::vector<double>> inputs;
    std::vector<int> labels;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (cells.size() < 2)
            throw std::runtime_error("load_dataset: line " + std::to_string(line_no) +
                                     ": need at least one feature and a label");
        if (width == 0) {
            // optional header: skip if any cell fails to parse as a number
            bool numeric = true;
            for (const auto& c : cells) {
                try {
                    std::size_t pos = 0;
                    std::stod(c, &pos);
                    if (pos != c.size()) numeric = false;
                } catch (...) {
                    numeric = false;
                }
                if (!numeric) break;
            }
            if (!numeric && line_no == 1) continue;
            width = cells.size();
        }
        if (cells.size() != width)
            throw std::runtime_error("load_dataset: line " + std::to_string(line_no) +
                                     ": ragged row, expected " + std::to_string(width) +
                                     " columns");
        std::vector<double> x(width - 1);
        for (std::size_t j = 0; j + 1 < width; ++j) {
            try {
                std::size_t pos = 0;
                x[j] = std::stod(cells[j], &pos);
                if (pos != cells[j].size()) throw std::invalid_argument("");
            } catch (...) {
                throw std::runtime_error("load_dataset: line " + std::to_string(line_no) +
                                         ": bad float \"" + cells[j] + "\"");
            }
        }
        double lab_raw;
        try {
            std::size_t pos = 0;
            lab_raw = std::stod(cells.back(), &pos);
            if (pos != cells.back().size()) throw std::invalid_argument("");
        } catch (...) {
            throw std::runtime_error("load_dataset: line " + std::to_string(line_no) +
                                     ": bad label \"" + cells.back() + "\"");
        }
        if (lab_raw != std::floor(lab_raw) || lab_raw < 0)
            throw std::runtime_error("load_dataset: line " + std::to_string(line_no) +
                                     ": label must be a nonnegative integer");
        inputs.push_back(std::move(x));
        labels.push_back(static_cast<int>(lab_raw));
    }
    if (inputs.empty()) throw std::runtime_error("load_dataset: no data rows in " + path);

    const int num_classes = *std::max_element(labels.begin(), labels.end()) + 1;
    std::vector<bool> seen(num_classes, false);
    for (int l : labels) seen[l] = true;
    for (int c = 0; c < num_classes; ++c)
        if (!seen[c])
            throw std::runtime_error("load_dataset: label gap, class " + std::to_string(c) +
                                     " never appears");
    if (num_classes < 2) throw std::runtime_error("load_dataset: need at least 2 classes");

    // split seed derived from content so identical files split identically
    std::uint64_t seed = fnv1a64(path.data(), path.size());
    return split_dataset(std::move(inputs), std::move(labels), num_classes, train_fraction, seed);
}

} // namespace

DatasetPair load_dataset(const DatasetConfig& cfg) {
    if (cfg.type == "synthetic") return make_synthetic(cfg.synthetic, cfg.train_fraction);
    if (cfg.type == "csv") return load_csv(cfg.path, cfg.train_fraction);
    throw std::invalid_argument("load_dataset: unknown type " + cfg.type);
}

std::uint64_t trial_stream_id(SamplerId sampler, int count, int repetition) {
    std::uint64_t h = hash_combine64(static_cast<std::uint64_t>(sampler) + 1,
                                     static_cast<std::uint64_t>(count));
    return hash_combine64(h, static_cast<std::uint64_t>(repetition + 1));
}

namespace {

bool is_deterministic_sampler(SamplerId id) {
    return id == SamplerId::kExtTopK || id == SamplerId::kIntTopK;
}

bool needs_features(SamplerId id) {
    return id == SamplerId::kExtTopK || id == SamplerId::kIntTopK ||
           id == SamplerId::kExtDistance || id == SamplerId::kIntDistance;
}

bool is_extrinsic(SamplerId id) {
    return id == SamplerId::kExtTopK || id == SamplerId::kExtDistance;
}

struct TrialKey {
    SamplerId sampler;
    int count;
    int repetition;
};

} // namespace

ResultTable run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();
    const auto t_start = std::chrono::steady_clock::now();

    DatasetPair data = load_dataset(cfg.dataset);

    ModelSpec spec = cfg.model;
    ParameterVector theta;
    if (!cfg.checkpoint.empty()) {
        auto loaded = load_checkpoint(cfg.checkpoint);
        spec = loaded.first;
        theta = loaded.second;
    } else {
        theta = train(spec, data.train, cfg.train_cfg).params;
    }
    const int y_count = spec.num_classes();
    if (cfg.removed_class < 0 || cfg.removed_class >= y_count)
        throw std::invalid_argument("run_experiment: removed_class out of range for model");

    // retained training points feed the samplers; removed points feed the edit
    std::vector<std::size_t> removed_train, retained_train;
    for (std::size_t i = 0; i < data.train.size(); ++i)
        (data.train.labels[i] == cfg.removed_class ? removed_train : retained_train).push_back(i);
    if (removed_train.empty())
        throw std::invalid_argument("run_experiment: removed class has no training points");

    std::vector<std::size_t> self_test, excl_test;
    for (std::size_t i = 0; i < data.test.size(); ++i)
        (data.test.labels[i] == cfg.removed_class ? self_test : excl_test).push_back(i);
    if (self_test.empty() || excl_test.empty())
        throw std::invalid_argument("run_experiment: test split lacks removed or retained classes");

    // shared, deterministic inputs to the samplers
    bool want_intrinsic = false, want_extrinsic = false, want_logit = false;
    for (SamplerId s : cfg.samplers) {
        if (s == SamplerId::kLogit) want_logit = true;
        if (needs_features(s) && is_extrinsic(s)) want_extrinsic = true;
        if (needs_features(s) && !is_extrinsic(s)) want_intrinsic = true;
    }

    auto subset_features = [&](const FeatureMatrix& full) {
        FeatureMatrix sub;
        sub.source = full.source;
        sub.rows.reserve(retained_train.size());
        for (std::size_t i : retained_train) sub.rows.push_back(full.rows[i]);
        return sub;
    };

    FeatureMatrix intrinsic_feats, extrinsic_feats;
    if (want_intrinsic)
        intrinsic_feats = subset_features(
            extract_features(FeatureMode::kIntrinsic, spec, theta, data.train));
    if (want_extrinsic) {
        if (cfg.sampler_options.feature_file.empty())
            throw std::invalid_argument("run_experiment: extrinsic samplers need a feature_file");
        extrinsic_feats = subset_features(extract_features(
            FeatureMode::kExtrinsic, spec, theta, data.train, cfg.sampler_options.feature_file));
    }

    std::vector<std::vector<double>> scores;
    if (want_logit) {
        scores.reserve(retained_train.size());
        for (std::size_t i : retained_train)
            scores.push_back(softmax_scores(spec, theta, data.train.inputs[i]));
    }

    const int centroids =
        cfg.sampler_options.centroids > 0 ? cfg.sampler_options.centroids : y_count;

    // baseline row: unedited model
    ResultTable table;
    table.digest = config_digest(cfg);
    {
        TrialRow base;
        base.report.sampler = "baseline";
        base.report.sample_count = 0;
        base.report.self_loss = self_loss(spec, theta, data.train, removed_train);
        base.report.exclusive_loss = exclusive_loss(spec, theta, data.test, excl_test);
        base.report.self_accuracy = accuracy(spec, theta, data.test, self_test);
        base.report.exclusive_accuracy = accuracy(spec, theta, data.test, excl_test);
        base.report.f1 = f1_unlearning(base.report.exclusive_accuracy, base.report.self_accuracy);
        table.trials.push_back(std::move(base));
    }

    std::vector<TrialKey> keys;
    for (SamplerId s : cfg.samplers)
        for (int count : cfg.sample_counts)
            for (int rep = 0; rep < cfg.repetitions; ++rep)
                keys.push_back({s, count, rep});

    std::vector<TrialRow> rows(keys.size());
    std::atomic<std::size_t> next{0};
    std::atomic<double> wall_sum{0.0};

    auto run_one = [&](const TrialKey& key, TrialRow& row) {
        row.repetition = key.repetition;
        row.report.sampler = sampler_name(key.sampler);
        row.report.sample_count = key.count;
        const int stream_rep = is_deterministic_sampler(key.sampler) ? -1 : key.repetition;
        const std::uint64_t stream = trial_stream_id(key.sampler, key.count, stream_rep);
        row.report.trial_seed = stream;
        try {
            RngStream rng(cfg.base_seed, stream);
            SampleSet local;
            switch (key.sampler) {
            case SamplerId::kRandom:
                local = sample_random(retained_train.size(), key.count, rng);
                break;
            case SamplerId::kExtTopK:
            case SamplerId::kIntTopK: {
                const FeatureMatrix& feats =
                    is_extrinsic(key.sampler) ? extrinsic_feats : intrinsic_feats;
                int k = std::max(1, static_cast<int>(std::llround(
                                        static_cast<double>(key.count) / centroids)));
                local = sample_topk(feats, centroids, k, rng);
                break;
            }
            case SamplerId::kExtDistance:
            case SamplerId::kIntDistance: {
                const FeatureMatrix& feats =
                    is_extrinsic(key.sampler) ? extrinsic_feats : intrinsic_feats;
                int k = std::max(1, static_cast<int>(std::llround(
                                        static_cast<double>(key.count) / centroids)));
                local = sample_distance_weighted(feats, centroids, k, cfg.sampler_options.eps,
                                                 rng);
                break;
            }
            case SamplerId::kLogit: {
                int k = std::max(1, static_cast<int>(std::llround(
                                        static_cast<double>(key.count) / y_count)));
                local = sample_logit(scores, k, rng);
                break;
            }
            }

            // map retained-local indices back to training indices
            std::vector<std::size_t> sample;
            sample.reserve(local.indices.size());
            for (std::size_t i : local.indices) sample.push_back(retained_train[i]);

            RemovalConfig removal;
            removal.tau = cfg.tau;
            removal.removed_class = cfg.removed_class;
            removal.lissa = cfg.lissa;
            removal.per_point = cfg.per_point;
            RngStream lissa_rng(cfg.base_seed, hash_combine64(stream, 0x1155AULL));
            RemovalEdit edit =
                class_removal_edit(spec, theta, data.train, sample, removed_train, removal,
                                   lissa_rng);

            const ParameterVector& edited = edit.theta_edited;
            row.report.self_loss = self_loss(spec, edited, data.train, removed_train);
            row.report.exclusive_loss = exclusive_loss(spec, edited, data.test, excl_test);
            row.report.self_accuracy = accuracy(spec, edited, data.test, self_test);
            row.report.exclusive_accuracy = accuracy(spec, edited, data.test, excl_test);
            row.report.f1 =
                f1_unlearning(row.report.exclusive_accuracy, row.report.self_accuracy);
            row.report.rte_s = measure_rte({edit.ihvp.model_time_s()});
            row.report.me_bytes = measure_me({edit.ihvp.peak_bytes});
            double w = wall_sum.load();
            while (!wall_sum.compare_exchange_weak(w, w + edit.ihvp.wall_time_s)) {}
        } catch (const std::exception& e) {
            row.status = e.what();
        }
    };

    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= keys.size()) break;
            run_one(keys[i], rows[i]);
        }
    };

    if (cfg.threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < cfg.threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (auto& row : rows) table.trials.push_back(std::move(row));

    // aggregates per (sampler, count), only over ok trials
    for (SamplerId s : cfg.samplers) {
        for (int count : cfg.sample_counts) {
            std::vector<MetricsReport> cell;
            for (const auto& row : table.trials) {
                if (row.status == "ok" && row.report.sampler == sampler_name(s) &&
                    row.report.sample_count == count)
                    cell.push_back(row.report);
            }
            if (!cell.empty()) table.aggregates.push_back(aggregate(cell));
        }
    }

    table.total_wall_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    table.mean_trial_wall_s =
        keys.empty() ? 0.0 : wall_sum.load() / static_cast<double>(keys.size());
    return table;
}

void emit_results(const ResultTable& table, const ExperimentConfig& cfg, const std::string& dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    // probe writability before emitting anything
    const fs::path probe = fs::path(dir) / ".write_probe";
    {
        std::ofstream test(probe);
        if (!test) throw std::runtime_error("emit_results: directory not writable: " + dir);
    }
    fs::remove(probe, ec);

    {
        std::ofstream out(fs::path(dir) / "trials.csv");
        out << "sampler,samples,repetition,SL,EL,SA,EA,F1,RTE,ME,status\n";
        for (const auto& row : table.trials) {
            out << row.report.sampler << ',' << row.report.sample_count << ','
                << row.repetition << ',' << fmt_double(row.report.self_loss) << ','
                << fmt_double(row.report.exclusive_loss) << ','
                << fmt_double(row.report.self_accuracy) << ','
                << fmt_double(row.report.exclusive_accuracy) << ','
                << fmt_double(row.report.f1) << ',' << fmt_double(row.report.rte_s) << ','
                << row.report.me_bytes << ',' << row.status << '\n';
        }
        if (!out) throw std::runtime_error("emit_results: failed writing trials.csv");
    }

    {
        std::ofstream out(fs::path(dir) / "aggregate.csv");
        out << "sampler,samples,SL_mean,SL_sd,EL_mean,EL_sd,SA_mean,SA_sd,EA_mean,EA_sd,"
               "F1_mean,F1_sd,RTE_mean,RTE_sd,ME_mean,ME_sd\n";
        for (const auto& a : table.aggregates) {
            out << a.sampler << ',' << a.sample_count << ',' << fmt_double(a.sl_mean) << ','
                << fmt_double(a.sl_sd) << ',' << fmt_double(a.el_mean) << ','
                << fmt_double(a.el_sd) << ',' << fmt_double(a.sa_mean) << ','
                << fmt_double(a.sa_sd) << ',' << fmt_double(a.ea_mean) << ','
                << fmt_double(a.ea_sd) << ',' << fmt_double(a.f1_mean) << ','
                << fmt_double(a.f1_sd) << ',' << fmt_double(a.rte_mean) << ','
                << fmt_double(a.rte_sd) << ',' << fmt_double(a.me_mean) << ','
                << fmt_double(a.me_sd) << '\n';
        }
        if (!out) throw std::runtime_error("emit_results: failed writing aggregate.csv");
    }

    {
        json manifest;
        manifest["artifact_version"] = "1.0.0";
        manifest["config_digest"] = table.digest;
        manifest["config"] = json::parse(serialize_config(cfg));
        manifest["total_wall_s"] = table.total_wall_s;
        manifest["mean_trial_wall_s"] = table.mean_trial_wall_s;
        manifest["trial_rows"] = table.trials.size();
        manifest["aggregate_rows"] = table.aggregates.size();
        std::ofstream out(fs::path(dir) / "manifest.json");
        out << manifest.dump(2) << '\n';
        if (!out) throw std::runtime_error("emit_results: failed writing manifest.json");
    }
}

} // namespace ifs
