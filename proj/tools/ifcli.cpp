// Command-line front end: training, feature dumps, sampling, influence
// queries, class-removal edits, benchmark sweeps, and the oracle validation
// suite. Exit codes: 0 success, 1 validation failure, 2 usage error.

#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ifs/harness.hpp"
#include "ifs/influence.hpp"
#include "ifs/metrics.hpp"
#include "ifs/model.hpp"
#include "ifs/samplers.hpp"

namespace {

bool verbose() {
    const char* v = std::getenv("IFS_VERBOSE");
    return v != nullptr && std::string(v) != "0";
}

void info(const std::string& msg) {
    if (verbose()) std::cerr << msg << '\n';
}

int cmd_train(const std::string& config_path, const std::string& out_path) {
    auto cfg = ifs::load_config(config_path);
    auto data = ifs::load_dataset(cfg.dataset);
    auto result = ifs::train(cfg.model, data.train, cfg.train_cfg);
    ifs::save_checkpoint(out_path, cfg.model, result.params);
    std::cout << "train_accuracy " << result.train_accuracy << "\n"
              << "final_loss " << result.final_loss << "\n"
              << "checkpoint " << out_path << "\n";
    return 0;
}

std::pair<ifs::ModelSpec, ifs::ParameterVector> resolve_model(const ifs::ExperimentConfig& cfg,
                                                              const ifs::DatasetPair& data) {
    if (!cfg.checkpoint.empty()) return ifs::load_checkpoint(cfg.checkpoint);
    auto result = ifs::train(cfg.model, data.train, cfg.train_cfg);
    return {cfg.model, std::move(result.params)};
}

int cmd_features(const std::string& config_path, const std::string& mode,
                 const std::string& out_path) {
    auto cfg = ifs::load_config(config_path);
    auto data = ifs::load_dataset(cfg.dataset);
    auto [spec, theta] = resolve_model(cfg, data);
    auto feats = ifs::extract_features(ifs::feature_mode_from_name(mode), spec, theta,
                                       data.train, cfg.sampler_options.feature_file);
    ifs::save_features(out_path, feats);
    info("wrote " + std::to_string(feats.size()) + " feature rows to " + out_path);
    return 0;
}

int cmd_sample(const std::string& config_path, const std::string& sampler, int count, int rep,
               const std::string& out_path) {
    auto cfg = ifs::load_config(config_path);
    cfg.samplers = {ifs::sampler_from_name(sampler)};
    cfg.sample_counts = {count};
    auto data = ifs::load_dataset(cfg.dataset);
    auto [spec, theta] = resolve_model(cfg, data);

    std::vector<std::size_t> retained;
    for (std::size_t i = 0; i < data.train.size(); ++i)
        if (data.train.labels[i] != cfg.removed_class) retained.push_back(i);

    const ifs::SamplerId id = cfg.samplers.front();
    const int y_count = spec.num_classes();
    const int centroids =
        cfg.sampler_options.centroids > 0 ? cfg.sampler_options.centroids : y_count;
    const bool deterministic =
        id == ifs::SamplerId::kIntTopK || id == ifs::SamplerId::kExtTopK;
    ifs::RngStream rng(cfg.base_seed,
                       ifs::trial_stream_id(id, count, deterministic ? -1 : rep));

    ifs::SampleSet set;
    switch (id) {
    case ifs::SamplerId::kRandom:
        set = ifs::sample_random(retained.size(), count, rng);
        break;
    case ifs::SamplerId::kLogit: {
        std::vector<std::vector<double>> scores;
        for (std::size_t i : retained)
            scores.push_back(ifs::softmax_scores(spec, theta, data.train.inputs[i]));
        set = ifs::sample_logit(scores, std::max(1, count / y_count), rng);
        break;
    }
    default: {
        ifs::FeatureMode mode =
            (id == ifs::SamplerId::kExtTopK || id == ifs::SamplerId::kExtDistance)
                ? ifs::FeatureMode::kExtrinsic
                : ifs::FeatureMode::kIntrinsic;
        auto full = ifs::extract_features(mode, spec, theta, data.train,
                                          cfg.sampler_options.feature_file);
        ifs::FeatureMatrix feats;
        feats.source = full.source;
        for (std::size_t i : retained) feats.rows.push_back(full.rows[i]);
        int k = std::max(1, count / centroids);
        if (id == ifs::SamplerId::kIntTopK || id == ifs::SamplerId::kExtTopK)
            set = ifs::sample_topk(feats, centroids, k, rng);
        else
            set = ifs::sample_distance_weighted(feats, centroids, k, cfg.sampler_options.eps,
                                                rng);
        break;
    }
    }

    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    for (std::size_t i : set.indices) out << retained[i] << '\n';
    info("wrote " + std::to_string(set.indices.size()) + " indices to " + out_path);
    return 0;
}

int cmd_influence(const std::string& config_path, int index, const std::string& out_path) {
    auto cfg = ifs::load_config(config_path);
    auto data = ifs::load_dataset(cfg.dataset);
    auto [spec, theta] = resolve_model(cfg, data);
    if (index < 0 || static_cast<std::size_t>(index) >= data.train.size())
        throw std::invalid_argument("influence: index out of range");

    std::vector<std::size_t> retained;
    for (std::size_t i = 0; i < data.train.size(); ++i)
        if (data.train.labels[i] != cfg.removed_class) retained.push_back(i);
    ifs::RngStream rng(cfg.base_seed, ifs::trial_stream_id(ifs::SamplerId::kRandom,
                                                           cfg.sample_counts.front(), 0));
    auto set = ifs::sample_random(retained.size(), cfg.sample_counts.front(), rng);
    std::vector<std::size_t> sample;
    for (std::size_t i : set.indices) sample.push_back(retained[i]);

    ifs::RngStream lissa_rng(cfg.base_seed, 0x11ULL);
    auto result = ifs::influence_vector(spec, theta, data.train, sample,
                                        data.train.inputs[index], data.train.labels[index],
                                        cfg.lissa, lissa_rng);
    std::ofstream out(out_path);
    if (!out) throw std::runtime_error("cannot open " + out_path);
    char buf[40];
    for (double v : result.vector) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        out << buf << '\n';
    }
    std::cout << "iterations " << result.iterations << "\nconverged " << result.converged
              << "\nresidual " << result.residual << "\nwall_time_s " << result.wall_time_s
              << "\npeak_bytes " << result.peak_bytes << "\n";
    return result.converged ? 0 : 1;
}

int cmd_unlearn(const std::string& config_path) {
    auto cfg = ifs::load_config(config_path);
    cfg.repetitions = 1;
    cfg.sample_counts = {cfg.sample_counts.front()};
    cfg.samplers = {cfg.samplers.front()};
    auto table = ifs::run_experiment(cfg);
    for (const auto& row : table.trials) {
        std::cout << row.report.sampler << " samples=" << row.report.sample_count
                  << " SL=" << row.report.self_loss << " EL=" << row.report.exclusive_loss
                  << " SA=" << row.report.self_accuracy
                  << " EA=" << row.report.exclusive_accuracy << " F1=" << row.report.f1
                  << " status=" << row.status << "\n";
    }
    return 0;
}

int cmd_benchmark(const std::string& config_path, int threads_override) {
    auto cfg = ifs::load_config(config_path);
    if (threads_override > 0) cfg.threads = threads_override;
    auto table = ifs::run_experiment(cfg);
    ifs::emit_results(table, cfg, cfg.output_dir);
    std::size_t failures = 0;
    for (const auto& row : table.trials)
        if (row.status != "ok") ++failures;
    std::cout << "trials " << table.trials.size() << "\naggregates " << table.aggregates.size()
              << "\nfailed_trials " << failures << "\noutput " << cfg.output_dir << "\n";
    return 0;
}

bool report_check(const std::string& name, bool ok) {
    std::cout << (ok ? "[pass] " : "[FAIL] ") << name << "\n";
    return ok;
}

int cmd_validate(bool quick) {
    using namespace ifs;
    bool all_ok = true;

    // small trained model shared by the checks
    SyntheticSpec synth;
    synth.classes = 3;
    synth.per_class = quick ? 30 : 60;
    synth.dim = 4;
    synth.seed = 11;
    DatasetConfig dc;
    dc.synthetic = synth;
    auto data = load_dataset(dc);

    ModelSpec spec;
    spec.layer_sizes = {4, 8, 3};
    spec.activation = Activation::kTanh;
    spec.l2_penalty = 0.05;
    TrainConfig tc;
    tc.epochs = quick ? 150 : 300;
    tc.learning_rate = 0.2;
    tc.seed = 3;
    auto theta = train(spec, data.train, tc).params;

    std::vector<std::size_t> sample;
    for (std::size_t i = 0; i < std::min<std::size_t>(data.train.size(), 40); ++i)
        sample.push_back(i);

    // HVP vs finite differences of the gradient
    {
        RngStream rng(99, 1);
        Vector v(theta.size());
        for (double& x : v) x = rng.normal();
        Vector hv = hvp(spec, theta, data.train, sample, v);
        const double h = 1e-5;
        Vector tp = axpy(h, v, theta), tm = axpy(-h, v, theta);
        Vector gp = mean_grad(spec, tp, data.train, sample);
        Vector gm = mean_grad(spec, tm, data.train, sample);
        double err = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < hv.size(); ++i) {
            double fd = (gp[i] - gm[i]) / (2.0 * h);
            err += (fd - hv[i]) * (fd - hv[i]);
            scale += hv[i] * hv[i];
        }
        all_ok &= report_check("hvp vs finite differences",
                               std::sqrt(err) <= 1e-4 * (1.0 + std::sqrt(scale)));
    }

    // LiSSA vs dense solve
    {
        RngStream rng(99, 2);
        Vector v(theta.size());
        for (double& x : v) x = rng.normal();
        LissaConfig lc;
        lc.damping = 0.2;
        lc.delta = 1e-8;
        lc.max_iters = 20000;
        RngStream lissa_rng(99, 3);
        auto lissa = lissa_ihvp(spec, theta, data.train, sample, v, lc, lissa_rng);
        auto direct = direct_ihvp_oracle(spec, theta, data.train, sample, v, lc.damping);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) {
            num += (lissa.vector[i] - direct[i]) * (lissa.vector[i] - direct[i]);
            den += direct[i] * direct[i];
        }
        all_ok &= report_check("lissa vs dense solve",
                               lissa.converged && std::sqrt(num / den) <= 1e-3);
    }

    // influence vs leave-one-out retraining on a convex model
    {
        ModelSpec lr;
        lr.layer_sizes = {4, 3};
        lr.l2_penalty = 0.1;
        TrainConfig ltc;
        ltc.epochs = 200;
        ltc.learning_rate = 0.5;
        ltc.seed = 5;
        Dataset small;
        small.split = "train";
        for (std::size_t i = 0; i < 30; ++i) {
            small.inputs.push_back(data.train.inputs[i]);
            small.labels.push_back(data.train.labels[i]);
        }
        auto full = train(lr, small, ltc).params;
        std::vector<std::size_t> all(small.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

        // Newton refinement to the strict optimum
        auto newton = [&](const Dataset& ds, ParameterVector t) {
            std::vector<std::size_t> idx(ds.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            for (int it = 0; it < 50; ++it) {
                Vector g = mean_grad(lr, t, ds, idx);
                if (norm2(g) < 1e-12) break;
                Matrix h = dense_hessian(lr, t, ds, idx);
                Vector step = solve_spd(h, g, 0.0);
                for (std::size_t i = 0; i < t.size(); ++i) t[i] -= step[i];
            }
            return t;
        };
        full = newton(small, full);

        int hits = 0;
        const int probes = quick ? 5 : 10;
        for (int z = 0; z < probes; ++z) {
            Vector g = grad(lr, full, small.inputs[z], small.labels[z]);
            Vector pred = direct_ihvp_oracle(lr, full, small, all, g, 0.0);
            const double n = static_cast<double>(small.size());
            Dataset loo;
            loo.split = "train";
            for (std::size_t i = 0; i < small.size(); ++i) {
                if (static_cast<int>(i) == z) continue;
                loo.inputs.push_back(small.inputs[i]);
                loo.labels.push_back(small.labels[i]);
            }
            auto retrained = newton(loo, full);
            Vector actual(full.size()), predicted(full.size());
            for (std::size_t i = 0; i < full.size(); ++i) {
                actual[i] = retrained[i] - full[i];
                predicted[i] = pred[i] / n;
            }
            double cos = dot(actual, predicted) / (norm2(actual) * norm2(predicted));
            if (cos >= 0.9) ++hits;
        }
        all_ok &= report_check("influence vs LOO retraining", hits >= probes - 1);
    }

    return all_ok ? 0 : 1;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Influence-function sampling benchmark"};
    app.require_subcommand(1);

    std::string config_path, out_path = "model.bin", mode = "intrinsic", sampler = "random";
    int count = 100, rep = 0, index = 0, threads_override = 0;
    bool quick = false;

    auto* train_cmd = app.add_subcommand("train", "fit and checkpoint a model");
    train_cmd->add_option("--config", config_path, "experiment config JSON")->required();
    train_cmd->add_option("--out", out_path, "checkpoint output path");

    auto* feat_cmd = app.add_subcommand("features", "emit a feature file");
    feat_cmd->add_option("--config", config_path)->required();
    feat_cmd->add_option("--mode", mode, "intrinsic|extrinsic|raw");
    feat_cmd->add_option("--out", out_path)->required();

    auto* sample_cmd = app.add_subcommand("sample", "emit a sample index list");
    sample_cmd->add_option("--config", config_path)->required();
    sample_cmd->add_option("--sampler", sampler)->required();
    sample_cmd->add_option("--count", count);
    sample_cmd->add_option("--rep", rep);
    sample_cmd->add_option("--out", out_path)->required();

    auto* infl_cmd = app.add_subcommand("influence", "single-point influence vector");
    infl_cmd->add_option("--config", config_path)->required();
    infl_cmd->add_option("--index", index)->required();
    infl_cmd->add_option("--out", out_path)->required();

    auto* unlearn_cmd = app.add_subcommand("unlearn", "one class-removal edit plus metrics");
    unlearn_cmd->add_option("--config", config_path)->required();

    auto* bench_cmd = app.add_subcommand("benchmark", "full sampler x count x repetition sweep");
    bench_cmd->add_option("--config", config_path)->required();
    bench_cmd->add_option("--threads", threads_override, "override config thread count");

    auto* validate_cmd = app.add_subcommand("validate", "run the oracle suite");
    validate_cmd->add_flag("--quick", quick, "smaller instances");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(config_path, out_path);
        if (feat_cmd->parsed()) return cmd_features(config_path, mode, out_path);
        if (sample_cmd->parsed()) return cmd_sample(config_path, sampler, count, rep, out_path);
        if (infl_cmd->parsed()) return cmd_influence(config_path, index, out_path);
        if (unlearn_cmd->parsed()) return cmd_unlearn(config_path);
        if (bench_cmd->parsed()) return cmd_benchmark(config_path, threads_override);
        if (validate_cmd->parsed()) return cmd_validate(quick);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 2;
}
