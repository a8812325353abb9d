#pragma once

// Implementations behind the `scribformer` command-line tool.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "scribformer/config.hpp"
#include "scribformer/datapipe.hpp"
#include "scribformer/eval.hpp"
#include "scribformer/training.hpp"
#include "scribformer/visualize.hpp"

namespace scribformer::cmd {

namespace fs = std::filesystem;

struct SynthArgs {
    fs::path out;
    data::SyntheticSpec spec;
    bool force = false;
};

inline void synth(const SynthArgs& a) {
    a.spec.validate();
    if (fs::exists(a.out) && !fs::is_directory(a.out)) throw IoError("'" + a.out.string() + "' is not a directory");
    if (fs::is_directory(a.out) && !fs::is_empty(a.out)) {
        if (!a.force) throw IoError("output directory '" + a.out.string() + "' is not empty (use --force)");
        fs::remove_all(a.out);
    }
    const auto set = data::generate_synthetic(a.spec);
    fs::create_directories(a.out);
    data::write_split(a.out, "train", set.train);
    data::write_split(a.out, "val", set.val);
    data::write_split(a.out, "test", set.test);
    data::write_dataset_info(a.out, {a.spec.num_classes, data::default_class_names(a.spec.num_classes), a.spec.image_size});
}

/// Flag overrides; unset fields leave the file/preset value alone.
struct TrainOverrides {
    std::optional<int64_t> epochs, batch_size, image_size;
    std::optional<double> learning_rate, weight_decay, lambda1, lambda2, lambda3;
    std::optional<uint64_t> seed;
    std::optional<std::string> omega, alpha, data;
    bool no_transformer = false, no_acam = false;

    void apply(TrainConfig& c) const {
        if (epochs) c.epochs = *epochs;
        if (batch_size) c.batch_size = *batch_size;
        if (image_size) c.image_size = *image_size;
        if (learning_rate) c.learning_rate = *learning_rate;
        if (weight_decay) c.weight_decay = *weight_decay;
        if (lambda1) c.loss.lambda1 = *lambda1;
        if (lambda2) c.loss.lambda2 = *lambda2;
        if (lambda3) c.loss.lambda3 = *lambda3;
        if (seed) c.seed = *seed;
        if (omega) detail::assign(c, "loss.omega", *omega);
        if (alpha) detail::assign(c, "loss.alpha", *alpha);
        if (data) c.data_root = *data;
        if (no_transformer) c.model.transformer_branch = false;
        if (no_acam) c.model.acam_branch = false;
    }
};

struct TrainArgs {
    std::string preset = "paper";
    std::optional<fs::path> config;
    fs::path out;
    TrainOverrides overrides;
    bool resume = false;
    bool quiet = false;
};

/// Precedence: preset < config file < flags. On resume the run's own snapshot
/// replaces preset and file; flags still apply.
inline TrainConfig resolve_train_config(const TrainArgs& a) {
    TrainConfig cfg;
    if (a.resume) {
        const auto snap = a.out / "config_snapshot.ini";
        if (!fs::exists(snap)) throw IoError("run directory '" + a.out.string() + "' has no config snapshot to resume");
        cfg = load_config(snap);
    } else {
        cfg = preset(a.preset);
        if (a.config) cfg = load_config(*a.config, cfg);
    }
    a.overrides.apply(cfg);
    if (cfg.data_root.empty()) throw ConfigError("no dataset given (set data.root or pass --data)");
    cfg.finalize();
    return cfg;
}

inline FitResult train(const TrainArgs& a) {
    const auto cfg = resolve_train_config(a);
    FitOptions fo;
    fo.resume = a.resume;
    if (!a.quiet) fo.log = [](const std::string& s) { std::cout << s << std::endl; };
    return fit(cfg, a.out, fo);
}

struct EvalArgs {
    fs::path run;
    std::optional<fs::path> data;
    std::string split = "test";
    std::string checkpoint = "best";
    std::optional<fs::path> out;
    std::optional<fs::path> boxplot;
};

inline nlohmann::ordered_json evaluate_run(const EvalArgs& a) {
    if (a.checkpoint != "best" && a.checkpoint != "last") throw ConfigError("--checkpoint must be best or last");
    auto [model, cfg] = load_trained(a.run, a.checkpoint);
    const fs::path root = a.data ? *a.data : fs::path(cfg.data_root);
    const auto samples = data::load_dataset(root, a.split, cfg.image_size, static_cast<int>(cfg.num_classes));
    auto r = evaluate(model, samples, cfg.batch_size);
    const auto ci = bootstrap_ci(r.per_case_means(), cfg.eval.bootstrap_resamples, cfg.eval.ci_level, cfg.seed);
    r.ci_low = ci.first;
    r.ci_high = ci.second;

    std::vector<std::string> names = data::default_class_names(static_cast<int>(cfg.num_classes));
    if (fs::exists(root / "dataset.json")) names = data::read_dataset_info(root).class_names;
    auto report = eval_report_json(r, names, a.split, cfg.eval.ci_level);
    report["checkpoint"] = a.checkpoint;
    const auto out = a.out ? *a.out : a.run / "eval_report.json";
    if (out.has_parent_path()) fs::create_directories(out.parent_path());
    std::ofstream(out) << report.dump(2) << "\n";
    if (a.boxplot) write_boxplot(r, *a.boxplot);
    return report;
}

struct VisualizeArgs {
    fs::path run;
    std::optional<fs::path> data;
    std::string split = "test";
    std::vector<std::string> ids;
    std::string checkpoint = "best";
};

inline std::vector<fs::path> visualize(const VisualizeArgs& a) {
    auto [model, cfg] = load_trained(a.run, a.checkpoint);
    const fs::path root = a.data ? *a.data : fs::path(cfg.data_root);
    const auto samples = data::load_dataset(root, a.split, cfg.image_size, static_cast<int>(cfg.num_classes));
    std::vector<fs::path> written;
    for (const auto& id : a.ids) {
        auto it = std::find_if(samples.begin(), samples.end(), [&](const Sample& s) { return s.id == id; });
        if (it == samples.end()) {
            std::string avail;
            for (const auto& s : samples) avail += (avail.empty() ? "" : ", ") + s.id;
            throw ValidationError("no sample '" + id + "' in split '" + a.split + "'; available: " + avail);
        }
        auto paths = viz::render_sample(model, *it, a.run / "acam" / id);
        written.insert(written.end(), paths.begin(), paths.end());
    }
    return written;
}

/// One-line machine-readable error for stderr.
inline std::string error_line(const std::string& kind, const std::string& message) {
    return nlohmann::json{{"error", kind}, {"message", message}}.dump();
}

} // namespace scribformer::cmd
