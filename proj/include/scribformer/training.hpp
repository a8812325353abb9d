#pragma once

// One optimization step of the combined objective, and the epoch loop that
// writes a run directory:
//   config_snapshot.ini  train_log.csv  val_log.csv  checkpoints/{best,last}.ckpt

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "scribformer/checkpoint.hpp"
#include "scribformer/config.hpp"
#include "scribformer/datapipe.hpp"
#include "scribformer/eval.hpp"
#include "scribformer/losses.hpp"
#include "scribformer/model.hpp"
#include "scribformer/optim.hpp"

namespace scribformer {

namespace fs = std::filesystem;

/// Draws the pixel-mixing weight; it lies strictly inside (0,1).
template <typename Rng>
double draw_alpha(Rng& rng) {
    std::uniform_real_distribution<double> u(std::nextafter(0.0, 1.0), 1.0);
    return u(rng);
}

/// Forward through every branch, the weighted objective, backward and one
/// AdamW step. The trainer stream supplies α unless the weights fix it.
template <typename Rng>
LossReport train_step(ScribFormer& model, AdamW& opt, const Batch& batch, const LossWeights& w, Rng& rng) {
    model->train();
    opt.zero_grad();
    const double drawn = draw_alpha(rng);
    const double alpha = w.fixed_alpha.value_or(drawn);

    auto out = model->forward(batch.images, model->cfg.acam_branch);
    auto y_cnn = softmax_probs(out.cnn);
    auto y_trans = model->cfg.transformer_branch ? softmax_probs(out.trans) : y_cnn;

    LossTerms terms;
    terms.alpha = alpha;
    terms.ss = scribble_loss(y_cnn, y_trans, batch.scribbles);
    terms.pl = pseudo_label_loss(y_cnn, y_trans, mix_pseudo_label(y_cnn, y_trans, alpha));
    if (out.acams) terms.acam = acam_consistency_loss(*out.acams, w.omega);
    auto total = total_loss(terms, w);

    const auto& r = total.report;
    if (!std::isfinite(r.l_ss) || !std::isfinite(r.l_pl) || !std::isfinite(r.l_acam) || !std::isfinite(r.l_total)) {
        std::ostringstream msg;
        msg << "non-finite loss (l_ss=" << r.l_ss << ", l_pl=" << r.l_pl << ", l_acam=" << r.l_acam
            << ", l_total=" << r.l_total << ", alpha=" << r.alpha << ")";
        throw TrainingError(msg.str());
    }
    total.value.backward();
    opt.step();
    return r;
}

inline AdamW make_optimizer(ScribFormer& model, const TrainConfig& cfg) {
    std::vector<std::pair<std::string, torch::Tensor>> params;
    for (const auto& p : model->named_parameters()) params.emplace_back(p.key(), p.value());
    return AdamW(std::move(params), AdamWOptions{cfg.learning_rate, cfg.weight_decay});
}

/// Seeds the global torch generator and builds the network for `cfg`.
inline ScribFormer build_model(const TrainConfig& cfg) {
    torch::manual_seed(cfg.seed);
    return ScribFormer(cfg.model);
}

struct FitResult {
    std::vector<LossReport> steps; // reports produced by this invocation
    std::vector<double> val_dice;  // per epoch run by this invocation
    double best_val_dice = -1;
    int64_t global_step = 0;
    fs::path run_dir;
};

struct FitOptions {
    bool resume = false;
    std::function<void(const std::string&)> log; // progress lines, may be empty
};

namespace detail {

inline std::string format_row(const std::vector<int64_t>& lead, const std::vector<double>& values) {
    std::ostringstream o;
    for (size_t i = 0; i < lead.size(); ++i) o << (i ? "," : "") << lead[i];
    o << std::setprecision(10);
    for (double v : values) o << ',' << v;
    return o.str();
}

/// Keeps the header plus rows whose first integer field is ≤ limit.
inline void truncate_csv(const fs::path& path, int64_t limit) {
    if (!fs::exists(path)) return;
    std::ifstream in(path);
    std::string line, kept;
    bool header = true;
    while (std::getline(in, line)) {
        if (header || (!line.empty() && std::stoll(line.substr(0, line.find(','))) <= limit)) kept += line + "\n";
        header = false;
    }
    in.close();
    std::ofstream(path, std::ios::trunc) << kept;
}

inline std::string rng_to_string(const std::mt19937_64& rng) {
    std::ostringstream o;
    o << rng;
    return o.str();
}

} // namespace detail

/// Trains for cfg.epochs with per-epoch validation. With resume set the run
/// continues from checkpoints/last.ckpt in run_dir.
inline FitResult fit(TrainConfig cfg, const fs::path& run_dir, const FitOptions& fo = {}) {
    cfg.finalize();
    auto say = [&](const std::string& s) {
        if (fo.log) fo.log(s);
    };
    const auto train = data::load_dataset(cfg.data_root, "train", cfg.image_size, static_cast<int>(cfg.num_classes));
    if (train.empty()) throw ConfigError("training split under '" + cfg.data_root + "' is empty");
    std::vector<Sample> val;
    if (fs::is_directory(fs::path(cfg.data_root) / "val"))
        val = data::load_dataset(cfg.data_root, "val", cfg.image_size, static_cast<int>(cfg.num_classes));

    auto model = build_model(cfg);
    auto opt = make_optimizer(model, cfg);
    std::mt19937_64 rng(cfg.seed);

    const auto ckpt_dir = run_dir / "checkpoints";
    const auto train_log = run_dir / "train_log.csv", val_log = run_dir / "val_log.csv";
    fs::create_directories(ckpt_dir);

    FitResult res;
    res.run_dir = run_dir;
    int64_t start_epoch = 0;
    if (fo.resume) {
        const auto ck = load_checkpoint(ckpt_dir / "last.ckpt");
        restore_module_state(*model, ck.model);
        restore_optimizer_state(opt, ck);
        std::istringstream(ck.trainer_rng) >> rng;
        if (ck.torch_rng.defined()) {
            auto gen = torch::globalContext().defaultGenerator(torch::kCPU);
            gen.set_state(ck.torch_rng);
        }
        start_epoch = ck.epoch;
        res.global_step = ck.global_step;
        res.best_val_dice = ck.best_val_dice;
        detail::truncate_csv(train_log, ck.global_step);
        detail::truncate_csv(val_log, ck.epoch);
        say("resuming at epoch " + std::to_string(start_epoch) + ", step " + std::to_string(res.global_step));
    } else {
        std::ofstream(train_log, std::ios::trunc) << "step,l_ss,l_pl,l_acam,l_total,alpha\n";
        std::string head = "epoch,step,mean_dice";
        for (int64_t k = 1; k < cfg.num_classes; ++k) head += ",dice_class" + std::to_string(k);
        std::ofstream(val_log, std::ios::trunc) << head << "\n";
    }
    std::ofstream(run_dir / "config_snapshot.ini", std::ios::trunc) << to_ini(cfg);

    std::ofstream tlog(train_log, std::ios::app), vlog(val_log, std::ios::app);
    const auto B = static_cast<size_t>(cfg.batch_size);
    for (int64_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
        std::vector<size_t> order(train.size());
        std::iota(order.begin(), order.end(), size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0;
        int64_t epoch_steps = 0;
        for (size_t at = 0; at < order.size(); at += B) {
            const auto n = std::min(B, order.size() - at);
            std::vector<Sample> chunk(n);
            data::parallel_for(n, [&](size_t j) {
                const auto& s = train[order[at + j]];
                auto srng = data::sample_rng(cfg.seed, static_cast<uint64_t>(epoch), s.id);
                chunk[j] = data::augment(s, srng);
            });
            std::vector<const Sample*> ptrs;
            for (const auto& s : chunk) ptrs.push_back(&s);
            const auto r = train_step(model, opt, make_batch(ptrs), cfg.loss, rng);
            ++res.global_step;
            res.steps.push_back(r);
            epoch_loss += r.l_total;
            ++epoch_steps;
            tlog << detail::format_row({res.global_step}, {r.l_ss, r.l_pl, r.l_acam, r.l_total, r.alpha}) << "\n";
        }
        tlog.flush();

        double dice = std::numeric_limits<double>::quiet_NaN();
        std::vector<double> row;
        if (!val.empty()) {
            const auto ev = evaluate(model, val, cfg.batch_size);
            dice = ev.mean_dice;
            row.push_back(dice);
            row.insert(row.end(), ev.per_class_dice.begin(), ev.per_class_dice.end());
        } else {
            row.assign(static_cast<size_t>(cfg.num_classes), dice);
        }
        res.val_dice.push_back(dice);
        vlog << detail::format_row({epoch + 1, res.global_step}, row) << "\n";
        vlog.flush();

        // Without a validation split the latest weights count as best.
        const bool improved = val.empty() || dice > res.best_val_dice;
        if (improved) res.best_val_dice = val.empty() ? res.best_val_dice : dice;

        Checkpoint ck;
        ck.model = capture_module_state(*model);
        capture_optimizer_state(opt, ck);
        ck.epoch = epoch + 1;
        ck.global_step = res.global_step;
        ck.trainer_rng = detail::rng_to_string(rng);
        ck.torch_rng = torch::globalContext().defaultGenerator(torch::kCPU).get_state();
        ck.config_snapshot = to_ini(cfg);
        ck.best_val_dice = res.best_val_dice;
        save_checkpoint(ck, ckpt_dir / "last.ckpt");
        if (improved) save_checkpoint(ck, ckpt_dir / "best.ckpt");

        std::ostringstream msg;
        msg << "epoch " << epoch + 1 << "/" << cfg.epochs << "  loss " << std::setprecision(4)
            << epoch_loss / static_cast<double>(std::max<int64_t>(1, epoch_steps)) << "  val dice " << dice;
        say(msg.str());
    }
    return res;
}

/// Rebuilds the network described by a run's snapshot and loads a checkpoint.
inline std::pair<ScribFormer, TrainConfig> load_trained(const fs::path& run_dir, const std::string& which = "best") {
    const auto path = run_dir / "checkpoints" / (which + ".ckpt");
    if (!fs::exists(path)) throw IoError("checkpoint '" + path.string() + "' does not exist");
    const auto ck = load_checkpoint(path);
    auto cfg = parse_config(ck.config_snapshot);
    cfg.finalize();
    ScribFormer model(cfg.model);
    restore_module_state(*model, ck.model);
    model->eval();
    return {model, cfg};
}

} // namespace scribformer
