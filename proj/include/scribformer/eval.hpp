#pragma once

// Dice scoring with case-level aggregation and percentile bootstrap intervals.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "scribformer/decoders.hpp"
#include "scribformer/error.hpp"
#include "scribformer/model.hpp"
#include "scribformer/png_io.hpp"
#include "scribformer/types.hpp"

namespace scribformer {

/// 2|P_k ∩ G_k| / (|P_k| + |G_k|); 1 when class k is absent from both.
inline double dice_score(const torch::Tensor& pred, const torch::Tensor& gt, int64_t k) {
    if (pred.sizes() != gt.sizes()) throw ShapeMismatchError("prediction and ground truth shapes differ");
    auto p = pred.to(torch::kLong).eq(k), g = gt.to(torch::kLong).eq(k);
    const auto inter = (p & g).sum().item<int64_t>();
    const auto total = p.sum().item<int64_t>() + g.sum().item<int64_t>();
    if (total == 0) return 1.0;
    return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

/// Samples named "<case>_slice<n>" belong to <case>; any other id is its own case.
inline std::string case_of(const std::string& sample_id) {
    const auto pos = sample_id.rfind("_slice");
    return pos == std::string::npos ? sample_id : sample_id.substr(0, pos);
}

struct CaseDice {
    std::string case_id;
    std::vector<double> per_class; // foreground classes 1…K−1
    double mean = 0;
};

struct EvalResult {
    std::vector<double> per_class_dice; // K−1 foreground values
    double mean_dice = 0;
    std::vector<CaseDice> per_case;
    std::optional<double> ci_low, ci_high;

    std::vector<double> per_case_means() const {
        std::vector<double> v;
        for (const auto& c : per_case) v.push_back(c.mean);
        return v;
    }
};

/// Maps a B×1×H×W image batch to a B×H×W label map.
using Predictor = std::function<torch::Tensor(const torch::Tensor&)>;

inline EvalResult evaluate(const std::vector<Sample>& samples, const Predictor& predict, int64_t num_classes,
                           int64_t batch_size = 8) {
    if (samples.empty()) throw ValidationError("cannot evaluate an empty dataset");
    for (const auto& s : samples)
        if (!s.dense_mask) throw ValidationError("sample '" + s.id + "' has no dense mask");

    // case → per-class sums over its slices, slice count
    std::map<std::string, std::pair<std::vector<double>, int>> cases;
    for (size_t at = 0; at < samples.size(); at += static_cast<size_t>(batch_size)) {
        std::vector<const Sample*> chunk;
        for (size_t i = at; i < std::min(samples.size(), at + static_cast<size_t>(batch_size)); ++i)
            chunk.push_back(&samples[i]);
        auto pred = predict(make_batch(chunk).images);
        for (size_t j = 0; j < chunk.size(); ++j) {
            auto& [sums, n] = cases[case_of(chunk[j]->id)];
            sums.resize(static_cast<size_t>(num_classes - 1), 0.0);
            for (int64_t k = 1; k < num_classes; ++k)
                sums[static_cast<size_t>(k - 1)] += dice_score(pred[static_cast<int64_t>(j)], *chunk[j]->dense_mask, k);
            ++n;
        }
    }

    EvalResult r;
    r.per_class_dice.assign(static_cast<size_t>(num_classes - 1), 0.0);
    for (auto& [id, entry] : cases) {
        CaseDice c{id, entry.first, 0.0};
        for (auto& d : c.per_class) d /= entry.second;
        c.mean = std::accumulate(c.per_class.begin(), c.per_class.end(), 0.0) / static_cast<double>(c.per_class.size());
        for (size_t k = 0; k < c.per_class.size(); ++k) r.per_class_dice[k] += c.per_class[k];
        r.per_case.push_back(std::move(c));
    }
    for (auto& d : r.per_class_dice) d /= static_cast<double>(r.per_case.size());
    r.mean_dice = std::accumulate(r.per_class_dice.begin(), r.per_class_dice.end(), 0.0) /
                  static_cast<double>(r.per_class_dice.size());
    return r;
}

/// Evaluation-mode model prediction (mean of both branch softmaxes, argmax).
inline EvalResult evaluate(ScribFormer& model, const std::vector<Sample>& samples, int64_t batch_size = 8) {
    const bool was_training = model->is_training();
    model->eval();
    torch::NoGradGuard no_grad;
    auto r = evaluate(
        samples, [&](const torch::Tensor& x) { return predict_mask(model->predict_probs(x)); },
        model->cfg.num_classes, batch_size);
    model->train(was_training);
    return r;
}

/// Linear-interpolation sample quantile (Hyndman–Fan type 7) of sorted data.
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
    const double h = (static_cast<double>(sorted.size()) - 1.0) * p;
    const auto lo = static_cast<size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Percentile bootstrap interval of the mean of `values`.
inline std::pair<double, double> bootstrap_ci(const std::vector<double>& values, int64_t resamples, double level,
                                              uint64_t seed) {
    if (values.empty()) throw ValidationError("bootstrap needs at least one value");
    if (resamples < 1) throw ConfigError("bootstrap needs at least one resample");
    if (!(level > 0 && level < 1)) throw ConfigError("confidence level must lie in (0,1)");
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<size_t> pick(0, values.size() - 1);
    std::vector<double> means(static_cast<size_t>(resamples));
    for (auto& m : means) {
        double s = 0;
        for (size_t i = 0; i < values.size(); ++i) s += values[pick(rng)];
        m = s / static_cast<double>(values.size());
    }
    std::sort(means.begin(), means.end());
    const double tail = (1.0 - level) / 2.0;
    return {quantile_sorted(means, tail), quantile_sorted(means, 1.0 - tail)};
}

inline nlohmann::ordered_json eval_report_json(const EvalResult& r, const std::vector<std::string>& class_names,
                                               const std::string& split, double ci_level) {
    nlohmann::ordered_json j;
    j["split"] = split;
    j["mean_dice"] = r.mean_dice;
    auto per_class = nlohmann::ordered_json::array();
    for (size_t k = 0; k < r.per_class_dice.size(); ++k) {
        const auto name = k + 1 < class_names.size() ? class_names[k + 1] : "class" + std::to_string(k + 1);
        per_class.push_back({{"class", k + 1}, {"name", name}, {"dice", r.per_class_dice[k]}});
    }
    j["per_class"] = per_class;
    auto cases = nlohmann::ordered_json::array();
    for (const auto& c : r.per_case) cases.push_back({{"case", c.case_id}, {"mean_dice", c.mean}, {"per_class", c.per_class}});
    j["per_case"] = cases;
    if (r.ci_low && r.ci_high) j["ci"] = {{"level", ci_level}, {"low", *r.ci_low}, {"high", *r.ci_high}};
    else j["ci"] = nullptr;
    return j;
}

/// Box plot of per-case Dice: one column per foreground class plus the mean.
/// Boxes span the quartiles, the dark bar is the median, whiskers reach min/max.
inline void write_boxplot(const EvalResult& r, const std::filesystem::path& path) {
    std::vector<std::vector<double>> columns(r.per_class_dice.size() + 1);
    for (const auto& c : r.per_case) {
        for (size_t k = 0; k < c.per_class.size(); ++k) columns[k].push_back(c.per_class[k]);
        columns.back().push_back(c.mean);
    }
    const int col_w = 48, margin = 16, plot_h = 200;
    const int W = margin * 2 + col_w * static_cast<int>(columns.size()), H = plot_h + margin * 2;
    std::vector<uint8_t> rgb(static_cast<size_t>(W * H * 3), 255);
    auto put = [&](int x, int y, std::array<uint8_t, 3> c) {
        if (x < 0 || y < 0 || x >= W || y >= H) return;
        auto* p = &rgb[static_cast<size_t>((y * W + x) * 3)];
        p[0] = c[0], p[1] = c[1], p[2] = c[2];
    };
    auto y_of = [&](double v) { return margin + static_cast<int>(std::lround((1.0 - std::clamp(v, 0.0, 1.0)) * plot_h)); };
    const std::array<uint8_t, 3> axis{0, 0, 0}, grid{220, 220, 220}, fill{120, 170, 220}, dark{20, 40, 90};
    for (int t = 0; t <= 10; ++t)
        for (int x = margin; x < W - margin; ++x) put(x, y_of(t / 10.0), t % 5 == 0 ? axis : grid);
    for (size_t c = 0; c < columns.size(); ++c) {
        auto v = columns[c];
        if (v.empty()) continue;
        std::sort(v.begin(), v.end());
        const int x0 = margin + static_cast<int>(c) * col_w + 10, x1 = x0 + col_w - 20, xm = (x0 + x1) / 2;
        const int q1 = y_of(quantile_sorted(v, 0.25)), q3 = y_of(quantile_sorted(v, 0.75));
        for (int y = std::min(y_of(v.front()), y_of(v.back())); y <= std::max(y_of(v.front()), y_of(v.back())); ++y)
            put(xm, y, dark);
        for (int y = q3; y <= q1; ++y)
            for (int x = x0; x <= x1; ++x) put(x, y, (x == x0 || x == x1 || y == q1 || y == q3) ? dark : fill);
        const int med = y_of(quantile_sorted(v, 0.5));
        for (int dy = -1; dy <= 1; ++dy)
            for (int x = x0; x <= x1; ++x) put(x, med + dy, dark);
        for (int x = x0 + 6; x <= x1 - 6; ++x) put(x, y_of(v.front()), dark), put(x, y_of(v.back()), dark);
    }
    png::write_rgb8(path, W, H, rgb);
}

} // namespace scribformer
