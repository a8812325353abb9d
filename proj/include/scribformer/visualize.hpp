#pragma once

// ACAM heatmaps and prediction overlays written as PNG files.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "scribformer/decoders.hpp"
#include "scribformer/model.hpp"
#include "scribformer/png_io.hpp"
#include "scribformer/types.hpp"

namespace scribformer::viz {

namespace fs = std::filesystem;
using Rgb = std::array<uint8_t, 3>;

/// 256-entry blue→cyan→yellow→red ramp; index 255 is the hottest colour.
inline const std::array<Rgb, 256>& heat_lut() {
    static const std::array<Rgb, 256> lut = [] {
        std::array<Rgb, 256> t{};
        const std::array<std::array<double, 3>, 5> stops{{{0, 0, 0.5}, {0, 0.5, 1}, {0.2, 1, 0.8}, {1, 0.9, 0}, {0.8, 0, 0}}};
        for (int i = 0; i < 256; ++i) {
            const double x = i / 255.0 * 4.0;
            const int s = std::min(3, static_cast<int>(x));
            const double f = x - s;
            for (int c = 0; c < 3; ++c)
                t[static_cast<size_t>(i)][static_cast<size_t>(c)] = static_cast<uint8_t>(
                    std::lround(255.0 * ((1 - f) * stops[static_cast<size_t>(s)][static_cast<size_t>(c)] +
                                         f * stops[static_cast<size_t>(s + 1)][static_cast<size_t>(c)])));
        }
        return t;
    }();
    return lut;
}

/// LUT bin of each pixel after per-map min-max scaling (constant maps → bin 0).
inline std::vector<int> heat_bins(const torch::Tensor& map) {
    auto m = map.detach().to(torch::kDouble).contiguous();
    const double lo = m.min().item<double>(), hi = m.max().item<double>();
    std::vector<int> bins(static_cast<size_t>(m.numel()), 0);
    if (!(hi > lo)) return bins;
    const auto* p = m.data_ptr<double>();
    for (size_t i = 0; i < bins.size(); ++i)
        bins[i] = std::clamp(static_cast<int>(std::floor((p[i] - lo) / (hi - lo) * 256.0)), 0, 255);
    return bins;
}

inline std::vector<uint8_t> colorize(const torch::Tensor& map) {
    const auto& lut = heat_lut();
    std::vector<uint8_t> rgb;
    for (int b : heat_bins(map)) rgb.insert(rgb.end(), lut[static_cast<size_t>(b)].begin(), lut[static_cast<size_t>(b)].end());
    return rgb;
}

inline Rgb class_colour(int64_t k) {
    static const std::array<Rgb, 8> table{{{0, 0, 0}, {230, 60, 60}, {60, 200, 80}, {70, 110, 240},
                                           {240, 200, 40}, {200, 80, 220}, {40, 210, 210}, {250, 140, 40}}};
    return table[static_cast<size_t>(k) % table.size()];
}

/// Image in grey with foreground classes of `mask` blended at 50%.
inline std::vector<uint8_t> overlay(const torch::Tensor& image, const torch::Tensor& mask) {
    auto img = image.detach().to(torch::kFloat).contiguous();
    auto lab = mask.detach().to(torch::kLong).contiguous();
    const auto* p = img.data_ptr<float>();
    const auto* l = lab.data_ptr<int64_t>();
    std::vector<uint8_t> rgb;
    for (int64_t i = 0; i < img.numel(); ++i) {
        const double g = 255.0 * std::clamp(static_cast<double>(p[i]), 0.0, 1.0);
        const auto c = class_colour(l[i]);
        for (int ch = 0; ch < 3; ++ch)
            rgb.push_back(static_cast<uint8_t>(std::lround(l[i] == 0 ? g : 0.5 * g + 0.5 * c[static_cast<size_t>(ch)])));
    }
    return rgb;
}

/// Writes <out>/input.png, overlay.png (predicted mask) and stage<i>_class<k>.png
/// for the five ACAM stages, each upsampled to the input size. Returns the paths.
inline std::vector<fs::path> render_sample(ScribFormer& model, const Sample& s, const fs::path& out) {
    fs::create_directories(out);
    model->eval();
    torch::NoGradGuard no_grad;
    auto x = s.image.pixels.unsqueeze(0).unsqueeze(0);
    const auto H = x.size(2), W = x.size(3);
    auto res = model->forward(x, true);
    auto mask = predict_mask(model->predict_probs(x))[0];

    std::vector<fs::path> written;
    auto gray = (s.image.pixels.clamp(0, 1) * 255).round().to(torch::kByte).contiguous();
    std::vector<uint8_t> g(gray.data_ptr<uint8_t>(), gray.data_ptr<uint8_t>() + gray.numel());
    png::write_gray8(out / "input.png", static_cast<int>(W), static_cast<int>(H), g);
    written.push_back(out / "input.png");
    png::write_rgb8(out / "overlay.png", static_cast<int>(W), static_cast<int>(H), overlay(s.image.pixels, mask));
    written.push_back(out / "overlay.png");
    if (!res.acams) return written;

    for (int stage = 0; stage < 5; ++stage) {
        auto up = detail::upsample_to(res.acams->maps[static_cast<size_t>(stage)], H, W)[0];
        for (int64_t k = 0; k < up.size(0); ++k) {
            const auto path = out / ("stage" + std::to_string(stage + 1) + "_class" + std::to_string(k) + ".png");
            png::write_rgb8(path, static_cast<int>(W), static_cast<int>(H), colorize(up[k]));
            written.push_back(path);
        }
    }
    return written;
}

} // namespace scribformer::viz
