#pragma once

// Sample loading, normalization, augmentation and synthetic phantom generation.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <fstream>
#include <numbers>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "scribformer/error.hpp"
#include "scribformer/png_io.hpp"
#include "scribformer/types.hpp"

namespace scribformer::data {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Worker pool helpers
// ---------------------------------------------------------------------------

/// Data-loading parallelism, capped by SCRIBFORMER_NUM_WORKERS when set.
inline int num_workers() {
    int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    if (const char* env = std::getenv("SCRIBFORMER_NUM_WORKERS")) {
        const int cap = std::atoi(env);
        if (cap > 0) n = std::min(n, cap);
    }
    return n;
}

/// Runs fn(i) for i in [0, n). Each index is handled exactly once; the first
/// exception thrown by any worker is rethrown on the calling thread.
template <typename Fn>
void parallel_for(size_t n, Fn&& fn, int workers = num_workers()) {
    workers = std::max(1, std::min<int>(workers, static_cast<int>(n)));
    if (workers <= 1) {
        for (size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------------------
// Normalization and resizing
// ---------------------------------------------------------------------------

/// Min-max rescales raw intensities to [0,1]; a constant input maps to zeros.
inline Image2D normalize_intensity(const torch::Tensor& raw) {
    if (raw.dim() != 2) throw ValidationError("normalize_intensity expects an H×W array");
    auto x = raw.to(torch::kDouble);
    if (!torch::isfinite(x).all().item<bool>())
        throw ValidationError("normalize_intensity: input contains non-finite values");
    const double lo = x.min().item<double>();
    const double hi = x.max().item<double>();
    if (hi == lo) return Image2D{torch::zeros(raw.sizes(), torch::kFloat)};
    return Image2D{((x - lo) / (hi - lo)).to(torch::kFloat)};
}

inline void check_size(int64_t size) {
    if (size < 32 || size % 32 != 0)
        throw ConfigError("image size " + std::to_string(size) + " must be a positive multiple of 32");
}

namespace detail {
inline torch::Tensor resize_labels(const torch::Tensor& labels, int64_t size) {
    namespace F = torch::nn::functional;
    auto f = labels.to(torch::kFloat).unsqueeze(0).unsqueeze(0);
    auto r = F::interpolate(f, F::InterpolateFuncOptions()
                                   .size(std::vector<int64_t>{size, size})
                                   .mode(torch::kNearest));
    return r.squeeze(0).squeeze(0).round().to(torch::kUInt8);
}
} // namespace detail

/// Resizes to size×size: bilinear for the image, nearest-neighbour for label maps.
inline Sample resize_sample(const Sample& s, int64_t size) {
    check_size(size);
    check_sample(s);
    if (s.image.height() == size && s.image.width() == size) return s;

    namespace F = torch::nn::functional;
    Sample out;
    out.id = s.id;
    auto img = s.image.pixels.to(torch::kFloat).unsqueeze(0).unsqueeze(0);
    img = F::interpolate(img, F::InterpolateFuncOptions()
                                  .size(std::vector<int64_t>{size, size})
                                  .mode(torch::kBilinear)
                                  .align_corners(false));
    out.image.pixels = img.squeeze(0).squeeze(0).clamp(0.0, 1.0).contiguous();
    out.scribble.labels = detail::resize_labels(s.scribble.labels, size);
    if (s.dense_mask) out.dense_mask = detail::resize_labels(*s.dense_mask, size);
    return out;
}

// ---------------------------------------------------------------------------
// Augmentation
// ---------------------------------------------------------------------------

struct AugmentOptions {
    double p_hflip = 0.5;
    double p_vflip = 0.5;
    double p_rotate = 0.5; // rotation by 90, 180 or 270 degrees
    double p_noise = 0.5;
    double noise_sigma = 0.02;
};

inline Sample hflip(const Sample& s) {
    Sample o = s;
    o.image.pixels = s.image.pixels.flip({1}).contiguous();
    o.scribble.labels = s.scribble.labels.flip({1}).contiguous();
    if (s.dense_mask) o.dense_mask = s.dense_mask->flip({1}).contiguous();
    return o;
}

inline Sample vflip(const Sample& s) {
    Sample o = s;
    o.image.pixels = s.image.pixels.flip({0}).contiguous();
    o.scribble.labels = s.scribble.labels.flip({0}).contiguous();
    if (s.dense_mask) o.dense_mask = s.dense_mask->flip({0}).contiguous();
    return o;
}

inline Sample rotate90(const Sample& s, int quarter_turns) {
    Sample o = s;
    o.image.pixels = torch::rot90(s.image.pixels, quarter_turns, {0, 1}).contiguous();
    o.scribble.labels = torch::rot90(s.scribble.labels, quarter_turns, {0, 1}).contiguous();
    if (s.dense_mask) o.dense_mask = torch::rot90(*s.dense_mask, quarter_turns, {0, 1}).contiguous();
    return o;
}

/// Random flips, quarter-turn rotation and image noise. The same spatial
/// transform hits image, scribble and dense mask; noise only touches the image.
/// All random draws happen regardless of outcome so the stream stays aligned.
template <typename Rng>
Sample augment(const Sample& s, Rng& rng, const AugmentOptions& opt = {}) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const bool do_h = u(rng) < opt.p_hflip;
    const bool do_v = u(rng) < opt.p_vflip;
    const bool do_r = u(rng) < opt.p_rotate;
    const int turns = 1 + static_cast<int>(std::uniform_int_distribution<int>(0, 2)(rng));
    const bool do_n = u(rng) < opt.p_noise;

    Sample o = s;
    if (do_h) o = hflip(o);
    if (do_v) o = vflip(o);
    if (do_r) o = rotate90(o, turns);
    if (do_n) {
        std::normal_distribution<float> g(0.0f, static_cast<float>(opt.noise_sigma));
        auto img = o.image.pixels.clone().contiguous();
        auto* p = img.data_ptr<float>();
        for (int64_t i = 0, n = img.numel(); i < n; ++i) p[i] = std::clamp(p[i] + g(rng), 0.0f, 1.0f);
        o.image.pixels = img;
    }
    return o;
}

/// Per-sample stream derived from (seed, epoch, sample id) so augmentation
/// does not depend on worker scheduling.
inline std::mt19937_64 sample_rng(uint64_t seed, uint64_t epoch, const std::string& id) {
    uint64_t h = 1469598103934665603ull; // FNV-1a
    for (unsigned char c : id) h = (h ^ c) * 1099511628211ull;
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
                      static_cast<uint32_t>(epoch), static_cast<uint32_t>(h), static_cast<uint32_t>(h >> 32)};
    return std::mt19937_64(seq);
}

// ---------------------------------------------------------------------------
// Synthetic phantoms
// ---------------------------------------------------------------------------

struct SyntheticSpec {
    int num_train = 200;
    int num_val = 20;
    int num_test = 30;
    int image_size = 64;
    int num_classes = 4;
    double scribble_coverage = 0.25;
    uint64_t seed = 1;

    void validate() const {
        if (num_train <= 0 || num_val <= 0 || num_test <= 0)
            throw ConfigError("synthetic split counts must be positive");
        if (num_classes < 2) throw ConfigError("synthetic data needs at least 2 classes");
        if (num_classes > 254) throw ConfigError("at most 254 classes fit the 8-bit label encoding");
        if (!(scribble_coverage > 0.0 && scribble_coverage < 1.0))
            throw ConfigError("scribble_coverage must lie in (0,1)");
        check_size(image_size);
    }
};

struct SplitSet {
    std::vector<Sample> train, val, test;
};

inline std::vector<std::string> default_class_names(int k) {
    std::vector<std::string> names{"background", "LV", "MYO", "RV"};
    names.resize(std::min<size_t>(names.size(), static_cast<size_t>(k)));
    for (int c = static_cast<int>(names.size()); c < k; ++c) names.push_back("structure" + std::to_string(c));
    return names;
}

namespace detail {

struct Ellipse {
    double cx, cy, a, b, phi;
    bool contains(double x, double y) const {
        const double dx = x - cx, dy = y - cy;
        const double u = dx * std::cos(phi) + dy * std::sin(phi);
        const double v = -dx * std::sin(phi) + dy * std::cos(phi);
        return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
    }
    bool inside_frame(int size, double margin) const {
        const double r = std::max(a, b);
        return cx - r >= margin && cy - r >= margin && cx + r <= size - 1 - margin &&
               cy + r <= size - 1 - margin;
    }
};

/// Returns the label map of one phantom or an empty tensor when the drawn
/// geometry does not fit.
template <typename Rng>
torch::Tensor draw_geometry(int S, int K, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto U = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    constexpr double pi = std::numbers::pi;

    std::vector<std::pair<Ellipse, int>> shapes; // drawn in order; earlier wins
    const double cx = S / 2.0 + U(-0.08, 0.08) * S;
    const double cy = S / 2.0 + U(-0.08, 0.08) * S;
    const double a = U(0.10, 0.15) * S;
    const double b = a * U(0.8, 1.2);
    const double phi = U(0.0, pi);
    const double t = std::max(2.0, U(0.045, 0.07) * S);
    shapes.push_back({{cx, cy, a, b, phi}, 1});
    if (K >= 3) shapes.push_back({{cx, cy, a + t, b + t, phi}, 2});
    const double theta = pi + U(-0.6, 0.6);
    for (int k = 3; k < K; ++k) {
        const double ang = theta + (k - 3) * (2.0 * pi / std::max(1, K - 2));
        const double ra = U(0.12, 0.18) * S / (k == 3 ? 1.0 : 1.6);
        const double rb = U(0.07, 0.11) * S / (k == 3 ? 1.0 : 1.6);
        const double dist = std::max(a, b) + t + 0.6 * rb;
        shapes.push_back({{cx + dist * std::cos(ang), cy + dist * std::sin(ang), ra, rb, ang + pi / 2}, k});
    }
    for (const auto& [e, k] : shapes)
        if (!e.inside_frame(S, 2.0)) return {};

    auto mask = torch::zeros({S, S}, torch::kUInt8);
    auto m = mask.accessor<uint8_t, 2>();
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x)
            for (const auto& [e, k] : shapes)
                if (e.contains(x, y)) {
                    m[y][x] = static_cast<uint8_t>(k);
                    break;
                }
    // Every structure must keep a usable footprint after occlusion.
    auto counts = torch::bincount(mask.flatten().to(torch::kLong), {}, K);
    for (int k = 0; k < K; ++k)
        if (counts[k].item<int64_t>() < 6) return {};
    return mask;
}

template <typename Rng>
torch::Tensor render_intensity(const torch::Tensor& mask, int K, Rng& rng) {
    const int S = static_cast<int>(mask.size(0));
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto U = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };
    constexpr double pi = std::numbers::pi;

    std::vector<double> level(K);
    level[0] = 0.0;
    if (K > 1) level[1] = U(0.80, 0.90);
    if (K > 2) level[2] = U(0.18, 0.26);
    if (K > 3) level[3] = U(0.75, 0.85);
    for (int k = 4; k < K; ++k) level[k] = U(0.55, 0.65);

    struct Wave { double amp, freq, ang, phase; };
    std::vector<Wave> waves(4);
    for (auto& w : waves) w = {U(0.02, 0.04), U(1.0, 4.0), U(0.0, pi), U(0.0, 2 * pi)};

    auto img = torch::zeros({S, S}, torch::kDouble);
    auto im = img.accessor<double, 2>();
    auto m = mask.accessor<uint8_t, 2>();
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            const int k = m[y][x];
            if (k == 0) {
                double v = 0.45; // texture stays within [0.29, 0.61], clear of every structure level
                for (const auto& w : waves)
                    v += w.amp * std::sin(2 * pi * w.freq * (x * std::cos(w.ang) + y * std::sin(w.ang)) / S + w.phase);
                im[y][x] = v;
            } else {
                im[y][x] = level[k];
            }
        }
    // Soften edges with a 3×3 box filter, then add acquisition noise.
    auto blurred = torch::avg_pool2d(torch::nn::functional::pad(
                                         img.unsqueeze(0).unsqueeze(0),
                                         torch::nn::functional::PadFuncOptions({1, 1, 1, 1}).mode(torch::kReplicate)),
                                     {3, 3}, {1, 1})
                       .squeeze(0)
                       .squeeze(0)
                       .contiguous();
    std::normal_distribution<double> g(0.0, 0.03);
    auto* p = blurred.data_ptr<double>();
    for (int64_t i = 0, n = blurred.numel(); i < n; ++i) p[i] += g(rng);
    return blurred;
}

/// Chamfer-free erosion depth: number of 4-neighbour erosions a pixel survives
/// (pixels outside the image count as outside the region).
inline std::vector<int> erosion_depth(const std::vector<uint8_t>& region, int S) {
    std::vector<int> depth(region.size(), -1);
    std::vector<int> frontier;
    for (int y = 0; y < S; ++y)
        for (int x = 0; x < S; ++x) {
            const int i = y * S + x;
            if (!region[i]) continue;
            const bool edge = x == 0 || y == 0 || x == S - 1 || y == S - 1 || !region[i - 1] ||
                              !region[i + 1] || !region[i - S] || !region[i + S];
            if (edge) {
                depth[i] = 0;
                frontier.push_back(i);
            }
        }
    for (size_t head = 0; head < frontier.size(); ++head) {
        const int i = frontier[head];
        const int x = i % S, y = i / S;
        const int nb[4] = {x > 0 ? i - 1 : -1, x < S - 1 ? i + 1 : -1, y > 0 ? i - S : -1, y < S - 1 ? i + S : -1};
        for (int j : nb)
            if (j >= 0 && region[j] && depth[j] < 0) {
                depth[j] = depth[i] + 1;
                frontier.push_back(j);
            }
    }
    return depth;
}

/// Picks ~coverage·|region| pixels along an erosion contour of the region,
/// as a contiguous angular arc around the region centroid.
template <typename Rng>
std::vector<int> scribble_stroke(const std::vector<uint8_t>& region, int S, double coverage, Rng& rng) {
    const auto depth = erosion_depth(region, S);
    int max_depth = -1;
    int64_t area = 0;
    double sx = 0, sy = 0;
    for (int i = 0; i < S * S; ++i)
        if (region[i]) {
            max_depth = std::max(max_depth, depth[i]);
            ++area;
            sx += i % S;
            sy += i / S;
        }
    if (area == 0) return {};
    const auto target = static_cast<size_t>(std::max<int64_t>(1, std::llround(coverage * area)));
    const double ccx = sx / area, ccy = sy / area;

    // Middle layer first, then alternate outward/inward until enough pixels.
    std::vector<int> layers{max_depth / 2};
    for (int off = 1; static_cast<int>(layers.size()) <= max_depth; ++off) {
        if (max_depth / 2 + off <= max_depth) layers.push_back(max_depth / 2 + off);
        if (max_depth / 2 - off >= 0) layers.push_back(max_depth / 2 - off);
    }
    std::vector<int> pool;
    for (int d : layers) {
        for (int i = 0; i < S * S; ++i)
            if (region[i] && depth[i] == d) pool.push_back(i);
        if (pool.size() >= target) break;
    }
    std::vector<std::pair<double, int>> by_angle;
    by_angle.reserve(pool.size());
    for (int i : pool) by_angle.push_back({std::atan2(i / S - ccy, i % S - ccx), i});
    std::sort(by_angle.begin(), by_angle.end());

    const double start = std::uniform_real_distribution<double>(-std::numbers::pi, std::numbers::pi)(rng);
    size_t first = 0;
    while (first < by_angle.size() && by_angle[first].first < start) ++first;
    std::vector<int> out;
    const size_t take = std::min(target, by_angle.size());
    for (size_t j = 0; j < take; ++j) out.push_back(by_angle[(first + j) % by_angle.size()].second);
    return out;
}

template <typename Rng>
Sample make_phantom(const SyntheticSpec& spec, Rng& rng, std::string id) {
    const int S = spec.image_size, K = spec.num_classes;
    torch::Tensor mask;
    for (int attempt = 0; attempt < 100 && !mask.defined(); ++attempt) mask = draw_geometry(S, K, rng);
    if (!mask.defined())
        throw ValidationError("cannot fit " + std::to_string(K - 1) + " structures into a " +
                              std::to_string(S) + " px image after 100 attempts");

    auto raw = render_intensity(mask, K, rng);
    auto img = normalize_intensity(raw).pixels.to(torch::kDouble);
    // Quantize to the 16-bit grid so a PNG round trip is lossless.
    img = (img * 65535.0).round() / 65535.0;

    auto scribble = torch::full({S, S}, static_cast<int64_t>(kUnlabeled), torch::kUInt8);
    auto* sp = scribble.data_ptr<uint8_t>();
    const auto* mp = mask.data_ptr<uint8_t>();
    std::vector<uint8_t> region(static_cast<size_t>(S) * S);
    for (int k = 0; k < K; ++k) {
        for (int i = 0; i < S * S; ++i) region[i] = mp[i] == k;
        for (int i : scribble_stroke(region, S, spec.scribble_coverage, rng)) sp[i] = static_cast<uint8_t>(k);
    }
    return Sample{Image2D{img.to(torch::kFloat)}, ScribbleMask{scribble}, mask, std::move(id)};
}

} // namespace detail

/// Deterministic phantom dataset: a pure function of spec (including seed).
inline SplitSet generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    SplitSet out;
    const std::pair<int, std::vector<Sample>*> splits[] = {
        {spec.num_train, &out.train}, {spec.num_val, &out.val}, {spec.num_test, &out.test}};
    uint32_t split_idx = 0;
    for (auto [count, dst] : splits) {
        dst->resize(static_cast<size_t>(count));
        const uint32_t si = split_idx++;
        parallel_for(static_cast<size_t>(count), [&, si](size_t i) {
            std::seed_seq seq{static_cast<uint32_t>(spec.seed), static_cast<uint32_t>(spec.seed >> 32), si,
                              static_cast<uint32_t>(i)};
            std::mt19937_64 rng(seq);
            char id[32];
            std::snprintf(id, sizeof id, "case%04zu", i);
            (*dst)[i] = detail::make_phantom(spec, rng, id);
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// On-disk layout
// ---------------------------------------------------------------------------

struct DatasetInfo {
    int num_classes = 0;
    std::vector<std::string> class_names;
    int image_size = 0;
};

inline void write_dataset_info(const fs::path& root, const DatasetInfo& info) {
    nlohmann::ordered_json j;
    j["num_classes"] = info.num_classes;
    j["class_names"] = info.class_names;
    j["image_size"] = info.image_size;
    std::ofstream(root / "dataset.json") << j.dump(2) << "\n";
}

inline DatasetInfo read_dataset_info(const fs::path& root) {
    std::ifstream in(root / "dataset.json");
    if (!in) throw IoError("missing dataset.json under '" + root.string() + "'");
    nlohmann::json j;
    try {
        in >> j;
        DatasetInfo info;
        info.num_classes = j.at("num_classes").get<int>();
        info.class_names = j.at("class_names").get<std::vector<std::string>>();
        info.image_size = j.at("image_size").get<int>();
        return info;
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed dataset.json: " + std::string(e.what()));
    }
}

inline void write_split(const fs::path& root, const std::string& split, const std::vector<Sample>& samples) {
    const auto dir = root / split;
    fs::create_directories(dir / "images");
    fs::create_directories(dir / "scribbles");
    bool any_mask = false;
    for (const auto& s : samples) any_mask |= s.dense_mask.has_value();
    if (any_mask) fs::create_directories(dir / "masks");

    parallel_for(samples.size(), [&](size_t i) {
        const auto& s = samples[i];
        check_sample(s);
        const int H = static_cast<int>(s.image.height()), W = static_cast<int>(s.image.width());
        auto px = (s.image.pixels.to(torch::kDouble).clamp(0, 1) * 65535.0).round().to(torch::kInt32).contiguous();
        std::vector<uint16_t> img(px.data_ptr<int32_t>(), px.data_ptr<int32_t>() + px.numel());
        png::write_gray16(dir / "images" / (s.id + ".png"), W, H, img);
        auto sc = s.scribble.labels.contiguous();
        png::write_gray8(dir / "scribbles" / (s.id + ".png"), W, H,
                         std::vector<uint8_t>(sc.data_ptr<uint8_t>(), sc.data_ptr<uint8_t>() + sc.numel()));
        if (s.dense_mask) {
            auto m = s.dense_mask->contiguous();
            png::write_gray8(dir / "masks" / (s.id + ".png"), W, H,
                             std::vector<uint8_t>(m.data_ptr<uint8_t>(), m.data_ptr<uint8_t>() + m.numel()));
        }
    });
}

namespace detail {
inline torch::Tensor labels_from_png(const png::GrayImage& g) {
    if (g.bit_depth != 8) throw ValidationError("label maps must be 8-bit PNG");
    auto t = torch::empty({g.height, g.width}, torch::kUInt8);
    std::copy(g.data.begin(), g.data.end(), t.data_ptr<uint8_t>());
    return t;
}

inline void check_labels(const torch::Tensor& labels, int num_classes, bool allow_unlabeled, const std::string& what) {
    if (num_classes <= 0) return;
    auto bad = labels.ge(num_classes);
    if (allow_unlabeled) bad = bad.logical_and(labels.ne(kUnlabeled));
    if (bad.any().item<bool>())
        throw ValidationError(what + " contains class indices outside [0," + std::to_string(num_classes) + ")");
}
} // namespace detail

/// Loads `<root>/<split>` and resizes every sample to image_size. When
/// num_classes > 0 label values are validated against it.
inline std::vector<Sample> load_dataset(const fs::path& root, const std::string& split, int64_t image_size,
                                        int num_classes = 0) {
    check_size(image_size);
    const auto dir = root / split;
    if (!fs::is_directory(dir)) throw IoError("split directory '" + dir.string() + "' does not exist");
    std::vector<std::string> ids;
    if (fs::is_directory(dir / "images"))
        for (const auto& e : fs::directory_iterator(dir / "images"))
            if (e.path().extension() == ".png") ids.push_back(e.path().stem().string());
    std::sort(ids.begin(), ids.end());

    std::vector<Sample> out(ids.size());
    parallel_for(ids.size(), [&](size_t i) {
        const auto& id = ids[i];
        const auto scribble_path = dir / "scribbles" / (id + ".png");
        if (!fs::exists(scribble_path)) throw IoError("sample '" + id + "' has no scribble file");
        const auto img = png::read_gray(dir / "images" / (id + ".png"));
        auto raw = torch::empty({img.height, img.width}, torch::kDouble);
        std::copy(img.data.begin(), img.data.end(), raw.data_ptr<double>());

        Sample s;
        s.id = id;
        s.image = normalize_intensity(raw);
        const auto scr = png::read_gray(scribble_path);
        s.scribble.labels = detail::labels_from_png(scr);
        detail::check_labels(s.scribble.labels, num_classes, true, "scribble '" + id + "'");
        const auto mask_path = dir / "masks" / (id + ".png");
        if (fs::exists(mask_path)) {
            s.dense_mask = detail::labels_from_png(png::read_gray(mask_path));
            detail::check_labels(*s.dense_mask, num_classes, false, "mask '" + id + "'");
        }
        check_sample(s);
        out[i] = resize_sample(s, image_size);
    });
    return out;
}

} // namespace scribformer::data
