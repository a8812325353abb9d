#pragma once

// Run configuration: an INI document with [data], [model], [loss], [train]
// and [eval] sections. Unknown sections or keys are rejected by name.

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "scribformer/error.hpp"
#include "scribformer/losses.hpp"
#include "scribformer/model.hpp"

namespace scribformer {

struct EvalConfig {
    int64_t bootstrap_resamples = 10000;
    double ci_level = 0.95;
};

struct TrainConfig {
    std::string data_root;
    int64_t image_size = 256;
    int64_t num_classes = 4;
    ModelConfig model;
    LossWeights loss;
    int64_t epochs = 300;
    int64_t batch_size = 8;
    double learning_rate = 1e-3;
    double weight_decay = 5e-4;
    uint64_t seed = 1;
    std::string device = "cpu";
    EvalConfig eval;

    /// Copies data-level settings into the model config and checks everything.
    void finalize() {
        model.num_classes = num_classes;
        model.encoder.base_image_size = image_size;
        validate();
    }

    void validate() const {
        if (epochs <= 0) throw ConfigError("train.epochs must be positive");
        if (batch_size <= 0) throw ConfigError("train.batch_size must be positive");
        if (!(learning_rate > 0)) throw ConfigError("train.learning_rate must be positive");
        if (weight_decay < 0 || weight_decay >= 1) throw ConfigError("train.weight_decay must lie in [0,1)");
        if (device != "cpu" && device != "cuda") throw ConfigError("train.device must be cpu or cuda");
        if (image_size < 32 || image_size % 32 != 0)
            throw ConfigError("data.image_size must be a positive multiple of 32");
        if (num_classes < 2) throw ConfigError("data.num_classes must be at least 2");
        if (eval.bootstrap_resamples < 1) throw ConfigError("eval.bootstrap_resamples must be positive");
        if (!(eval.ci_level > 0 && eval.ci_level < 1)) throw ConfigError("eval.ci_level must lie in (0,1)");
        model.validate();
        loss.validate();
    }
};

/// Paper-scale defaults: 256×256 inputs, 300 epochs.
inline TrainConfig paper_preset() { return TrainConfig{}; }

/// Workstation-sized run: 64×64 inputs, 30 epochs, batch 8.
inline TrainConfig desk_preset() {
    TrainConfig c;
    c.image_size = 64;
    c.epochs = 30;
    c.batch_size = 8;
    return c;
}

inline TrainConfig preset(const std::string& name) {
    if (name == "desk") return desk_preset();
    if (name == "paper") return paper_preset();
    throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
}

namespace detail {

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
    std::istringstream in(text);
    T v{};
    in >> v;
    if (in.fail() || !(in >> std::ws).eof()) throw ConfigError("invalid value '" + text + "' for " + key);
    return v;
}

template <>
inline bool parse_value<bool>(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError("invalid boolean '" + text + "' for " + key);
}

template <>
inline std::string parse_value<std::string>(const std::string&, const std::string& text) {
    return text;
}

template <typename T, size_t N>
std::array<T, N> parse_list(const std::string& key, const std::string& text) {
    std::array<T, N> out{};
    std::stringstream ss(text);
    std::string item;
    size_t n = 0;
    while (std::getline(ss, item, ',')) {
        if (n == N) throw ConfigError(key + " expects " + std::to_string(N) + " comma-separated values");
        const auto b = item.find_first_not_of(" \t"), e = item.find_last_not_of(" \t");
        out[n++] = parse_value<T>(key, b == std::string::npos ? "" : item.substr(b, e - b + 1));
    }
    if (n != N) throw ConfigError(key + " expects " + std::to_string(N) + " comma-separated values");
    return out;
}

template <typename T, size_t N>
std::string join(const std::array<T, N>& a) {
    std::ostringstream out;
    out.precision(17);
    for (size_t i = 0; i < N; ++i) out << (i ? "," : "") << a[i];
    return out.str();
}

inline std::string fmt(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

/// Applies one "section.key = value" assignment; throws naming unknown keys.
inline void assign(TrainConfig& c, const std::string& key, const std::string& v) {
    using std::string;
    static const std::map<string, void (*)(TrainConfig&, const string&, const string&)> setters{
        {"data.root", [](TrainConfig& c, const string& k, const string& v) { c.data_root = parse_value<string>(k, v); }},
        {"data.image_size", [](TrainConfig& c, const string& k, const string& v) { c.image_size = parse_value<int64_t>(k, v); }},
        {"data.num_classes", [](TrainConfig& c, const string& k, const string& v) { c.num_classes = parse_value<int64_t>(k, v); }},
        {"model.channels", [](TrainConfig& c, const string& k, const string& v) { c.model.encoder.channels = parse_list<int64_t, 5>(k, v); }},
        {"model.token_dim", [](TrainConfig& c, const string& k, const string& v) { c.model.encoder.token_dim = parse_value<int64_t>(k, v); }},
        {"model.num_heads", [](TrainConfig& c, const string& k, const string& v) { c.model.encoder.num_heads = parse_value<int64_t>(k, v); }},
        {"model.mlp_ratio", [](TrainConfig& c, const string& k, const string& v) { c.model.encoder.mlp_ratio = parse_value<double>(k, v); }},
        {"model.patch_size", [](TrainConfig& c, const string& k, const string& v) { c.model.encoder.patch_size = parse_value<int64_t>(k, v); }},
        {"model.transformer", [](TrainConfig& c, const string& k, const string& v) { c.model.transformer_branch = parse_value<bool>(k, v); }},
        {"model.acam", [](TrainConfig& c, const string& k, const string& v) { c.model.acam_branch = parse_value<bool>(k, v); }},
        {"loss.lambda1", [](TrainConfig& c, const string& k, const string& v) { c.loss.lambda1 = parse_value<double>(k, v); }},
        {"loss.lambda2", [](TrainConfig& c, const string& k, const string& v) { c.loss.lambda2 = parse_value<double>(k, v); }},
        {"loss.lambda3", [](TrainConfig& c, const string& k, const string& v) { c.loss.lambda3 = parse_value<double>(k, v); }},
        {"loss.omega", [](TrainConfig& c, const string& k, const string& v) { c.loss.omega = parse_list<double, 4>(k, v); }},
        {"loss.alpha", [](TrainConfig& c, const string& k, const string& v) {
             if (v == "dynamic") c.loss.fixed_alpha.reset();
             else c.loss.fixed_alpha = parse_value<double>(k, v);
         }},
        {"train.epochs", [](TrainConfig& c, const string& k, const string& v) { c.epochs = parse_value<int64_t>(k, v); }},
        {"train.batch_size", [](TrainConfig& c, const string& k, const string& v) { c.batch_size = parse_value<int64_t>(k, v); }},
        {"train.learning_rate", [](TrainConfig& c, const string& k, const string& v) { c.learning_rate = parse_value<double>(k, v); }},
        {"train.weight_decay", [](TrainConfig& c, const string& k, const string& v) { c.weight_decay = parse_value<double>(k, v); }},
        {"train.seed", [](TrainConfig& c, const string& k, const string& v) { c.seed = parse_value<uint64_t>(k, v); }},
        {"train.device", [](TrainConfig& c, const string& k, const string& v) { c.device = parse_value<string>(k, v); }},
        {"eval.bootstrap_resamples", [](TrainConfig& c, const string& k, const string& v) { c.eval.bootstrap_resamples = parse_value<int64_t>(k, v); }},
        {"eval.ci_level", [](TrainConfig& c, const string& k, const string& v) { c.eval.ci_level = parse_value<double>(k, v); }},
    };
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(c, key, v);
}

} // namespace detail

/// Overlays the assignments in an INI document onto `base`.
inline TrainConfig parse_config(const std::string& text, TrainConfig base = paper_preset()) {
    namespace pt = boost::property_tree;
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(std::string("malformed config: ") + e.message() + " at line " + std::to_string(e.line()));
    }
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty()) throw ConfigError("config key '" + section + "' must belong to a section");
        for (const auto& [key, value] : body) detail::assign(base, section + "." + key, value.data());
    }
    return base;
}

inline TrainConfig load_config(const std::filesystem::path& path, TrainConfig base = paper_preset()) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config '" + path.string() + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::move(base));
}

/// INI text that parses back to an identical config.
inline std::string to_ini(const TrainConfig& c) {
    using detail::fmt;
    std::ostringstream o;
    o << "[data]\n"
      << "root = " << c.data_root << "\n"
      << "image_size = " << c.image_size << "\n"
      << "num_classes = " << c.num_classes << "\n\n"
      << "[model]\n"
      << "channels = " << detail::join(c.model.encoder.channels) << "\n"
      << "token_dim = " << c.model.encoder.token_dim << "\n"
      << "num_heads = " << c.model.encoder.num_heads << "\n"
      << "mlp_ratio = " << fmt(c.model.encoder.mlp_ratio) << "\n"
      << "patch_size = " << c.model.encoder.patch_size << "\n"
      << "transformer = " << (c.model.transformer_branch ? "true" : "false") << "\n"
      << "acam = " << (c.model.acam_branch ? "true" : "false") << "\n\n"
      << "[loss]\n"
      << "lambda1 = " << fmt(c.loss.lambda1) << "\n"
      << "lambda2 = " << fmt(c.loss.lambda2) << "\n"
      << "lambda3 = " << fmt(c.loss.lambda3) << "\n"
      << "omega = " << detail::join(c.loss.omega) << "\n"
      << "alpha = " << (c.loss.fixed_alpha ? fmt(*c.loss.fixed_alpha) : std::string("dynamic")) << "\n\n"
      << "[train]\n"
      << "epochs = " << c.epochs << "\n"
      << "batch_size = " << c.batch_size << "\n"
      << "learning_rate = " << fmt(c.learning_rate) << "\n"
      << "weight_decay = " << fmt(c.weight_decay) << "\n"
      << "seed = " << c.seed << "\n"
      << "device = " << c.device << "\n\n"
      << "[eval]\n"
      << "bootstrap_resamples = " << c.eval.bootstrap_resamples << "\n"
      << "ci_level = " << fmt(c.eval.ci_level) << "\n";
    return o.str();
}

} // namespace scribformer
