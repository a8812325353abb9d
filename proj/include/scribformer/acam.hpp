#pragma once

// Attention-guided class activation maps (ACAMs).
//
// Each encoder stage feature c_i is gated by channel attention modulation and
// then spatial attention modulation, and a per-stage 1×1 head turns it into K
// class maps. Shallow maps (stages 1–4) are brought onto the stage-5 grid by
// the ACAM encoder E, whose layer i bridges the resolution gap between stage i
// and stage i+1.

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "scribformer/encoder.hpp"
#include "scribformer/error.hpp"

namespace scribformer {

struct ModulationParams {
    double mu = 0.0;
    double sigma = 1.0;
};

/// Lower bound on σ; keeps the gate finite for constant attention maps.
inline constexpr double kSigmaFloor = 1e-5;

/// Gaussian density of A under N(mu, sigma²).
inline torch::Tensor gaussian_density(const torch::Tensor& A, const ModulationParams& p) {
    if (!(p.sigma > 0.0)) throw ConfigError("gaussian modulation needs sigma > 0");
    const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi) * p.sigma);
    return norm * torch::exp(-(A - p.mu).pow(2) / (2.0 * p.sigma * p.sigma));
}

/// Density divided by its peak 1/(√(2π)σ), i.e. a gate in (0,1] equal to 1 at A = mu.
inline torch::Tensor gaussian_modulation(const torch::Tensor& A, const ModulationParams& p) {
    return gaussian_density(A, p) * (std::sqrt(2.0 * std::numbers::pi) * p.sigma);
}

namespace detail {
/// Gate with per-sample statistics: mu and sigma are reduced over `dims`.
inline torch::Tensor adaptive_gate(const torch::Tensor& A, std::vector<int64_t> dims) {
    auto mu = A.mean(dims, true);
    auto var = (A - mu).pow(2).mean(dims, true);
    auto sigma = var.clamp_min(kSigmaFloor * kSigmaFloor).sqrt();
    return torch::exp(-(A - mu).pow(2) / (2.0 * sigma.pow(2)));
}
} // namespace detail

/// Channel attention: spatial average pooling, a 1-D convolution across the
/// channel axis, then a Gaussian gate centred on the mean channel response.
struct ChannelModulationImpl : torch::nn::Module {
    explicit ChannelModulationImpl(int64_t kernel = 3) {
        conv = register_module(
            "conv", torch::nn::Conv1d(torch::nn::Conv1dOptions(1, 1, kernel).padding(kernel / 2)));
    }

    torch::Tensor attention(const torch::Tensor& f) {
        auto pooled = f.mean({2, 3}).unsqueeze(1); // B×1×C
        return conv(pooled).squeeze(1);            // B×C
    }
    torch::Tensor gate(const torch::Tensor& f) { return detail::adaptive_gate(attention(f), {1}); }
    torch::Tensor forward(const torch::Tensor& f) { return f * gate(f).unsqueeze(-1).unsqueeze(-1); }

    torch::nn::Conv1d conv{nullptr};
};
TORCH_MODULE(ChannelModulation);

/// Spatial attention: channel average pooling and a 2-D convolution, gated
/// around the mean spatial response.
struct SpatialModulationImpl : torch::nn::Module {
    explicit SpatialModulationImpl(int64_t kernel = 7) {
        conv = register_module(
            "conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(1, 1, kernel).padding(kernel / 2)));
    }

    torch::Tensor attention(const torch::Tensor& f) { return conv(f.mean(1, true)); } // B×1×H×W
    torch::Tensor gate(const torch::Tensor& f) { return detail::adaptive_gate(attention(f), {1, 2, 3}); }
    torch::Tensor forward(const torch::Tensor& f) { return f * gate(f); }

    torch::nn::Conv2d conv{nullptr};
};
TORCH_MODULE(SpatialModulation);

/// Per-stage generator: channel modulation, spatial modulation, 1×1 CAM head.
struct AcamHeadImpl : torch::nn::Module {
    AcamHeadImpl(int64_t channels, int64_t num_classes) {
        channel = register_module("channel", ChannelModulation());
        spatial = register_module("spatial", SpatialModulation());
        cam = register_module("cam", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, num_classes, 1)));
    }
    torch::Tensor forward(const torch::Tensor& f) { return cam(spatial(channel(f))); }

    ChannelModulation channel{nullptr};
    SpatialModulation spatial{nullptr};
    torch::nn::Conv2d cam{nullptr};
};
TORCH_MODULE(AcamHead);

/// Raw ACAM logits per stage plus the four shallow maps aligned to stage 5.
struct AcamSet {
    std::array<torch::Tensor, 5> maps;    // B×K×h_i×w_i
    std::array<torch::Tensor, 4> aligned; // B×K×h_5×w_5
};

struct AcamBranchImpl : torch::nn::Module {
    AcamBranchImpl(const std::array<int64_t, 5>& channels, int64_t num_classes) {
        for (int i = 0; i < 5; ++i)
            heads.push_back(register_module("head" + std::to_string(i + 1),
                                            AcamHead(channels[static_cast<size_t>(i)], num_classes)));
        for (int i = 0; i < 4; ++i) {
            const auto stride = kStageStride[static_cast<size_t>(i + 1)];
            encoder.push_back(register_module(
                "E" + std::to_string(i + 1),
                torch::nn::Conv2d(torch::nn::Conv2dOptions(num_classes, num_classes, 3).stride(stride).padding(1))));
        }
    }

    /// ACAM of stage (1…5) from that stage's feature map.
    torch::Tensor generate(const torch::Tensor& f, int stage) {
        if (stage < 1 || stage > 5) throw ContractViolation("ACAM stage must lie in 1…5");
        return heads[static_cast<size_t>(stage - 1)](f);
    }

    /// Runs ACAM-encoder layers stage…4 so the map lands on the stage-5 grid.
    torch::Tensor align(const torch::Tensor& acam, int stage) {
        if (stage < 1 || stage > 4)
            throw ContractViolation("acam_align takes stages 1…4; stage " + std::to_string(stage) +
                                    " is the alignment target or out of range");
        auto x = acam;
        for (int i = stage; i <= 4; ++i) x = encoder[static_cast<size_t>(i - 1)](x);
        return x;
    }

    /// Number of encoder layers a stage passes through.
    static int align_depth(int stage) { return 5 - stage; }

    AcamSet forward(const EncoderState& st) {
        AcamSet s;
        for (int i = 1; i <= 5; ++i) s.maps[static_cast<size_t>(i - 1)] = generate(st.conv_features[static_cast<size_t>(i - 1)], i);
        for (int i = 1; i <= 4; ++i) s.aligned[static_cast<size_t>(i - 1)] = align(s.maps[static_cast<size_t>(i - 1)], i);
        return s;
    }

    std::vector<AcamHead> heads;
    std::vector<torch::nn::Conv2d> encoder;
};
TORCH_MODULE(AcamBranch);

/// ACAM filter F.
inline torch::Tensor acam_filter(const torch::Tensor& a) { return torch::sigmoid(a); }

/// Hard 0/1 target from the filtered deep ACAM; values of exactly 0.5 map to 1.
/// The result carries no gradient.
inline torch::Tensor binarize_target(const torch::Tensor& filtered) {
    return filtered.detach().ge(0.5).to(filtered.scalar_type());
}

} // namespace scribformer
