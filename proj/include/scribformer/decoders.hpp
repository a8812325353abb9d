#pragma once

// The two segmentation heads sharing one encoder state: a UNet-style CNN
// decoder over c1…c5 and a Transformer decoder that upsamples the fused
// per-stage token embeddings.

#include <cmath>
#include <vector>

#include <torch/torch.h>

#include "scribformer/encoder.hpp"
#include "scribformer/types.hpp"

namespace scribformer {

namespace detail {
inline torch::Tensor upsample_to(const torch::Tensor& x, int64_t h, int64_t w) {
    if (x.size(2) == h && x.size(3) == w) return x;
    namespace F = torch::nn::functional;
    return F::interpolate(x, F::InterpolateFuncOptions()
                                 .size(std::vector<int64_t>{h, w})
                                 .mode(torch::kBilinear)
                                 .align_corners(false));
}
} // namespace detail

struct DoubleConvImpl : torch::nn::Module {
    DoubleConvImpl(int64_t in, int64_t out) {
        first = register_module("first", conv_bn_relu(in, out));
        second = register_module("second", conv_bn_relu(out, out));
    }
    torch::Tensor forward(const torch::Tensor& x) { return second(first(x)); }
    ConvBnRelu first{nullptr}, second{nullptr};
};
TORCH_MODULE(DoubleConv);

/// At each scale the running decoder feature is concatenated with the last
/// conv feature of the matching encoder stage, convolved, then upsampled to
/// the next stage's resolution. A 1×1 head maps to K classes at full size.
struct CnnDecoderImpl : torch::nn::Module {
    CnnDecoderImpl(const std::array<int64_t, 5>& C, int64_t num_classes) {
        // Level i consumes the running feature plus skip c_{i+1}, for i = 3…0.
        int64_t running = C[4];
        for (int i = 3; i >= 0; --i) {
            const auto idx = static_cast<size_t>(i);
            blocks.push_back(register_module("block" + std::to_string(i), DoubleConv(running + C[idx], C[idx])));
            running = C[idx];
        }
        refine = register_module("refine", conv_bn_relu(running, running));
        head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(running, num_classes, 1)));
    }

    Logits forward(const EncoderState& st, int64_t out_h, int64_t out_w) {
        auto x = st.conv_features[4];
        for (size_t j = 0; j < blocks.size(); ++j) {
            const auto& skip = st.conv_features[3 - j];
            x = detail::upsample_to(x, skip.size(2), skip.size(3));
            x = blocks[j](torch::cat({x, skip}, 1));
        }
        x = refine->forward(detail::upsample_to(x, out_h, out_w));
        return {head(x)};
    }

    std::vector<DoubleConv> blocks;
    ConvBnRelu refine{nullptr};
    torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(CnnDecoder);

/// Per-stage token embeddings share one resolution; they are layer-normalized,
/// summed, put back on the grid and upsampled by interpolate+conv blocks.
struct TransformerDecoderImpl : torch::nn::Module {
    TransformerDecoderImpl(const EncoderConfig& cfg, int64_t num_classes, int64_t num_stages = 3) {
        for (int64_t s = 0; s < num_stages; ++s)
            norms.push_back(register_module("norm" + std::to_string(s),
                                            torch::nn::LayerNorm(torch::nn::LayerNormOptions({cfg.token_dim}))));
        const auto& C = cfg.channels;
        entry = register_module("entry", conv_bn_relu(cfg.token_dim, C[3], 1));
        // One 2× step per halving between the token grid and the input.
        const auto steps = static_cast<int>(std::lround(std::log2(static_cast<double>(4 * cfg.patch_size))));
        int64_t running = C[3];
        for (int s = 0; s < steps; ++s) {
            const int64_t out = C[static_cast<size_t>(std::max(0, 2 - s))];
            ups.push_back(register_module("up" + std::to_string(s), conv_bn_relu(running, out)));
            running = out;
        }
        head = register_module("head", torch::nn::Conv2d(torch::nn::Conv2dOptions(running, num_classes, 1)));
    }

    Logits forward(const EncoderState& st, int64_t out_h, int64_t out_w) {
        if (st.stage_tokens.size() != norms.size())
            throw ContractViolation("transformer decoder expects " + std::to_string(norms.size()) +
                                    " stage token sequences");
        torch::Tensor fused;
        for (size_t s = 0; s < norms.size(); ++s) {
            auto n = norms[s](st.stage_tokens[s]);
            fused = fused.defined() ? fused + n : n;
        }
        const auto B = fused.size(0), D = fused.size(2);
        auto x = entry->forward(fused.transpose(1, 2).reshape({B, D, st.grid_h, st.grid_w}));
        for (auto& up : ups) x = up->forward(detail::upsample_to(x, x.size(2) * 2, x.size(3) * 2));
        return {head(detail::upsample_to(x, out_h, out_w))};
    }

    std::vector<torch::nn::LayerNorm> norms;
    ConvBnRelu entry{nullptr};
    std::vector<ConvBnRelu> ups;
    torch::nn::Conv2d head{nullptr};
};
TORCH_MODULE(TransformerDecoder);

/// Per-pixel softmax over the class axis with max subtraction.
inline ProbabilityMap softmax_probs(const Logits& l) {
    auto shifted = l.data - std::get<0>(l.data.max(1, true));
    auto e = shifted.exp();
    return {e / e.sum(1, true)};
}

/// Per-pixel argmax (B×H×W int64); ties go to the lowest class index.
inline torch::Tensor predict_mask(const ProbabilityMap& p) {
    const auto K = p.data.size(1);
    auto best = p.data.select(1, 0).clone();
    auto idx = torch::zeros_like(best, torch::kLong);
    for (int64_t k = 1; k < K; ++k) {
        auto v = p.data.select(1, k);
        auto better = v > best;
        best = torch::where(better, v, best);
        idx = torch::where(better, torch::full_like(idx, k), idx);
    }
    return idx;
}

} // namespace scribformer
