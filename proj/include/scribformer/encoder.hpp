#pragma once

// Hybrid CNN-Transformer encoder. A convolutional pyramid and a token stream
// run side by side; Feature Coupling Units (FCUs) exchange information
// between them at every paired stage.
//
// Resolution schedule for an S×S input:
//   c1 S/2, c2 S/4 (stem), c3 S/8, c4 S/16, c5 S/16 (paired stages)
//   tokens on the (S/4)/patch grid, i.e. S/16 for the default patch of 4.

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "scribformer/error.hpp"

namespace scribformer {

struct EncoderConfig {
    std::array<int64_t, 5> channels{16, 32, 64, 128, 128};
    int64_t token_dim = 128;
    int64_t num_heads = 4;
    double mlp_ratio = 4.0;
    int64_t patch_size = 4;
    int64_t in_channels = 1;
    int64_t base_image_size = 64; // grid of the learned positional embedding is base/(4·patch)

    void validate() const {
        for (auto c : channels)
            if (c <= 0) throw ConfigError("encoder channels must be positive");
        for (size_t i = 1; i < channels.size(); ++i)
            if (channels[i] < channels[i - 1]) throw ConfigError("encoder channels must be nondecreasing");
        if (token_dim <= 0 || num_heads <= 0 || token_dim % num_heads != 0)
            throw ConfigError("token_dim must be a positive multiple of num_heads");
        if (mlp_ratio <= 0) throw ConfigError("mlp_ratio must be positive");
        if (patch_size <= 0) throw ConfigError("patch_size must be positive");
        if (base_image_size % (4 * patch_size) != 0)
            throw ConfigError("base_image_size must be divisible by 4·patch_size");
    }
};

/// Stride of each conv stage relative to its predecessor (c1 relative to the input).
inline constexpr std::array<int64_t, 5> kStageStride{2, 2, 2, 2, 1};

/// Spatial downsampling factor of stage t (1-based).
inline int64_t stage_scale(int stage) {
    int64_t f = 1;
    for (int t = 0; t < stage; ++t) f *= kStageStride[t];
    return f;
}

struct TokenSequence {
    torch::Tensor tokens; // B×N×D
    int64_t grid_h = 0;
    int64_t grid_w = 0;
};

struct EncoderState {
    std::array<torch::Tensor, 5> conv_features; // c1…c5, B×C×H×W
    torch::Tensor final_tokens;                 // B×N×D
    std::vector<torch::Tensor> stage_tokens;    // one B×N×D entry per paired stage
    int64_t grid_h = 0;
    int64_t grid_w = 0;
};

// ---------------------------------------------------------------------------
// Building blocks
// ---------------------------------------------------------------------------

/// Conv → BatchNorm → ReLU. Reflect padding keeps border pixels from looking
/// like a dark frame, which zero padding would imply for [0,1] images.
struct ConvBnReluImpl : torch::nn::Module {
    ConvBnReluImpl(int64_t in, int64_t out, int64_t kernel = 3, int64_t stride = 1) {
        conv = register_module("conv", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, kernel)
                                                             .stride(stride)
                                                             .padding(kernel / 2)
                                                             .padding_mode(torch::kReflect)
                                                             .bias(false)));
        bn = register_module("bn", torch::nn::BatchNorm2d(out));
    }
    torch::Tensor forward(const torch::Tensor& x) { return torch::relu(bn(conv(x))); }

    torch::nn::Conv2d conv{nullptr};
    torch::nn::BatchNorm2d bn{nullptr};
};
TORCH_MODULE(ConvBnRelu);

inline ConvBnRelu conv_bn_relu(int64_t in, int64_t out, int64_t kernel = 3, int64_t stride = 1) {
    return ConvBnRelu(in, out, kernel, stride);
}

/// ResNet bottleneck: 1×1 reduce, 3×3 spatial (carries the stride), 1×1 expand,
/// residual add, ReLU. A projection shortcut is used when the shape changes.
struct BottleneckImpl : torch::nn::Module {
    BottleneckImpl(int64_t in, int64_t out, int64_t stride) {
        const int64_t mid = std::max<int64_t>(1, out / 4);
        reduce = register_module("reduce", conv_bn_relu(in, mid, 1));
        spatial = register_module("spatial", conv_bn_relu(mid, mid, 3, stride));
        expand = register_module(
            "expand", torch::nn::Conv2d(torch::nn::Conv2dOptions(mid, out, 1).bias(false)));
        expand_bn = register_module("expand_bn", torch::nn::BatchNorm2d(out));
        if (stride != 1 || in != out) {
            shortcut = register_module(
                "shortcut", torch::nn::Sequential(
                                torch::nn::Conv2d(torch::nn::Conv2dOptions(in, out, 1).stride(stride).bias(false)),
                                torch::nn::BatchNorm2d(out)));
        }
    }

    torch::Tensor forward(const torch::Tensor& x) {
        auto r = expand_bn(expand(spatial->forward(reduce->forward(x))));
        auto s = shortcut.is_empty() ? x : shortcut->forward(x);
        return torch::relu(r + s);
    }

    ConvBnRelu reduce{nullptr}, spatial{nullptr};
    torch::nn::Sequential shortcut{nullptr};
    torch::nn::Conv2d expand{nullptr};
    torch::nn::BatchNorm2d expand_bn{nullptr};
};
TORCH_MODULE(Bottleneck);

/// One conv stage: a strided entry bottleneck followed by a fuse bottleneck.
/// Inside the encoder the FCU-up features are added between the two.
struct ConvStageImpl : torch::nn::Module {
    ConvStageImpl(int64_t in, int64_t out, int64_t stride) {
        entry = register_module("entry", Bottleneck(in, out, stride));
        fuse = register_module("fuse", Bottleneck(out, out, 1));
    }
    torch::Tensor forward(const torch::Tensor& x) { return fuse(entry(x)); }

    Bottleneck entry{nullptr}, fuse{nullptr};
};
TORCH_MODULE(ConvStage);

/// Non-overlapping patch flattening + linear projection (a stride-p conv),
/// plus a learned positional embedding resampled to the actual grid.
struct PatchProjectionImpl : torch::nn::Module {
    PatchProjectionImpl(int64_t in, int64_t dim, int64_t patch, int64_t base_grid) : patch(patch) {
        proj = register_module("proj", torch::nn::Conv2d(torch::nn::Conv2dOptions(in, dim, patch).stride(patch)));
        pos_embed = register_parameter("pos_embed", torch::randn({1, dim, base_grid, base_grid}) * 0.02);
    }

    TokenSequence forward(const torch::Tensor& f) {
        if (f.size(2) % patch != 0 || f.size(3) % patch != 0)
            throw ConfigError("feature map " + std::to_string(f.size(2)) + "×" + std::to_string(f.size(3)) +
                              " is not divisible by patch size " + std::to_string(patch));
        auto x = proj(f); // B×D×gh×gw
        auto pos = pos_embed;
        if (pos.size(2) != x.size(2) || pos.size(3) != x.size(3)) {
            namespace F = torch::nn::functional;
            pos = F::interpolate(pos, F::InterpolateFuncOptions()
                                          .size(std::vector<int64_t>{x.size(2), x.size(3)})
                                          .mode(torch::kBilinear)
                                          .align_corners(false));
        }
        x = x + pos;
        return {x.flatten(2).transpose(1, 2), x.size(2), x.size(3)};
    }

    int64_t patch;
    torch::nn::Conv2d proj{nullptr};
    torch::Tensor pos_embed;
};
TORCH_MODULE(PatchProjection);

/// Pre-norm Transformer block: x + MHSA(LN(x)), then x + MLP(LN(x)).
struct TransformerBlockImpl : torch::nn::Module {
    TransformerBlockImpl(int64_t dim, int64_t heads, double mlp_ratio) : heads(heads) {
        const auto hidden = static_cast<int64_t>(std::llround(dim * mlp_ratio));
        norm1 = register_module("norm1", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
        qkv = register_module("qkv", torch::nn::Linear(dim, 3 * dim));
        proj = register_module("proj", torch::nn::Linear(dim, dim));
        norm2 = register_module("norm2", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
        fc1 = register_module("fc1", torch::nn::Linear(dim, hidden));
        fc2 = register_module("fc2", torch::nn::Linear(hidden, dim));
    }

    /// Softmax attention weights (B×heads×N×N) for already-normalized tokens.
    torch::Tensor attention_weights(const torch::Tensor& x_norm) {
        auto [q, k, v] = split_heads(x_norm);
        return attention_from(q, k);
    }

    torch::Tensor forward(const torch::Tensor& x) {
        const auto B = x.size(0), N = x.size(1), D = x.size(2);
        auto [q, k, v] = split_heads(norm1(x));
        auto attn = attention_from(q, k);
        auto mixed = torch::matmul(attn, v).transpose(1, 2).reshape({B, N, D});
        auto h = x + proj(mixed);
        return h + fc2(torch::gelu(fc1(norm2(h))));
    }

    int64_t heads;
    torch::nn::LayerNorm norm1{nullptr}, norm2{nullptr};
    torch::nn::Linear qkv{nullptr}, proj{nullptr}, fc1{nullptr}, fc2{nullptr};

private:
    std::tuple<torch::Tensor, torch::Tensor, torch::Tensor> split_heads(const torch::Tensor& x) {
        const auto B = x.size(0), N = x.size(1), D = x.size(2);
        auto t = qkv(x).reshape({B, N, 3, heads, D / heads}).permute({2, 0, 3, 1, 4});
        return {t[0], t[1], t[2]};
    }
    static torch::Tensor attention_from(const torch::Tensor& q, const torch::Tensor& k) {
        const double scale = 1.0 / std::sqrt(static_cast<double>(q.size(-1)));
        return torch::softmax(torch::matmul(q, k.transpose(-2, -1)) * scale, -1);
    }
};
TORCH_MODULE(TransformerBlock);

/// Window of the average pooling that maps a conv grid onto the token grid.
inline int64_t fcu_pool_window(int64_t conv_extent, int64_t grid_extent) {
    if (grid_extent <= 0 || conv_extent % grid_extent != 0)
        throw ContractViolation("conv extent " + std::to_string(conv_extent) +
                                " is not a multiple of token grid extent " + std::to_string(grid_extent));
    return conv_extent / grid_extent;
}

/// FCU, conv → tokens: 1×1 conv alignment, average pooling onto the token
/// grid, LayerNorm, GELU; added to the incoming tokens.
struct FcuDownImpl : torch::nn::Module {
    FcuDownImpl(int64_t channels, int64_t dim) {
        align = register_module("align", torch::nn::Conv2d(torch::nn::Conv2dOptions(channels, dim, 1)));
        norm = register_module("norm", torch::nn::LayerNorm(torch::nn::LayerNormOptions({dim})));
    }

    TokenSequence forward(const torch::Tensor& f, const TokenSequence& t) {
        const auto wh = fcu_pool_window(f.size(2), t.grid_h);
        const auto ww = fcu_pool_window(f.size(3), t.grid_w);
        auto x = torch::avg_pool2d(align(f), {wh, ww}, {wh, ww});
        x = torch::gelu(norm(x.flatten(2).transpose(1, 2)));
        return {t.tokens + x, t.grid_h, t.grid_w};
    }

    torch::nn::Conv2d align{nullptr};
    torch::nn::LayerNorm norm{nullptr};
};
TORCH_MODULE(FcuDown);

/// FCU, tokens → conv: reshape to the grid, 1×1 conv alignment, BatchNorm,
/// ReLU, bilinear interpolation to the target size. The caller adds the result.
struct FcuUpImpl : torch::nn::Module {
    FcuUpImpl(int64_t dim, int64_t channels) {
        align = register_module("align", torch::nn::Conv2d(torch::nn::Conv2dOptions(dim, channels, 1)));
        bn = register_module("bn", torch::nn::BatchNorm2d(channels));
    }

    torch::Tensor forward(const TokenSequence& t, int64_t out_h, int64_t out_w) {
        const auto B = t.tokens.size(0), D = t.tokens.size(2);
        auto x = t.tokens.transpose(1, 2).reshape({B, D, t.grid_h, t.grid_w});
        x = torch::relu(bn(align(x)));
        if (x.size(2) == out_h && x.size(3) == out_w) return x;
        namespace F = torch::nn::functional;
        return F::interpolate(x, F::InterpolateFuncOptions()
                                     .size(std::vector<int64_t>{out_h, out_w})
                                     .mode(torch::kBilinear)
                                     .align_corners(false));
    }

    torch::nn::Conv2d align{nullptr};
    torch::nn::BatchNorm2d bn{nullptr};
};
TORCH_MODULE(FcuUp);

// ---------------------------------------------------------------------------
// Encoder
// ---------------------------------------------------------------------------

/// Stem: conv embedding 1 (c1, S/2) and conv embedding 2 (c2, S/4).
struct StemImpl : torch::nn::Module {
    StemImpl(int64_t in, int64_t c1, int64_t c2) {
        embed1 = register_module("embed1", conv_bn_relu(in, c1, 3, 2));
        embed2 = register_module("embed2", conv_bn_relu(c1, c2, 3, 2));
        embed2b = register_module("embed2b", conv_bn_relu(c2, c2, 3, 1));
    }
    std::pair<torch::Tensor, torch::Tensor> forward(const torch::Tensor& x) {
        auto c1 = embed1->forward(x);
        auto c2 = embed2b->forward(embed2->forward(c1));
        return {c1, c2};
    }
    ConvBnRelu embed1{nullptr}, embed2{nullptr}, embed2b{nullptr};
};
TORCH_MODULE(Stem);

struct HybridEncoderImpl : torch::nn::Module {
    explicit HybridEncoderImpl(const EncoderConfig& cfg) : cfg(cfg) {
        cfg.validate();
        const auto& C = cfg.channels;
        stem = register_module("stem", Stem(cfg.in_channels, C[0], C[1]));
        projection = register_module(
            "projection", PatchProjection(C[1], cfg.token_dim, cfg.patch_size,
                                          cfg.base_image_size / (4 * cfg.patch_size)));
        for (int s = 0; s < 3; ++s) {
            const auto i = static_cast<size_t>(s);
            const auto name = std::to_string(s);
            conv.push_back(register_module("conv" + name, ConvStage(C[i + 1], C[i + 2], kStageStride[i + 2])));
            down.push_back(register_module("fcu_down" + name, FcuDown(C[i + 2], cfg.token_dim)));
            blocks.push_back(register_module("block" + name,
                                             TransformerBlock(cfg.token_dim, cfg.num_heads, cfg.mlp_ratio)));
            up.push_back(register_module("fcu_up" + name, FcuUp(cfg.token_dim, C[i + 2])));
        }
    }

    /// Disabled: tokens stay zero and no FCU exchange happens (pure conv pyramid).
    void set_transformer_enabled(bool on) { transformer_enabled = on; }

    EncoderState forward(const torch::Tensor& images) {
        if (images.dim() != 4 || images.size(2) % 32 != 0 || images.size(3) % 32 != 0)
            throw ValidationError("encoder input must be B×C×H×W with H and W divisible by 32");
        EncoderState st;
        auto [c1, c2] = stem(images);
        st.conv_features[0] = c1;
        st.conv_features[1] = c2;

        TokenSequence t;
        if (transformer_enabled) {
            t = projection(c2);
        } else {
            const auto g = 4 * cfg.patch_size;
            t = {torch::zeros({images.size(0), (images.size(2) / g) * (images.size(3) / g), cfg.token_dim},
                              images.options()),
                 images.size(2) / g, images.size(3) / g};
        }
        torch::Tensor f = c2;
        for (size_t s = 0; s < 3; ++s) {
            f = conv[s]->entry(f);
            if (transformer_enabled) {
                t = down[s](f, t);
                t.tokens = blocks[s](t.tokens);
                f = f + up[s](t, f.size(2), f.size(3));
            }
            f = conv[s]->fuse(f);
            st.conv_features[s + 2] = f;
            st.stage_tokens.push_back(t.tokens);
        }
        st.final_tokens = t.tokens;
        st.grid_h = t.grid_h;
        st.grid_w = t.grid_w;
        return st;
    }

    EncoderConfig cfg;
    bool transformer_enabled = true;
    Stem stem{nullptr};
    PatchProjection projection{nullptr};
    std::vector<ConvStage> conv;
    std::vector<FcuDown> down;
    std::vector<TransformerBlock> blocks;
    std::vector<FcuUp> up;
};
TORCH_MODULE(HybridEncoder);

} // namespace scribformer
