#pragma once

#include <optional>

#include <torch/torch.h>

#include "scribformer/acam.hpp"
#include "scribformer/decoders.hpp"
#include "scribformer/encoder.hpp"

namespace scribformer {

struct ModelConfig {
    EncoderConfig encoder;
    int64_t num_classes = 4;
    bool transformer_branch = true; // off: tokens zero, y_trans := y_cnn
    bool acam_branch = true;

    void validate() const {
        encoder.validate();
        if (num_classes < 2) throw ConfigError("num_classes must be at least 2");
    }
};

struct ModelOutput {
    Logits cnn;
    Logits trans;
    std::optional<AcamSet> acams;
    EncoderState state;
};

/// Triple-branch network: hybrid encoder, CNN and Transformer decoders, ACAM branch.
struct ScribFormerImpl : torch::nn::Module {
    explicit ScribFormerImpl(const ModelConfig& cfg) : cfg(cfg) {
        cfg.validate();
        encoder = register_module("encoder", HybridEncoder(cfg.encoder));
        cnn_decoder = register_module("cnn_decoder", CnnDecoder(cfg.encoder.channels, cfg.num_classes));
        trans_decoder = register_module("trans_decoder", TransformerDecoder(cfg.encoder, cfg.num_classes));
        acam = register_module("acam", AcamBranch(cfg.encoder.channels, cfg.num_classes));
        encoder->set_transformer_enabled(cfg.transformer_branch);
    }

    ModelOutput forward(const torch::Tensor& images, bool with_acams = true) {
        ModelOutput out;
        out.state = encoder(images);
        const auto H = images.size(2), W = images.size(3);
        out.cnn = cnn_decoder(out.state, H, W);
        out.trans = cfg.transformer_branch ? trans_decoder(out.state, H, W) : out.cnn;
        if (cfg.acam_branch && with_acams) out.acams = acam(out.state);
        return out;
    }

    /// Inference distribution: mean of the two branch softmaxes.
    ProbabilityMap predict_probs(const torch::Tensor& images) {
        auto out = forward(images, false);
        if (!cfg.transformer_branch) return softmax_probs(out.cnn);
        return {(softmax_probs(out.cnn).data + softmax_probs(out.trans).data) / 2.0};
    }

    ModelConfig cfg;
    HybridEncoder encoder{nullptr};
    CnnDecoder cnn_decoder{nullptr};
    TransformerDecoder trans_decoder{nullptr};
    AcamBranch acam{nullptr};
};
TORCH_MODULE(ScribFormer);

} // namespace scribformer
