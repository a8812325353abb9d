#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "scribformer/error.hpp"

namespace scribformer {

/// Label value marking a pixel that carries no scribble annotation.
inline constexpr std::uint8_t kUnlabeled = 255;

/// H×W float32 intensities, in [0,1] once normalized.
struct Image2D {
    torch::Tensor pixels;

    int64_t height() const { return pixels.size(0); }
    int64_t width() const { return pixels.size(1); }
};

/// H×W uint8 class indices; kUnlabeled marks pixels outside the scribbles.
struct ScribbleMask {
    torch::Tensor labels;

    int64_t labeled_count() const { return labels.ne(kUnlabeled).sum().item<int64_t>(); }
};

struct Sample {
    Image2D image;
    ScribbleMask scribble;
    std::optional<torch::Tensor> dense_mask; // H×W uint8, evaluation only
    std::string id;
};

inline void check_sample(const Sample& s) {
    if (s.image.pixels.dim() != 2 || s.scribble.labels.dim() != 2)
        throw ShapeMismatchError("sample '" + s.id + "': image and scribble must be 2-D");
    if (s.image.pixels.sizes() != s.scribble.labels.sizes())
        throw ShapeMismatchError("sample '" + s.id + "': image and scribble sizes differ");
    if (s.dense_mask && s.dense_mask->sizes() != s.image.pixels.sizes())
        throw ShapeMismatchError("sample '" + s.id + "': dense mask size differs from image");
}

/// Network outputs before softmax, B×K×H×W.
struct Logits {
    torch::Tensor data;
};

/// Per-pixel class distribution, B×K×H×W; sums to one over K.
struct ProbabilityMap {
    torch::Tensor data;
};

/// Stacks samples into the tensors consumed by the model.
struct Batch {
    torch::Tensor images;    // B×1×H×W float
    torch::Tensor scribbles; // B×H×W int64, kUnlabeled kept as 255
    std::vector<std::string> ids;
};

inline Batch make_batch(const std::vector<const Sample*>& samples) {
    Batch b;
    std::vector<torch::Tensor> imgs, scr;
    for (const auto* s : samples) {
        imgs.push_back(s->image.pixels.unsqueeze(0));
        scr.push_back(s->scribble.labels.to(torch::kLong));
        b.ids.push_back(s->id);
    }
    b.images = torch::stack(imgs);
    b.scribbles = torch::stack(scr);
    return b;
}

} // namespace scribformer
