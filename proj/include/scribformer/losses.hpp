#pragma once

// Mixed supervision: partial cross-entropy on scribbles, Dice against the
// dynamically mixed hard pseudo label, and ACAM consistency between shallow
// and deep stages, combined by a weighted sum.

#include <array>
#include <optional>
#include <string>

#include <torch/torch.h>

#include "scribformer/acam.hpp"
#include "scribformer/decoders.hpp"
#include "scribformer/error.hpp"
#include "scribformer/types.hpp"

namespace scribformer {

struct LossWeights {
    double lambda1 = 1.0;
    double lambda2 = 0.5;
    double lambda3 = 0.1;
    std::array<double, 4> omega{0.25, 0.5, 0.75, 1.0};
    std::optional<double> fixed_alpha; // unset: alpha ~ U(0,1) every step

    void validate() const {
        if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0) throw ConfigError("loss lambdas must be nonnegative");
        for (double w : omega)
            if (w < 0) throw ConfigError("omega weights must be nonnegative");
        if (fixed_alpha && !(*fixed_alpha > 0.0 && *fixed_alpha < 1.0))
            throw ConfigError("fixed alpha must lie in (0,1)");
    }
};

struct LossReport {
    double l_ss = 0;
    double l_pl = 0;
    double l_acam = 0;
    double l_total = 0;
    double alpha = 0;
};

inline constexpr double kLogClamp = 1e-12;
inline constexpr double kDiceEps = 1e-5;

namespace detail {
inline void check_scribble(const torch::Tensor& labels, int64_t K) {
    auto bad = labels.ge(K).logical_and(labels.ne(kUnlabeled)).logical_or(labels.lt(0));
    if (bad.any().item<bool>())
        throw ValidationError("scribble contains a class index >= K=" + std::to_string(K));
}
} // namespace detail

/// Cross-entropy over scribble-labelled pixels only, averaged over |Ω_l|.
/// `labels` is B×H×W (or H×W) with kUnlabeled for unannotated pixels.
inline torch::Tensor partial_cross_entropy(const ProbabilityMap& y, const torch::Tensor& labels) {
    auto probs = y.data;
    auto lab = labels.to(torch::kLong);
    if (probs.dim() == 3) probs = probs.unsqueeze(0);
    if (lab.dim() == 2) lab = lab.unsqueeze(0);
    const auto K = probs.size(1);
    if (lab.sizes() != torch::IntArrayRef({probs.size(0), probs.size(2), probs.size(3)}))
        throw ShapeMismatchError("partial_cross_entropy: scribble and prediction sizes differ");
    detail::check_scribble(lab, K);

    auto labeled = lab.ne(kUnlabeled);
    const auto count = labeled.sum().item<int64_t>();
    if (count == 0) return (probs * 0).sum();
    auto idx = torch::where(labeled, lab, torch::zeros_like(lab)).unsqueeze(1);
    auto logp = probs.clamp_min(kLogClamp).log().gather(1, idx).squeeze(1);
    return -(logp * labeled.to(logp.scalar_type())).sum() / static_cast<double>(count);
}

inline torch::Tensor scribble_loss(const ProbabilityMap& y_cnn, const ProbabilityMap& y_trans,
                                   const torch::Tensor& labels) {
    return (partial_cross_entropy(y_cnn, labels) + partial_cross_entropy(y_trans, labels)) / 2.0;
}

/// Y = argmax(α·y_cnn + (1−α)·y_trans), returned as a constant B×H×W label map.
inline torch::Tensor mix_pseudo_label(const ProbabilityMap& y_cnn, const ProbabilityMap& y_trans, double alpha) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ContractViolation("mixing weight alpha must lie in (0,1)");
    torch::NoGradGuard no_grad;
    auto mixed = alpha * y_cnn.data.detach() + (1.0 - alpha) * y_trans.data.detach();
    return predict_mask(ProbabilityMap{mixed});
}

/// Soft Dice loss against a hard label map, class-averaged, sums over batch and pixels.
inline torch::Tensor dice_loss(const ProbabilityMap& y, const torch::Tensor& target) {
    const auto K = y.data.size(1);
    auto onehot = torch::one_hot(target.to(torch::kLong), K).permute({0, 3, 1, 2}).to(y.data.scalar_type());
    const std::vector<int64_t> dims{0, 2, 3};
    auto inter = (y.data * onehot).sum(dims);
    auto denom = y.data.sum(dims) + onehot.sum(dims);
    auto dice = (2.0 * inter + kDiceEps) / (denom + kDiceEps);
    return 1.0 - dice.mean();
}

inline torch::Tensor pseudo_label_loss(const ProbabilityMap& y_cnn, const ProbabilityMap& y_trans,
                                       const torch::Tensor& pseudo) {
    return (dice_loss(y_cnn, pseudo) + dice_loss(y_trans, pseudo)) / 2.0;
}

/// Σ_i ω_i · BCE(F(aligned_i), binarize(F(deep))). BCE is averaged over every
/// element (batch, class, pixel). The deep target is constant.
inline torch::Tensor acam_consistency_loss(const std::array<torch::Tensor, 4>& aligned, const torch::Tensor& deep,
                                           const std::array<double, 4>& omega) {
    auto target = binarize_target(acam_filter(deep));
    torch::Tensor total;
    for (size_t i = 0; i < 4; ++i) {
        if (aligned[i].sizes() != target.sizes())
            throw ShapeMismatchError("aligned ACAM " + std::to_string(i + 1) + " does not match the stage-5 grid");
        auto term = omega[i] * torch::binary_cross_entropy_with_logits(aligned[i], target);
        total = total.defined() ? total + term : term;
    }
    return total;
}

inline torch::Tensor acam_consistency_loss(const AcamSet& set, const std::array<double, 4>& omega) {
    return acam_consistency_loss(set.aligned, set.maps[4], omega);
}

struct LossTerms {
    torch::Tensor ss, pl, acam; // acam may be undefined (branch off)
    double alpha = 0;
};

struct TotalLoss {
    torch::Tensor value;
    LossReport report;
};

/// λ1·L_ss + λ2·L_pl + λ3·L_acam, with the scalar report computed from the
/// same component values.
inline TotalLoss total_loss(const LossTerms& t, const LossWeights& w) {
    TotalLoss out;
    out.value = w.lambda1 * t.ss + w.lambda2 * t.pl;
    if (t.acam.defined()) out.value = out.value + w.lambda3 * t.acam;
    auto& r = out.report;
    r.l_ss = t.ss.item<double>();
    r.l_pl = t.pl.item<double>();
    r.l_acam = t.acam.defined() ? t.acam.item<double>() : 0.0;
    r.l_total = w.lambda1 * r.l_ss + w.lambda2 * r.l_pl + w.lambda3 * r.l_acam;
    r.alpha = t.alpha;
    return out;
}

} // namespace scribformer
