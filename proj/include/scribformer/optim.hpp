#pragma once

// AdamW with fully decoupled weight decay: every step multiplies parameters by
// (1 − weight_decay) independently of the learning rate, then applies the
// bias-corrected Adam update scaled by the learning rate.

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include <torch/torch.h>

#include "scribformer/error.hpp"

namespace scribformer {

struct AdamWOptions {
    double learning_rate = 1e-3;
    double weight_decay = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamW {
public:
    AdamW(std::vector<std::pair<std::string, torch::Tensor>> named_params, AdamWOptions opt)
        : params_(std::move(named_params)), opt_(opt) {
        if (opt_.learning_rate < 0) throw ConfigError("learning rate must be nonnegative");
        if (opt_.weight_decay < 0 || opt_.weight_decay >= 1) throw ConfigError("weight decay must lie in [0,1)");
        for (auto& [name, p] : params_) {
            exp_avg_.push_back(torch::zeros_like(p));
            exp_avg_sq_.push_back(torch::zeros_like(p));
        }
    }

    void zero_grad() {
        for (auto& [name, p] : params_)
            if (p.grad().defined()) p.mutable_grad().zero_();
    }

    /// Parameters without a gradient (unused this step) are left untouched.
    void step() {
        torch::NoGradGuard no_grad;
        ++steps_;
        const double bc1 = 1.0 - std::pow(opt_.beta1, static_cast<double>(steps_));
        const double bc2 = 1.0 - std::pow(opt_.beta2, static_cast<double>(steps_));
        for (size_t i = 0; i < params_.size(); ++i) {
            auto& p = params_[i].second;
            if (!p.grad().defined()) continue;
            const auto& g = p.grad();
            if (opt_.weight_decay > 0) p.mul_(1.0 - opt_.weight_decay);
            exp_avg_[i].mul_(opt_.beta1).add_(g, 1.0 - opt_.beta1);
            exp_avg_sq_[i].mul_(opt_.beta2).addcmul_(g, g, 1.0 - opt_.beta2);
            if (opt_.learning_rate == 0) continue;
            auto denom = (exp_avg_sq_[i] / bc2).sqrt_().add_(opt_.eps);
            p.addcdiv_(exp_avg_[i], denom, -opt_.learning_rate / bc1);
        }
    }

    const AdamWOptions& options() const { return opt_; }
    int64_t steps() const { return steps_; }
    void set_steps(int64_t s) { steps_ = s; }
    const std::vector<std::pair<std::string, torch::Tensor>>& params() const { return params_; }
    std::vector<torch::Tensor>& exp_avg() { return exp_avg_; }
    std::vector<torch::Tensor>& exp_avg_sq() { return exp_avg_sq_; }

private:
    std::vector<std::pair<std::string, torch::Tensor>> params_;
    AdamWOptions opt_;
    std::vector<torch::Tensor> exp_avg_, exp_avg_sq_;
    int64_t steps_ = 0;
};

} // namespace scribformer
