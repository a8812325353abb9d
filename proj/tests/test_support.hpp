#pragma once

#include <cmath>
#include <functional>

#include <torch/torch.h>

#include "scribformer/encoder.hpp"

namespace scribformer::testing {

/// Central-difference gradient of a scalar function at x (double precision).
inline torch::Tensor numeric_grad(const std::function<double(const torch::Tensor&)>& f, const torch::Tensor& x,
                                  double h) {
    auto base = x.detach().to(torch::kDouble).contiguous().clone();
    auto g = torch::zeros_like(base);
    auto* p = base.data_ptr<double>();
    auto* gp = g.data_ptr<double>();
    for (int64_t i = 0; i < base.numel(); ++i) {
        const double orig = p[i];
        p[i] = orig + h;
        const double up = f(base);
        p[i] = orig - h;
        const double down = f(base);
        p[i] = orig;
        gp[i] = (up - down) / (2 * h);
    }
    return g;
}

/// ‖a − n‖ / max(‖n‖, 1e-12).
inline double rel_error(const torch::Tensor& analytic, const torch::Tensor& numeric) {
    const double num = (analytic.to(torch::kDouble) - numeric.to(torch::kDouble)).norm().item<double>();
    return num / std::max(numeric.to(torch::kDouble).norm().item<double>(), 1e-12);
}

inline EncoderConfig toy_encoder(int64_t image_size) {
    EncoderConfig c;
    c.base_image_size = image_size;
    return c;
}

} // namespace scribformer::testing
