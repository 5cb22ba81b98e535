#pragma once

#include "scv2/image.hpp"

namespace scv2 {

// Structural similarity with an 11x11 Gaussian window (sigma 1.5) and the
// usual constants C1 = 0.01^2, C2 = 0.03^2 on [0,1] images. Zero padding at
// the borders.
double ssim(const Image3& render, const Image3& gt);

struct SsimGrad {
    double value = 0.0;
    Image3 d_render; // gradient of the mean SSIM w.r.t. the rendered image
};

SsimGrad ssim_with_grad(const Image3& render, const Image3& gt);

// Separable zero-padded convolution with the SSIM window (exposed for tests).
ArrayXXd ssim_window_filter(const ArrayXXd& img);

} // namespace scv2
