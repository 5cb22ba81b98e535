#pragma once

#include "scv2/image.hpp"
#include "scv2/types.hpp"

namespace scv2 {

struct LossWeights {
    double lambda_ssim = 0.2;
    double depth_start = 0.5;
    double depth_end = 0.0025;
    double lambda_normal = 0.0125;
    int64_t normal_activation_iter = 7000;
    int64_t total_iters = 30000;
    bool depth_enabled = true;
};

// Per-view inverse-depth guidance with its affine alignment to scene scale.
struct DepthPrior {
    int view_id = 0;
    ArrayXXd inv_depth;            // raw values
    Eigen::ArrayXX<uint8_t> mask;  // 1 = valid
    double scale = 1.0;            // a
    double shift = 0.0;            // b
    bool degenerate = false;       // alignment fell back to defaults
};

struct PhotometricResult {
    double loss = 0.0;
    Image3 d_render;       // total pixel gradient
    Image3 d_render_ssim;  // structural term only, scaled by lambda_ssim
    double l1 = 0.0;
    double dssim = 0.0;
};

// (1 - lambda) L1 + lambda (1 - SSIM)/2, plus both pixel gradients.
PhotometricResult photometric_loss(const Image3& render, const Image3& gt,
                                   double lambda_ssim = 0.2);

// Exponential weight interpolation between the configured endpoints.
double depth_weight(int64_t iter, const LossWeights& w);

struct DepthLossResult {
    double loss = 0.0;
    ArrayXXd d_inv_depth;
    bool empty_mask = false;
};

// Weighted mean absolute difference between predicted inverse depth and the
// aligned prior, over the prior's mask intersected with `render_valid`
// (pass an empty array to use the prior mask alone).
DepthLossResult depth_loss(const ArrayXXd& pred_inv_depth, const DepthPrior& prior,
                           int64_t iter, const LossWeights& w,
                           const Eigen::ArrayXX<uint8_t>& render_valid = {});

// Least-squares (a, b) minimizing |a raw + b - ref| over the given samples.
// Samples are (raw, ref) pairs; at least 2 required.
DepthPrior align_depth_prior(const ArrayXXd& raw_inv_depth,
                             const Eigen::ArrayXX<uint8_t>& mask,
                             const std::vector<std::pair<double, double>>& samples);

struct NormalLossResult {
    double loss = 0.0;
    Image3 d_render_normal;
};

// lambda * mean over pixels with alpha > 0.5 of (1 - n_render . n_depth).
// The depth-normal argument is treated as constant.
NormalLossResult normal_loss(const Image3& render_normal, const Image3& depth_normal,
                             const ArrayXXd& alpha, double lambda_normal);

// Normals from central differences of expected depth, back-projected to world
// space and oriented toward the camera. Pixels without valid neighbors get a
// zero normal.
Image3 depth_normals(const ArrayXXd& expected_depth, const ArrayXXd& alpha,
                     const Camera& cam);

} // namespace scv2
