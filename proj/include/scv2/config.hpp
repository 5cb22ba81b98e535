#pragma once

#include "scv2/density_control.hpp"
#include "scv2/trainer.hpp"

#include <string>

namespace scv2 {

// Every pipeline tunable, grouped by stage. Accepts flat `section.key = value`
// text or an equivalent JSON object; unknown keys and out-of-range values are
// rejected with the exact field name.
struct RunConfig {
    // gen
    double gen_ground_half = 10.0;
    int64_t gen_boxes = 8;
    int64_t gen_image_size = 64;
    int64_t gen_ring1_count = 16;
    int64_t gen_ring2_count = 8;
    int64_t gen_initial_points = 1500;
    int64_t gen_gt_points = 30000;
    double gen_prior_scale = 1.0;
    double gen_prior_shift = 0.0;
    bool gen_checker = true;

    // train
    int64_t train_pretrain_iters = 2000;
    double train_lambda_ssim = 0.2;
    double train_depth_start = 0.5;
    double train_depth_end = 0.0025;
    bool train_depth_enabled = true;
    double train_lambda_normal = 0.0125;
    int64_t train_normal_start = 700;
    double train_lr_center = 1.6e-4;
    double train_lr_center_final_mult = 0.01;
    double train_lr_rotation = 1e-3;
    double train_lr_scales = 5e-3;
    double train_lr_opacity = 5e-2;
    double train_lr_sh = 2.5e-3;

    // densify
    double densify_threshold = 2e-4;
    double densify_omega = 0.9;
    double densify_elongation_min = 0.01;
    int64_t densify_start = 500;
    int64_t densify_interval = 100;
    double densify_end_frac = 0.5;
    int64_t densify_opacity_reset_interval = 3000;
    double densify_min_opacity = 0.005;
    double densify_split_scale_frac = 0.01; // of scene extent
    std::string densify_source = "ssim_only";
    int64_t densify_hard_cap = 200000;

    // trim
    double trim_pretrain_ratio = 0.025;
    double trim_tune_ratio = 0.1;
    double trim_stage_ratio = 0.1; // post-merge stage
    double trim_every_frac = 0.3;

    // blocks
    int64_t blocks_x = 2;
    int64_t blocks_y = 2;
    double blocks_ssim_eps = 0.05;
    int64_t blocks_tune_iters = 500;
    double blocks_lr_center_mult = 0.4;
    double blocks_lr_scales_mult = 0.8;

    // compress
    double compress_ratio = 0.4;
    int64_t compress_codebook = 8192;

    // mesh
    double mesh_voxel_frac = 1.0 / 128.0; // of scene extent
    double mesh_trunc_voxels = 4.0;
    double mesh_depth_trunc = 1e9;

    // eval
    int64_t eval_vis_threshold = 3;
    double eval_alpha = 0.0;      // 0: automatic
    double eval_tau = 0.0;        // 0: automatic (tau_mult x median nn)
    double eval_tau_mult = 1.5;
    double eval_tau_min = 0.0;
    double eval_tau_max = 1e9;
    double eval_downsample_voxel = 0.0; // 0: extent / 64
    int64_t eval_samples = 0;     // 0: match the cropped reference count
    double eval_vis_radius = 0.0; // 0: automatic

    uint64_t seed = 7;
    int64_t threads = 0; // 0: hardware

    void validate() const;

    // Derived bundles.
    TrainConfig pretrain_config(int image_size_hint = 0) const;
    TrainConfig tune_config() const;
};

RunConfig load_run_config(const std::string& path);
void apply_override(RunConfig& cfg, const std::string& key_equals_value);
std::string dump_run_config(const RunConfig& cfg);

} // namespace scv2
