#pragma once

#include "scv2/adam.hpp"
#include "scv2/contribution.hpp"
#include "scv2/density_control.hpp"
#include "scv2/objective.hpp"
#include "scv2/rasterizer.hpp"
#include "scv2/rng.hpp"

#include <functional>
#include <optional>

namespace scv2 {

// One training view: camera, target image, optional inverse-depth guidance.
struct ViewData {
    Camera cam;
    Image3 image;
    std::optional<DepthPrior> prior;
};

struct TrainConfig {
    int64_t iters = 2000;
    LossWeights weights;
    DensifyConfig densify;
    LearningRates lr;
    double lr_center_final_mult = 0.01;
    double scene_extent = 0.0; // 0: derive from the model at start
    RenderOptions render;
    double gamma = 0.5;          // contribution exponent
    double trim_ratio = 0.0;     // 0 disables trimming inside the loop
    double trim_every_frac = 0.3;
    bool trim_at_start = false;
    double tune_lr_center_mult = 0.4;  // block tuning: position rate x0.4
    double tune_lr_scales_mult = 0.8;  // block tuning: scale rate x0.8
    int64_t metrics_interval = 0; // 0: only the final iteration reports
};

struct IterStats {
    int64_t iter = 0;
    double loss = 0.0;
    double psnr = 0.0;
    int64_t surfels = 0;
};

using MetricsHook = std::function<void(const IterStats&)>;

// Shared optimize loop. Only the first `active_count` surfels receive
// updates, densification, culling, and trimming; the rest render as frozen
// context. Returns the active count after structural edits.
Eigen::Index train_loop(SceneModel& model, Eigen::Index active_count,
                        const std::vector<ViewData>& views, const TrainConfig& cfg,
                        Rng& rng, const MetricsHook& hook = nullptr);

// Mean PSNR / SSIM of renders against the view images.
struct QualityReport {
    double psnr = 0.0;
    double ssim = 0.0;
};
QualityReport evaluate_views(const SceneModel& model, const std::vector<ViewData>& views,
                             const RenderOptions& opts = {});

} // namespace scv2
