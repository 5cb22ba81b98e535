#pragma once

#include "scv2/rasterizer.hpp"
#include "scv2/rng.hpp"
#include "scv2/types.hpp"

namespace scv2 {

enum class GradientSource { SsimOnly, Total, RgbOnly, SsimPlusDepth };

const char* to_string(GradientSource s);
GradientSource gradient_source_from_string(const std::string& s);

struct DensifyConfig {
    double grad_threshold = 2e-4;     // screen-space norm (ndc units)
    double omega = 0.9;               // rescaling weight
    double elongation_min = 0.01;     // surfels below never clone/split
    int64_t densify_start = 500;
    int64_t densify_interval = 100;
    int64_t densify_end = 1000;       // callers usually set 50% of iters
    int64_t opacity_reset_interval = 3000;
    double min_opacity = 0.005;
    double split_scale_threshold = 0.02; // world units
    GradientSource source = GradientSource::SsimOnly;
    int64_t hard_cap = 200000;

    void validate() const {
        if (!(omega > 0.0 && omega <= 1.0))
            throw ContractError("densify.omega must be in (0,1]");
        if (!(elongation_min >= 0.0 && elongation_min < 1.0))
            throw ContractError("densify.elongation_min must be in [0,1)");
        if (densify_interval <= 0 || opacity_reset_interval <= 0)
            throw ContractError("densify intervals must be positive");
    }
};

// Screen-gradient accumulators between densification rounds.
struct DensifyAccumulators {
    VectorXd total_norm; // sum over observed views of per-view norms
    VectorXd ssim_norm;  // densification channel
    VectorXd count;
    MatX3 world_grad;    // accumulated center gradient (for clone offsets)

    void reset(Eigen::Index n) {
        total_norm = VectorXd::Zero(n);
        ssim_norm = VectorXd::Zero(n);
        count = VectorXd::Zero(n);
        world_grad = MatX3::Zero(n, 3);
    }
    void observe(const SurfelGradients& g) {
        for (Eigen::Index i = 0; i < total_norm.size(); ++i) {
            if (!g.touched[size_t(i)]) continue;
            total_norm[i] += g.pos_grad_total[i];
            ssim_norm[i] += g.pos_grad_ssim[i];
            count[i] += 1.0;
            world_grad.row(i) += g.d_center.row(i);
        }
    }
    Eigen::Index size() const { return total_norm.size(); }
};

// Densification norms: the per-surfel mean of the densify-channel screen
// norms, rescaled by max(omega * avg_total / avg_densify, 1). The scale
// factor is one global scalar per round; surfels without observations get 0.
VectorXd densify_gradient(const DensifyAccumulators& acc, double omega);

struct DensifySelection {
    std::vector<int> clone;
    std::vector<int> split;
};

// Thresholding plus the elongation filter. Only surfels with index below
// `active_count` are considered (the rest are frozen context).
DensifySelection select_densify(const SceneModel& model, const VectorXd& norms,
                                const DensifyConfig& cfg,
                                Eigen::Index active_count);

// Row remap description after a structural edit: entry = source row in the
// old model, -1 for rows whose optimizer state starts fresh.
struct ModelEdit {
    std::vector<int> src;
    Eigen::Index new_active_count = 0;
};

// Clones are duplicated with a small offset along the accumulated descent
// direction; splits draw two children from the parent's own disk (seeded)
// with scales divided by 1.6. New rows are inserted before the frozen
// context so the active prefix stays contiguous.
ModelEdit apply_densify(SceneModel& model, const DensifySelection& sel,
                        const DensifyAccumulators& acc, const DensifyConfig& cfg,
                        Eigen::Index active_count, Rng& rng);

// Removes active surfels with opacity below cfg.min_opacity.
ModelEdit cull_low_opacity(SceneModel& model, const DensifyConfig& cfg,
                           Eigen::Index active_count);

// Clamp all active opacities to at most 2 * min_opacity.
void reset_opacity(SceneModel& model, const DensifyConfig& cfg,
                   Eigen::Index active_count);

} // namespace scv2
