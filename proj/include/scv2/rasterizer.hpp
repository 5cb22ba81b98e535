#pragma once

#include "scv2/image.hpp"
#include "scv2/types.hpp"

#include <functional>

namespace scv2 {

struct RenderOptions {
    double near_clip = 0.01;             // camera-space z cull plane
    double stop_transmittance = 1e-4;    // early termination
    double alpha_skip = 1.0 / 255.0;     // ignore samples below this alpha
    double contribution_cutoff = 1.0 / 255.0; // visible-mask threshold on alpha*T
    double lowpass_px = 0.7;             // screen-space anti-degeneracy stddev
    double bbox_sigma = 3.5;             // rasterization radius in sigmas
    bool full_coverage = false;          // evaluate every surfel at every pixel
    int tile = 16;

    // No cutoffs, no bounding boxes. Slow; used by gradient tests where the
    // output must be a smooth function of the parameters.
    static RenderOptions exact() {
        RenderOptions o;
        o.stop_transmittance = 0.0;
        o.alpha_skip = 0.0;
        o.full_coverage = true;
        return o;
    }
};

struct RenderOutput {
    Image3 color;
    ArrayXXd alpha;          // sum of blend weights
    ArrayXXd transmittance;  // remaining after the full chain
    ArrayXXd expected_depth; // blend-weighted mean depth; 0 where alpha ~ 0
    ArrayXXd median_depth;   // depth where accumulated alpha crosses 0.5; inf otherwise
    Image3 normal;           // unit blended normal; 0 where empty
    std::vector<uint8_t> visible;   // per surfel: alpha*T above cutoff somewhere
    VectorXd max_contribution;      // per surfel: max over pixels of alpha*T

    Eigen::Index height() const { return color.height(); }
    Eigen::Index width() const { return color.width(); }
};

// Per-pixel gradients of some scalar loss with respect to the rendered
// images. Empty members count as zero.
struct PixelLossGrads {
    Image3 d_color;
    ArrayXXd d_depth;   // w.r.t. expected_depth
    Image3 d_normal;    // w.r.t. the normalized normal map

    bool has_color() const { return !d_color.empty(); }
    bool has_depth() const { return d_depth.size() > 0; }
    bool has_normal() const { return !d_normal.empty(); }
};

// Per-view parameter gradients plus the two screen-space positional channels
// used by the densification control (total loss and the configured
// densification source, e.g. the structural term of the photometric loss).
struct SurfelGradients {
    MatX3 d_center;
    MatX4 d_rotation;       // raw quaternion (w,x,y,z)
    MatX2 d_log_scales;
    VectorXd d_opacity_logit;
    MatXSh d_sh;
    VectorXd pos_grad_total; // per-view screen gradient norm (ndc units)
    VectorXd pos_grad_ssim;  // same for the densification channel
    std::vector<uint8_t> touched;

    void setZero(Eigen::Index n) {
        d_center = MatX3::Zero(n, 3);
        d_rotation = MatX4::Zero(n, 4);
        d_log_scales = MatX2::Zero(n, 2);
        d_opacity_logit = VectorXd::Zero(n);
        d_sh = MatXSh::Zero(n, kShDim);
        pos_grad_total = VectorXd::Zero(n);
        pos_grad_ssim = VectorXd::Zero(n);
        touched.assign(size_t(n), 0);
    }
};

RenderOutput render(const SceneModel& model, const Camera& cam,
                    const RenderOptions& opts = {});

// Analytic adjoint of render(). `densify_grads` drives only the screen-space
// positional channel reported in pos_grad_ssim; parameter gradients come from
// `loss_grads`.
SurfelGradients render_backward(const SceneModel& model, const Camera& cam,
                                const RenderOptions& opts,
                                const RenderOutput& output,
                                const PixelLossGrads& loss_grads,
                                const PixelLossGrads& densify_grads);

// Visibility of raw points: each point becomes a camera-facing opaque disk of
// the given radius; a point counts visible when its own blend weight at the
// pixel under its projected center exceeds the contribution cutoff.
std::vector<uint8_t> render_visibility(const MatX3& points, const Camera& cam,
                                       double radius,
                                       const RenderOptions& opts = {});

// One front-to-back blend sample at a pixel.
struct BlendSample {
    int surfel;     // model index
    double alpha;   // opacity * gaussian
    double T;       // transmittance in front
    double depth;
};

// Walk every pixel's blend chain (same chains render() composites). `fn` is
// called once per pixel with samples in front-to-back order; `chunk` ranges
// over a fixed row partition so callers can keep per-chunk accumulators.
void visit_blend_chains(
    const SceneModel& model, const Camera& cam, const RenderOptions& opts,
    size_t n_chunks,
    const std::function<void(size_t chunk, int y, int x,
                             const std::vector<BlendSample>&)>& fn);

} // namespace scv2
