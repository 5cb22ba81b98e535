#include <doctest.h>

#include "scv2/rasterizer.hpp"
#include "scv2/rng.hpp"
#include "test_helpers.hpp"

using namespace scv2;
using namespace scv2::testutil;

namespace {

struct CheckLoss {
    Image3 w_color;
    ArrayXXd w_depth;
    Image3 w_normal;
    Eigen::ArrayXX<uint8_t> depth_mask; // frozen from the baseline render

    double eval(const RenderOutput& out) const {
        double s = 0.0;
        for (int c = 0; c < 3; ++c) {
            s += (w_color.plane(c) * out.color.plane(c)).sum();
            s += (w_normal.plane(c) * out.normal.plane(c) *
                  depth_mask.cast<double>())
                     .sum();
        }
        s += (w_depth * out.expected_depth * depth_mask.cast<double>()).sum();
        return s;
    }

    PixelLossGrads grads() const {
        PixelLossGrads g;
        g.d_color = w_color;
        g.d_depth = w_depth * depth_mask.cast<double>();
        g.d_normal.setZero(w_color.height(), w_color.width());
        for (int c = 0; c < 3; ++c)
            g.d_normal.plane(c) = w_normal.plane(c) * depth_mask.cast<double>();
        return g;
    }
};

CheckLoss make_loss(const RenderOutput& base, Rng& rng) {
    Eigen::Index h = base.height(), w = base.width();
    CheckLoss loss;
    loss.w_color.setZero(h, w);
    loss.w_normal.setZero(h, w);
    loss.w_depth = ArrayXXd::Zero(h, w);
    loss.depth_mask.resize(h, w);
    for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) {
                loss.w_color.plane(c)(y, x) = rng.uniform(-1.0, 1.0);
                loss.w_normal.plane(c)(y, x) = rng.uniform(-0.3, 0.3);
            }
            loss.w_depth(y, x) = rng.uniform(-0.3, 0.3);
            loss.depth_mask(y, x) = base.alpha(y, x) > 0.5 ? 1 : 0;
        }
    return loss;
}

double fd_check(SceneModel& m, const Camera& cam, const RenderOptions& opts,
                const CheckLoss& loss, double* param, double h) {
    double orig = *param;
    *param = orig + h;
    double fp = loss.eval(render(m, cam, opts));
    *param = orig - h;
    double fm = loss.eval(render(m, cam, opts));
    *param = orig;
    return (fp - fm) / (2.0 * h);
}

// Returns the worst mismatch (relative with an absolute floor). Central
// differences are invalid when the step straddles a max(G, Glow) branch
// switch, so disagreements are re-estimated with smaller steps.
double check_scene(SceneModel& m, const Camera& cam, Rng& rng) {
    RenderOptions opts = RenderOptions::exact();
    RenderOutput base = render(m, cam, opts);
    CheckLoss loss = make_loss(base, rng);
    SurfelGradients g =
        render_backward(m, cam, opts, base, loss.grads(), PixelLossGrads{});

    double worst = 0.0;
    auto compare = [&](double analytic, double* p) {
        double best = std::numeric_limits<double>::infinity();
        for (double h : {1e-4, 2e-5, 4e-6}) {
            double fd = fd_check(m, cam, opts, loss, p, h);
            double err = std::abs(analytic - fd) /
                         std::max(1e-3, std::max(std::abs(analytic), std::abs(fd)));
            if (std::abs(analytic - fd) < 1e-6) err = 0.0; // absolute floor
            best = std::min(best, err);
            if (best <= 1e-3) break;
        }
        worst = std::max(worst, best);
    };
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        for (int k = 0; k < 3; ++k) compare(g.d_center(i, k), &m.centers(i, k));
        for (int k = 0; k < 4; ++k) compare(g.d_rotation(i, k), &m.rotations(i, k));
        for (int k = 0; k < 2; ++k) compare(g.d_log_scales(i, k), &m.log_scales(i, k));
        compare(g.d_opacity_logit[i], &m.opacity_logits[i]);
        for (int k = 0; k < kShDim; ++k) compare(g.d_sh(i, k), &m.sh(i, k));
    }
    return worst;
}

} // namespace

TEST_CASE("zero pixel gradients give zero parameter gradients") {
    Rng rng(2);
    SceneModel m = random_scene(5, rng);
    Camera cam = simple_camera(16);
    RenderOptions opts = RenderOptions::exact();
    RenderOutput out = render(m, cam, opts);
    SurfelGradients g = render_backward(m, cam, opts, out, PixelLossGrads{}, PixelLossGrads{});
    CHECK(g.d_center.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.d_sh.cwiseAbs().maxCoeff() == 0.0);
    CHECK(g.d_opacity_logit.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("opacity gradient of a single surfel matches finite differences") {
    Rng rng(21);
    SceneModel m = random_scene(1, rng);
    Camera cam = simple_camera(16);
    RenderOptions opts = RenderOptions::exact();
    RenderOutput base = render(m, cam, opts);

    // L = sum of rendered color.
    CheckLoss loss;
    loss.w_color.setZero(16, 16);
    loss.w_color.r.setConstant(1.0);
    loss.w_color.g.setConstant(1.0);
    loss.w_color.b.setConstant(1.0);
    loss.w_normal.setZero(16, 16);
    loss.w_depth = ArrayXXd::Zero(16, 16);
    loss.depth_mask = Eigen::ArrayXX<uint8_t>::Zero(16, 16);

    SurfelGradients g =
        render_backward(m, cam, opts, base, loss.grads(), PixelLossGrads{});
    double fd = fd_check(m, cam, opts, loss, &m.opacity_logits[0], 1e-4);
    CHECK(g.d_opacity_logit[0] ==
          doctest::Approx(fd).epsilon(1e-3));
}

TEST_CASE("all gradients match finite differences on random scenes") {
    Rng rng(1001);
    double worst = 0.0;
    for (int trial = 0; trial < 4; ++trial) {
        SceneModel m = random_scene(10, rng);
        Camera cam = simple_camera(24);
        worst = std::max(worst, check_scene(m, cam, rng));
    }
    CHECK(worst < 1e-3);
}

TEST_CASE("densify channel carries independent positional gradients") {
    Rng rng(55);
    SceneModel m = random_scene(8, rng);
    Camera cam = simple_camera(24);
    RenderOptions opts; // standard options
    RenderOutput out = render(m, cam, opts);

    PixelLossGrads total;
    total.d_color.setZero(24, 24);
    total.d_color.r.setConstant(1e-3);
    total.d_color.g.setConstant(-2e-3);
    total.d_color.b.setConstant(0.5e-3);

    // Densify channel scaled by 0.25: positional norms must scale linearly.
    PixelLossGrads dens;
    dens.d_color.setZero(24, 24);
    for (int c = 0; c < 3; ++c) dens.d_color.plane(c) = total.d_color.plane(c) * 0.25;

    SurfelGradients g = render_backward(m, cam, opts, out, total, dens);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        if (!g.touched[size_t(i)]) continue;
        CHECK(g.pos_grad_ssim[i] ==
              doctest::Approx(0.25 * g.pos_grad_total[i]).epsilon(1e-9));
    }
    // Identical channels give identical norms.
    SurfelGradients g2 = render_backward(m, cam, opts, out, total, total);
    for (Eigen::Index i = 0; i < m.size(); ++i)
        CHECK(g2.pos_grad_ssim[i] == doctest::Approx(g2.pos_grad_total[i]).epsilon(1e-12));
}
