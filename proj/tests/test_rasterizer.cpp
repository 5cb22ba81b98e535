#include <doctest.h>

#include "scv2/rasterizer.hpp"
#include "scv2/rng.hpp"
#include "test_helpers.hpp"

using namespace scv2;
using namespace scv2::testutil;

namespace {

SceneModel centered_surfel(double opacity_logit, const Vector3d& rgb, double z,
                           double scale = 0.5) {
    SceneModel m;
    m.resize(1);
    double y00 = 0.28209479177387814;
    Surfel s;
    s.center = Vector3d(0, 0, z);
    s.scales = Vector2d(scale, scale);
    s.sh.setZero();
    s.sh.row(0) << (rgb.x() - 0.5) / y00, (rgb.y() - 0.5) / y00, (rgb.z() - 0.5) / y00;
    m.set_surfel(0, s);
    m.opacity_logits[0] = opacity_logit;
    m.background = Vector3d::Zero();
    return m;
}

// Odd-sized camera: the center pixel's ray passes through (0,0,z).
Camera odd_camera(int size = 33) {
    Camera cam;
    cam.width = cam.height = size;
    cam.fx = cam.fy = size;
    cam.cx = cam.cy = size / 2.0; // 16.5 for 33: the center of pixel (16,16)
    return cam;
}

} // namespace

TEST_CASE("render empty model") {
    SceneModel m;
    m.resize(0);
    m.background = Vector3d::Zero();
    Camera cam = odd_camera(16);
    RenderOutput out = render(m, cam);
    CHECK(out.color.r.abs().maxCoeff() == 0.0);
    CHECK(out.alpha.maxCoeff() == 0.0);
    CHECK(std::isinf(out.median_depth(0, 0)));
    CHECK(out.transmittance.minCoeff() == 1.0);
}

TEST_CASE("render rejects bad camera") {
    SceneModel m;
    m.resize(0);
    Camera cam;
    cam.width = 0;
    cam.height = 4;
    cam.fx = cam.fy = 1;
    CHECK_THROWS_AS(render(m, cam), ContractError);
}

TEST_CASE("single opaque white surfel on the center ray") {
    SceneModel m = centered_surfel(1000.0, Vector3d(1, 1, 1), 2.0);
    Camera cam = odd_camera();
    RenderOutput out = render(m, cam);
    int c = 16;
    CHECK(out.color.r(c, c) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.color.g(c, c) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.color.b(c, c) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.alpha(c, c) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(out.median_depth(c, c) == doctest::Approx(2.0).epsilon(1e-9));
    CHECK(out.visible[0] == 1);
    CHECK(out.max_contribution[0] == doctest::Approx(1.0));
}

TEST_CASE("two-surfel compositing against the two-term blend") {
    // Front: alpha 0.6 red at z=1. Back: alpha 0.8 blue at z=2.
    SceneModel m = centered_surfel(logit(0.6), Vector3d(1, 0, 0), 1.0, 0.4);
    SceneModel back = centered_surfel(logit(0.8), Vector3d(0, 0, 1), 2.0, 0.8);
    m.append_all(back);
    Camera cam = odd_camera();
    RenderOutput out = render(m, cam);
    int c = 16;
    // 0.6 red + (1 - 0.6) * 0.8 blue, black background
    CHECK(out.color.r(c, c) == doctest::Approx(0.6).epsilon(1e-9));
    CHECK(out.color.g(c, c) == doctest::Approx(0.0).epsilon(1e-9));
    CHECK(out.color.b(c, c) == doctest::Approx(0.32).epsilon(1e-9));
    CHECK(out.alpha(c, c) == doctest::Approx(0.92).epsilon(1e-9));
    // Accumulated alpha crosses 0.5 on the first surfel.
    CHECK(out.median_depth(c, c) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(out.expected_depth(c, c) ==
          doctest::Approx((0.6 * 1.0 + 0.32 * 2.0) / 0.92).epsilon(1e-9));
}

TEST_CASE("blend weights and final transmittance sum to one") {
    Rng rng(123);
    int checked = 0;
    for (int trial = 0; trial < 12 && checked < 10000; ++trial) {
        SceneModel m = random_scene(15, rng);
        Camera cam = simple_camera(32);
        RenderOutput out = render(m, cam);
        for (Eigen::Index y = 0; y < 32; ++y)
            for (Eigen::Index x = 0; x < 32; ++x) {
                CHECK(std::abs(out.alpha(y, x) + out.transmittance(y, x) - 1.0) < 1e-6);
                ++checked;
            }
    }
    CHECK(checked >= 10000);
}

TEST_CASE("rendering is invariant to surfel input order") {
    Rng rng(77);
    SceneModel m = random_scene(20, rng);
    Camera cam = simple_camera(32);
    RenderOutput a = render(m, cam);

    // Permute rows.
    std::vector<int> perm(20);
    for (int i = 0; i < 20; ++i) perm[i] = i;
    rng.shuffle(perm);
    SceneModel p;
    p.resize(20);
    p.background = m.background;
    for (int i = 0; i < 20; ++i) {
        p.centers.row(i) = m.centers.row(perm[size_t(i)]);
        p.rotations.row(i) = m.rotations.row(perm[size_t(i)]);
        p.log_scales.row(i) = m.log_scales.row(perm[size_t(i)]);
        p.opacity_logits[i] = m.opacity_logits[perm[size_t(i)]];
        p.sh.row(i) = m.sh.row(perm[size_t(i)]);
    }
    RenderOutput b = render(p, cam);
    CHECK((a.color.r - b.color.r).abs().maxCoeff() == 0.0);
    CHECK((a.color.g - b.color.g).abs().maxCoeff() == 0.0);
    CHECK((a.color.b - b.color.b).abs().maxCoeff() == 0.0);
    CHECK((a.alpha - b.alpha).abs().maxCoeff() == 0.0);
    CHECK((a.expected_depth - b.expected_depth).abs().maxCoeff() == 0.0);
    for (int i = 0; i < 20; ++i)
        CHECK(a.visible[size_t(perm[size_t(i)])] == b.visible[size_t(i)]);
}

TEST_CASE("tile size does not change the image") {
    Rng rng(31);
    SceneModel m = random_scene(18, rng);
    Camera cam = simple_camera(40);
    RenderOptions o8, o13;
    o8.tile = 8;
    o13.tile = 13;
    RenderOutput a = render(m, cam, o8);
    RenderOutput b = render(m, cam, o13);
    CHECK((a.color.r - b.color.r).abs().maxCoeff() == 0.0);
    CHECK((a.median_depth.isFinite().select(a.median_depth, 0) -
           b.median_depth.isFinite().select(b.median_depth, 0))
              .abs()
              .maxCoeff() == 0.0);
}

TEST_CASE("visibility of isolated and occluded points") {
    Camera cam = odd_camera();
    MatX3 pts(2, 3);
    pts.row(0) = Vector3d(0, 0, 2.0);  // near, on the center pixel ray
    pts.row(1) = Vector3d(0, 0, 4.0);  // behind the near point, same ray
    RenderOptions opts;
    opts.lowpass_px = 0.0; // visibility uses plain disks
    auto vis = render_visibility(pts, cam, 0.02, opts);
    CHECK(vis[0] == 1);
    CHECK(vis[1] == 0);

    MatX3 behind(1, 3);
    behind.row(0) = Vector3d(0, 0, -3.0);
    auto vis2 = render_visibility(behind, cam, 0.02, opts);
    CHECK(vis2[0] == 0);

    MatX3 none(0, 3);
    CHECK(render_visibility(none, cam, 0.02, opts).empty());
    CHECK_THROWS_AS(render_visibility(pts, cam, 0.0, opts), ContractError);
}

TEST_CASE("visit_blend_chains matches rendered alpha") {
    Rng rng(9);
    SceneModel m = random_scene(12, rng);
    Camera cam = simple_camera(24);
    RenderOutput out = render(m, cam);

    ArrayXXd alpha = ArrayXXd::Zero(24, 24);
    std::vector<ArrayXXd> partial(16, ArrayXXd::Zero(24, 24));
    visit_blend_chains(m, cam, {}, 16,
                       [&](size_t chunk, int y, int x, const std::vector<BlendSample>& chain) {
                           double s = 0;
                           for (const auto& b : chain) s += b.alpha * b.T;
                           partial[chunk](y, x) = s;
                       });
    for (const auto& p : partial) alpha += p;
    CHECK((alpha - out.alpha).abs().maxCoeff() < 1e-12);
}
