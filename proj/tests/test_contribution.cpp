#include <doctest.h>

#include "scv2/contribution.hpp"
#include "test_helpers.hpp"

using namespace scv2;
using namespace scv2::testutil;

namespace {

// Direct per-pixel evaluation of the per-view contribution, independent of
// the rasterizer internals: sorts by center depth and blends every surfel at
// every pixel the same way the renderer defines the chain.
VectorXd brute_force_contribution(const SceneModel& m, const Camera& cam,
                                  const RenderOptions& opts, double gamma) {
    std::vector<int> order(size_t(m.size()));
    std::vector<Surfel> s(size_t(m.size()));
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        s[size_t(i)] = m.surfel(i);
        order[size_t(i)] = int(i);
    }
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return cam.world_to_cam(s[size_t(a)].center).z() <
               cam.world_to_cam(s[size_t(b)].center).z();
    });

    VectorXd sum = VectorXd::Zero(m.size());
    Eigen::VectorXi count = Eigen::VectorXi::Zero(m.size());
    Vector3d origin = cam.position();
    for (int y = 0; y < cam.height; ++y)
        for (int x = 0; x < cam.width; ++x) {
            double pxc = x + 0.5, pyc = y + 0.5;
            Vector3d ray = cam.ray_dir(pxc, pyc);
            double T = 1.0;
            for (int idx : order) {
                const Surfel& sf = s[size_t(idx)];
                Vector3d ccam = cam.world_to_cam(sf.center);
                if (!(ccam.z() > opts.near_clip)) continue;
                Matrix3d rot = sf.rotation.toRotationMatrix();
                Vector3d nrm = rot.col(2);
                double denom = nrm.dot(ray);
                double G = 0.0;
                if (std::abs(denom) > 1e-12) {
                    double t = nrm.dot(sf.center - origin) / denom;
                    if (t > opts.near_clip) {
                        Vector3d delta = origin + t * ray - sf.center;
                        double u = rot.col(0).dot(delta) / sf.scales.x();
                        double v = rot.col(1).dot(delta) / sf.scales.y();
                        G = std::exp(-0.5 * (u * u + v * v));
                    }
                }
                double glow = 0.0;
                if (opts.lowpass_px > 0) {
                    Vector3d proj = cam.project(sf.center);
                    double dx = pxc - proj.x(), dy = pyc - proj.y();
                    glow = std::exp(-(dx * dx + dy * dy) /
                                    (2 * opts.lowpass_px * opts.lowpass_px));
                }
                double alpha = sf.opacity * std::max(G, glow);
                if (!(alpha > 0.0 && alpha >= opts.alpha_skip)) continue;
                if (alpha * T > opts.contribution_cutoff) {
                    sum[idx] += std::pow(alpha, gamma) * std::pow(T, 1.0 - gamma);
                    count[idx] += 1;
                }
                T *= (1.0 - alpha);
                if (T < opts.stop_transmittance) break;
            }
        }
    VectorXd out = VectorXd::Zero(m.size());
    for (Eigen::Index i = 0; i < m.size(); ++i)
        if (count[i] > 0) out[i] = sum[i] / double(count[i]);
    return out;
}

} // namespace

TEST_CASE("single opaque surfel scores one") {
    SceneModel m;
    m.resize(1);
    Surfel s;
    s.center = Vector3d(0, 0, 2);
    s.scales = Vector2d(1.5, 1.5);
    m.set_surfel(0, s);
    m.opacity_logits[0] = 1000.0; // alpha exactly 1 near the center

    Camera cam;
    cam.width = cam.height = 17;
    cam.fx = cam.fy = 15.0;
    cam.cx = cam.cy = 8.5; // center pixel's ray passes through the surfel
    VectorXd c = single_view_contribution(m, cam, {}, 0.5);
    // alpha^0.5 * 1^0.5 averaged over its pixels; at least the center pixel
    // has alpha 1, so the mean is close to 1 but bounded by it.
    CHECK(c[0] > 0.8);
    CHECK(c[0] <= 1.0 + 1e-12);

    RenderOptions exact = RenderOptions::exact();
    exact.contribution_cutoff = 0.999999; // only the saturated pixel counts
    VectorXd c2 = single_view_contribution(m, cam, exact, 0.5);
    CHECK(c2[0] == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("occluded surfel matches the two-term blend value") {
    // Two stacked surfels on the center ray; wide enough to saturate pixels.
    SceneModel m;
    m.resize(2);
    Surfel front;
    front.center = Vector3d(0, 0, 1);
    front.scales = Vector2d(2.0, 2.0);
    front.opacity = 0.6;
    m.set_surfel(0, front);
    Surfel rear = front;
    rear.center = Vector3d(0, 0, 2);
    rear.scales = Vector2d(4.0, 4.0);
    rear.opacity = 0.8;
    m.set_surfel(1, rear);

    Camera cam;
    cam.width = cam.height = 9;
    cam.fx = cam.fy = 200.0; // narrow fov: every pixel near both centers
    cam.cx = cam.cy = 4.5;

    VectorXd c = single_view_contribution(m, cam, {}, 0.5);
    // Front: alpha ~ 0.6, T = 1.
    CHECK(c[0] == doctest::Approx(std::sqrt(0.6)).epsilon(1e-3));
    // Rear: alpha ~ 0.8 behind T ~ 0.4.
    CHECK(c[1] == doctest::Approx(std::pow(0.8, 0.5) * std::pow(0.4, 0.5)).epsilon(1e-3));
}

TEST_CASE("contribution equals brute-force evaluation") {
    Rng rng(19);
    for (int trial = 0; trial < 3; ++trial) {
        SceneModel m = random_scene(10, rng);
        Camera cam = simple_camera(16);
        RenderOptions opts;
        VectorXd fast = single_view_contribution(m, cam, opts, 0.5);
        VectorXd slow = brute_force_contribution(m, cam, opts, 0.5);
        CHECK((fast - slow).cwiseAbs().maxCoeff() < 1e-9);
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            CHECK(fast[i] >= 0.0);
            CHECK(fast[i] <= 1.0 + 1e-12);
        }
    }
}

TEST_CASE("contribution is monotone in opacity") {
    Rng rng(23);
    SceneModel m = random_scene(8, rng);
    Camera cam = simple_camera(16);
    VectorXd base = single_view_contribution(m, cam, {}, 0.5);
    SceneModel raised = m;
    raised.opacity_logits[3] += 0.75;
    VectorXd after = single_view_contribution(raised, cam, {}, 0.5);
    CHECK(after[3] >= base[3] - 1e-12);
}

TEST_CASE("average over views") {
    ContributionStats stats;
    stats.reset(2, 0.5);
    VectorXd a(2), b(2);
    a << 0.2, 0.0;
    b << 0.6, 0.0;
    accumulate_contribution(stats, a);
    CHECK(average_contribution(stats)[0] == doctest::Approx(0.2));
    accumulate_contribution(stats, b);
    VectorXd avg = average_contribution(stats);
    CHECK(avg[0] == doctest::Approx(0.4));
    CHECK(avg[1] == 0.0); // never seen in any view

    ContributionStats empty;
    empty.reset(2, 0.5);
    CHECK_THROWS_AS(average_contribution(empty), ContractError);
}

TEST_CASE("trim removes the lowest quantile") {
    VectorXd c(100);
    for (int i = 0; i < 100; ++i) c[i] = double(i + 1) * 0.01;
    SceneModel m;
    m.resize(100);
    for (int i = 0; i < 100; ++i) {
        Surfel s;
        s.center = Vector3d(i, 0, 0);
        m.set_surfel(i, s);
    }
    trim(m, c, 0.1);
    CHECK(m.size() == 90);
    CHECK(m.centers(0, 0) == doctest::Approx(10.0)); // lowest ten removed

    // Ratio 0 removes only exact zeros.
    VectorXd z(4);
    z << 0.5, 0.0, 0.25, 1.0;
    SceneModel m2;
    m2.resize(4);
    for (int i = 0; i < 4; ++i) {
        Surfel s;
        s.center = Vector3d(i, 0, 0);
        m2.set_surfel(i, s);
    }
    trim(m2, z, 0.0);
    CHECK(m2.size() == 3);
    CHECK(m2.centers(0, 0) == doctest::Approx(0.0));
    CHECK(m2.centers(1, 0) == doctest::Approx(2.0));

    // Removed fraction >= ratio even with ties at the threshold.
    VectorXd ties = VectorXd::Constant(10, 0.5);
    auto keep = trim_keep_mask(ties, 0.2, 10);
    int kept = 0;
    for (int k : keep) kept += k;
    CHECK(kept == 0); // all tied at the threshold, all dropped together
    SceneModel m3;
    m3.resize(10);
    CHECK_THROWS_AS(trim(m3, ties, 0.2), ContractError);

    CHECK_THROWS_AS(trim_keep_mask(ties, 1.0, 10), ContractError);
}

TEST_CASE("trim twice with ratio zero is idempotent") {
    Rng rng(4);
    VectorXd c(50);
    for (int i = 0; i < 50; ++i) c[i] = rng.uniform(0.1, 1.0);
    c[7] = 0.0;
    auto keep1 = trim_keep_mask(c, 0.0, 50);
    VectorXd survivors(49);
    int j = 0;
    for (int i = 0; i < 50; ++i)
        if (keep1[size_t(i)]) survivors[j++] = c[i];
    auto keep2 = trim_keep_mask(survivors, 0.0, 49);
    for (int k : keep2) CHECK(k == 1);
}
