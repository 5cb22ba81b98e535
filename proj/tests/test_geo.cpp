#include <doctest.h>

#include "scv2/geo_eval.hpp"
#include "scv2/kdtree.hpp"
#include "scv2/rng.hpp"
#include "scv2/scenegen.hpp"

#include <set>

using namespace scv2;

namespace {

PointCloud random_cloud(int n, Rng& rng, double span = 5.0) {
    PointCloud c;
    c.points.resize(n, 3);
    for (int i = 0; i < n; ++i)
        c.points.row(i) << rng.uniform(-span, span), rng.uniform(-span, span),
            rng.uniform(-span, span);
    return c;
}

} // namespace

TEST_CASE("kdtree nearest matches linear scan") {
    Rng rng(3);
    PointCloud c = random_cloud(500, rng);
    KdTree tree(c.points);
    for (int t = 0; t < 200; ++t) {
        Vector3d q(rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(-6, 6));
        auto r = tree.nearest(q);
        double best = std::numeric_limits<double>::infinity();
        int arg = -1;
        for (int i = 0; i < 500; ++i) {
            double d2 = (c.points.row(i).transpose() - q).squaredNorm();
            if (d2 < best) {
                best = d2;
                arg = i;
            }
        }
        CHECK(r.sq_dist == best);
        CHECK(r.index == arg);
    }
}

TEST_CASE("voxel downsample basics and hash oracle") {
    PointCloud one;
    one.points.resize(3, 3);
    one.points << 0.1, 0.1, 0.1, 0.2, 0.2, 0.2, 0.3, 0.1, 0.2;
    PointCloud down = voxel_downsample(one, 10.0);
    CHECK(down.size() == 1);
    Vector3d centroid = down.points.row(0);
    CHECK(centroid.isApprox(Vector3d(0.2, 400.0 / 3000.0, 500.0 / 3000.0).eval(), 1e-9));

    // Grid spaced at exactly twice the voxel size stays unchanged.
    PointCloud grid;
    grid.points.resize(27, 3);
    int at = 0;
    for (int x = 0; x < 3; ++x)
        for (int y = 0; y < 3; ++y)
            for (int z = 0; z < 3; ++z) grid.points.row(at++) << x * 2.0, y * 2.0, z * 2.0;
    CHECK(voxel_downsample(grid, 1.0).size() == 27);

    // Random cloud: occupied-cell count equals an independent hash count.
    Rng rng(8);
    PointCloud big = random_cloud(10000, rng);
    double voxel = 0.7;
    std::set<std::tuple<int64_t, int64_t, int64_t>> cells;
    for (int i = 0; i < 10000; ++i)
        cells.insert({int64_t(std::floor(big.points(i, 0) / voxel)),
                      int64_t(std::floor(big.points(i, 1) / voxel)),
                      int64_t(std::floor(big.points(i, 2) / voxel))});
    CHECK(voxel_downsample(big, voxel).size() == Eigen::Index(cells.size()));

    CHECK_THROWS_AS(voxel_downsample(big, 0.0), ContractError);
}

TEST_CASE("alpha shape of a dense square") {
    Rng rng(14);
    std::vector<Eigen::Vector2d> pts;
    for (int x = 0; x <= 20; ++x)
        for (int y = 0; y <= 20; ++y)
            pts.push_back({x * 0.1, y * 0.1});
    AlphaShape shape = alpha_shape_2d(pts, 0.3);
    REQUIRE(!shape.rings.empty());
    CHECK(shape.area() == doctest::Approx(4.0).epsilon(0.05));
    CHECK(shape.contains({1.0, 1.0}));
    CHECK(shape.contains({0.0, 0.0})); // boundary inclusive
    CHECK(!shape.contains({2.5, 1.0}));
}

TEST_CASE("point-in-polygon agrees with a half-plane oracle on a convex hull") {
    // Regular hexagon of radius 1.
    std::vector<Eigen::Vector2d> pts;
    for (int i = 0; i < 6; ++i) {
        double a = std::acos(-1.0) / 3.0 * i;
        pts.push_back({std::cos(a), std::sin(a)});
    }
    for (int i = 0; i < 6; ++i) {
        double a = std::acos(-1.0) / 3.0 * i + 0.3;
        pts.push_back({0.4 * std::cos(a), 0.4 * std::sin(a)});
    }
    AlphaShape shape = alpha_shape_2d(pts, 2.0);
    REQUIRE(!shape.rings.empty());

    auto oracle = [&](const Eigen::Vector2d& p) {
        for (int i = 0; i < 6; ++i) {
            Eigen::Vector2d a = pts[size_t(i)], b = pts[size_t((i + 1) % 6)];
            double cross = (b.x() - a.x()) * (p.y() - a.y()) -
                           (b.y() - a.y()) * (p.x() - a.x());
            if (cross < -1e-9) return false;
        }
        return true;
    };
    Rng rng(4);
    for (int t = 0; t < 1000; ++t) {
        Eigen::Vector2d p(rng.uniform(-1.3, 1.3), rng.uniform(-1.3, 1.3));
        // Skip points hugging the hull boundary: inclusiveness differs there.
        bool near_edge = false;
        for (int i = 0; i < 6; ++i) {
            Eigen::Vector2d a = pts[size_t(i)], b = pts[size_t((i + 1) % 6)];
            Eigen::Vector2d ab = b - a;
            double tproj = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
            if ((a + tproj * ab - p).norm() < 1e-3) near_edge = true;
        }
        if (near_edge) continue;
        CHECK(shape.contains(p) == oracle(p));
    }
}

TEST_CASE("surface sampling is area weighted and uniform") {
    TriangleMesh mesh;
    mesh.vertices.resize(6, 3);
    mesh.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0, // area 0.5
        5, 0, 0, 8, 0, 0, 5, 2, 0;              // area 3.0 (x >= 4 marks it)
    mesh.faces.resize(2, 3);
    mesh.faces << 0, 1, 2, 3, 4, 5;

    PointCloud samples = sample_surface(mesh, 10000, 9);
    int64_t big = 0;
    for (Eigen::Index i = 0; i < samples.size(); ++i)
        if (samples.points(i, 0) >= 4.0) ++big;
    double share = double(big) / 10000.0;
    CHECK(share == doctest::Approx(3.0 / 3.5).epsilon(0.025));

    // Single triangle: all samples inside it.
    TriangleMesh tri;
    tri.vertices.resize(3, 3);
    tri.vertices << 0, 0, 0, 1, 0, 0, 0, 1, 0;
    tri.faces.resize(1, 3);
    tri.faces << 0, 1, 2;
    PointCloud pts = sample_surface(tri, 500, 3);
    for (Eigen::Index i = 0; i < pts.size(); ++i) {
        double x = pts.points(i, 0), y = pts.points(i, 1);
        CHECK(x >= -1e-12);
        CHECK(y >= -1e-12);
        CHECK(x + y <= 1.0 + 1e-12);
        CHECK(std::abs(pts.points(i, 2)) < 1e-12);
    }

    // Unit square: chi-square uniformity over a 4x4 grid.
    TriangleMesh square;
    square.vertices.resize(4, 3);
    square.vertices << 0, 0, 0, 1, 0, 0, 1, 1, 0, 0, 1, 0;
    square.faces.resize(2, 3);
    square.faces << 0, 1, 2, 0, 2, 3;
    PointCloud sq = sample_surface(square, 10000, 17);
    Eigen::Matrix4d bins = Eigen::Matrix4d::Zero();
    for (Eigen::Index i = 0; i < sq.size(); ++i) {
        int bx = std::min(3, int(sq.points(i, 0) * 4.0));
        int by = std::min(3, int(sq.points(i, 1) * 4.0));
        bins(by, bx) += 1.0;
    }
    double chi2 = 0;
    double expect = 10000.0 / 16.0;
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) chi2 += (bins(r, c) - expect) * (bins(r, c) - expect) / expect;
    CHECK(chi2 < 30.58); // chi-square 15 dof at p = 0.01

    CHECK_THROWS_AS(sample_surface(TriangleMesh{}, 10, 1), ContractError);
}

TEST_CASE("crop keeps interior points and respects height bounds") {
    CropVolume vol;
    Ring square = {{-1, -1}, {1, -1}, {1, 1}, {-1, 1}};
    vol.footprint.rings.push_back(square);
    vol.z_min = 0.0;
    vol.z_max = 2.0;

    PointCloud c;
    c.points.resize(3, 3);
    c.points << 0, 0, 1, /*inside*/ 0, 0, 3, /*above*/ 2, 0, 1 /*outside xy*/;
    PointCloud kept = crop(c, vol);
    REQUIRE(kept.size() == 1);
    CHECK(kept.points(0, 2) == doctest::Approx(1.0));

    // Half-plane oracle on a convex polygon.
    Rng rng(6);
    int64_t match = 0, total = 0;
    for (int t = 0; t < 1000; ++t) {
        Vector3d p(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1, 3));
        bool oracle = std::abs(p.x()) <= 1.0 && std::abs(p.y()) <= 1.0 && p.z() >= 0.0 &&
                      p.z() <= 2.0;
        if (std::abs(std::abs(p.x()) - 1.0) < 1e-6 || std::abs(std::abs(p.y()) - 1.0) < 1e-6)
            continue;
        match += vol.contains(p) == oracle;
        ++total;
    }
    CHECK(match == total);
}

TEST_CASE("transforms") {
    Rng rng(2);
    PointCloud c = random_cloud(50, rng);
    Eigen::Matrix4d id = Eigen::Matrix4d::Identity();
    PointCloud same = apply_transform(c, id);
    CHECK((same.points - c.points).cwiseAbs().maxCoeff() == 0.0);

    Eigen::Matrix4d shift = id;
    shift(0, 3) = 1.5;
    shift(2, 3) = -0.5;
    PointCloud moved = apply_transform(c, shift);
    CHECK((moved.points.col(0) - c.points.col(0)).minCoeff() == doctest::Approx(1.5));

    Eigen::Matrix4d scale2 = id * 2.0;
    scale2(3, 3) = 1.0;
    PointCloud big = apply_transform(c, scale2);
    double d_orig = (c.points.row(0) - c.points.row(1)).norm();
    double d_big = (big.points.row(0) - big.points.row(1)).norm();
    CHECK(d_big == doctest::Approx(2.0 * d_orig).epsilon(1e-12));

    Eigen::Matrix4d singular = Eigen::Matrix4d::Zero();
    CHECK_THROWS_AS(apply_transform(c, singular), ContractError);
}

TEST_CASE("f1 identities and the exhaustive oracle") {
    Rng rng(10);
    PointCloud a = random_cloud(2000, rng);
    EvalReport self = f1_score(a, a, 0.5);
    CHECK(self.precision == 1.0);
    CHECK(self.recall == 1.0);
    CHECK(self.f1 == 1.0);

    // Shifted beyond 2 tau: everything misses.
    PointCloud b = a;
    b.points.col(0).array() += 25.0;
    EvalReport miss = f1_score(b, a, 0.5);
    CHECK(miss.precision == 0.0);
    CHECK(miss.recall == 0.0);
    CHECK(miss.f1 == 0.0);

    // Indexed and exhaustive paths agree exactly.
    PointCloud c = random_cloud(2000, rng);
    PointCloud d = random_cloud(2000, rng);
    EvalReport fast = f1_score(c, d, 1.1);
    EvalReport slow = f1_score(c, d, 1.1, true);
    CHECK(fast.precision == slow.precision);
    CHECK(fast.recall == slow.recall);
    CHECK(fast.f1 == slow.f1);

    // Symmetry: precision(a->b) equals recall(b->a).
    EvalReport ab = f1_score(c, d, 0.9);
    EvalReport ba = f1_score(d, c, 0.9);
    CHECK(ab.precision == ba.recall);
    CHECK(ab.recall == ba.precision);

    // Monotone in tau.
    double prev = 0;
    for (double tau : {0.2, 0.4, 0.8, 1.6}) {
        double f1 = f1_score(c, d, tau).f1;
        CHECK(f1 >= prev - 1e-15);
        prev = f1;
    }

    CHECK_THROWS_AS(f1_score(PointCloud{}, a, 0.5), ContractError);
    CHECK_THROWS_AS(f1_score(a, a, 0.0), ContractError);
}

TEST_CASE("crop volume from visibility excludes rarely observed points") {
    // A flat disc of points plus a rim observed by no camera (behind them).
    SceneSpec spec;
    spec.seed = 31;
    spec.n_boxes = 2;
    spec.finalize();
    std::vector<Camera> cams = scene_cameras(spec);

    PointCloud gt = sample_scene_points(spec, 4000, 5);
    // Points far outside the ground plate, beyond every frustum.
    PointCloud rim = gt;
    rim.points.conservativeResize(gt.size() + 50, 3);
    for (int i = 0; i < 50; ++i)
        rim.points.row(gt.size() + i) << 400.0 + i, 0.0, 0.5;

    CropVolumeParams params;
    params.vis_threshold = 1;
    CropVolume vol = estimate_crop_volume(rim, cams, params);
    // The rim never enters the footprint.
    for (int i = 0; i < 50; ++i)
        CHECK(!vol.contains(rim.points.row(gt.size() + i)));
    CHECK(vol.area() > 0);
    CHECK(vol.z_min < vol.z_max);

    CHECK_THROWS_AS(estimate_crop_volume(rim, {}, params), ContractError);
}
