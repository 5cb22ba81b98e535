#include <doctest.h>

#include "scv2/geo_eval.hpp"
#include "scv2/pipeline.hpp"
#include "scv2/scenegen.hpp"

#include <filesystem>
#include <fstream>

using namespace scv2;

namespace {
namespace fs = std::filesystem;

std::vector<unsigned char> slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}
} // namespace

TEST_CASE("nadir depth of the ground equals the camera height") {
    SceneSpec spec;
    spec.n_boxes = 0;
    spec.finalize();
    // Straight-down camera at height 6.
    Camera cam;
    cam.width = cam.height = 32;
    cam.fx = cam.fy = 40.0;
    cam.cx = cam.cy = 16.0;
    cam.R << 1, 0, 0, 0, -1, 0, 0, 0, -1; // looking along -z
    cam.t = -cam.R * Vector3d(0, 0, 6.0);
    cam.validate();

    Image3 img;
    ArrayXXd depth;
    raycast(spec, cam, img, depth);
    for (Eigen::Index y = 0; y < 32; ++y)
        for (Eigen::Index x = 0; x < 32; ++x)
            CHECK(depth(y, x) == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("boxes appear in images and depths are finite on them") {
    SceneSpec spec;
    spec.seed = 3;
    spec.finalize();
    auto cams = scene_cameras(spec);
    REQUIRE(int(cams.size()) == spec.ring1_count + spec.ring2_count);
    Image3 img;
    ArrayXXd depth;
    raycast(spec, cams[0], img, depth);
    int finite = 0;
    for (Eigen::Index y = 0; y < depth.rows(); ++y)
        for (Eigen::Index x = 0; x < depth.cols(); ++x)
            finite += std::isfinite(depth(y, x));
    CHECK(finite > depth.size() / 4);
}

TEST_CASE("generated dataset is byte-identical across runs and loads back") {
    SceneSpec spec;
    spec.seed = 11;
    spec.image_size = 32;
    spec.ring1_count = 6;
    spec.ring2_count = 2;
    spec.initial_points = 300;
    spec.gt_points = 2000;

    fs::path dir1 = fs::temp_directory_path() / "scv2_ds_a";
    fs::path dir2 = fs::temp_directory_path() / "scv2_ds_b";
    fs::remove_all(dir1);
    fs::remove_all(dir2);
    generate_dataset(spec, dir1.string());
    generate_dataset(spec, dir2.string());

    std::vector<fs::path> rel;
    for (auto& e : fs::recursive_directory_iterator(dir1))
        if (e.is_regular_file()) rel.push_back(fs::relative(e.path(), dir1));
    REQUIRE(!rel.empty());
    std::sort(rel.begin(), rel.end());
    for (const auto& r : rel) CHECK(slurp(dir1 / r) == slurp(dir2 / r));

    Dataset data = load_dataset(dir1.string());
    CHECK(data.train_views.size() == 7);
    CHECK(data.test_views.size() == 1);
    CHECK(data.initial_points.size() == 300);
    CHECK(data.gt_points.size() == 2000);
    CHECK(!data.gt_mesh_path.empty());
    CHECK(data.train_views[0].prior.has_value());

    // Depth prior matches the analytic depth of its view.
    const ViewData& v = data.train_views[0];
    ArrayXXd depth;
    Image3 img;
    SceneSpec spec2 = spec;
    spec2.finalize();
    raycast(spec2, v.cam, img, depth);
    for (Eigen::Index y = 0; y < depth.rows(); ++y)
        for (Eigen::Index x = 0; x < depth.cols(); ++x) {
            if (!std::isfinite(depth(y, x))) {
                CHECK(v.prior->mask(y, x) == 0);
            } else {
                CHECK(v.prior->mask(y, x) == 1);
                CHECK(double(v.prior->inv_depth(y, x)) ==
                      doctest::Approx(1.0 / depth(y, x)).epsilon(1e-6));
            }
        }

    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("gt cloud is self-consistent against fresh mesh samples") {
    SceneSpec spec;
    spec.seed = 21;
    spec.gt_points = 4000;
    spec.finalize();
    PointCloud gt = sample_scene_points(spec, spec.gt_points, 1);
    PointCloud fresh = sample_scene_points(spec, spec.gt_points, 2);
    // Spacing ~ sqrt(area / n); at tau = 2x spacing the clouds must agree.
    double area = scene_mesh(spec).area();
    double spacing = std::sqrt(area / double(spec.gt_points));
    EvalReport rep = f1_score(gt, fresh, 2.0 * spacing);
    CHECK(rep.f1 == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("adversarial needles") {
    SceneSpec spec;
    spec.seed = 5;
    spec.initial_points = 400;
    spec.finalize();
    SceneModel m = init_model(initial_cloud(spec), Vector3d::Zero());

    SceneModel unchanged = m;
    make_adversarial_elongated(unchanged, 0.0, 3);
    CHECK((unchanged.log_scales - m.log_scales).cwiseAbs().maxCoeff() == 0.0);

    SceneModel a = m, b = m;
    make_adversarial_elongated(a, 0.05, 3);
    make_adversarial_elongated(b, 0.05, 3);
    CHECK((a.log_scales - b.log_scales).cwiseAbs().maxCoeff() == 0.0);

    int needles = 0;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        double su = std::exp(a.log_scales(i, 0)), sv = std::exp(a.log_scales(i, 1));
        if (elongation_rate(su, sv) < 0.01) ++needles;
    }
    CHECK(needles == 20); // ceil(0.05 * 400)
    CHECK_THROWS_AS(make_adversarial_elongated(a, 1.0, 3), ContractError);
}
