#include <doctest.h>

#include "scv2/partition.hpp"
#include "scv2/pipeline.hpp"
#include "scv2/scenegen.hpp"
#include "scv2/ssim.hpp"

using namespace scv2;

TEST_CASE("contraction maps the box to [-1,1] and the outside smoothly") {
    ForegroundBox box;
    box.min = Vector3d(-2, -4, 0);
    box.max = Vector3d(2, 4, 2);
    CHECK(contract(Vector3d(0, 0, 1), box).isApprox(Vector3d(0, 0, 0), 1e-12));
    CHECK(contract(Vector3d(2, 0, 1), box).x() == doctest::Approx(1.0));
    CHECK(contract(Vector3d(-2, 0, 1), box).x() == doctest::Approx(-1.0));
    // Normalized coordinate 2 contracts to 1.5.
    CHECK(contract(Vector3d(4, 0, 1), box).x() == doctest::Approx(1.5));
    CHECK(contract(Vector3d(0, -16, 1), box).y() == doctest::Approx(-(2.0 - 0.25)));

    // Monotone per axis, range (-2, 2).
    double prev = -3;
    for (double x = -40; x <= 40; x += 0.37) {
        double c = contract(Vector3d(x, 0, 1), box).x();
        CHECK(c > prev);
        CHECK(std::abs(c) < 2.0);
        prev = c;
    }

    ForegroundBox degenerate;
    degenerate.min = Vector3d(0, 0, 0);
    degenerate.max = Vector3d(0, 1, 1);
    CHECK_THROWS_AS(contract(Vector3d(0, 0, 0), degenerate), ContractError);
}

TEST_CASE("partition bins by contracted ground coordinates") {
    SceneModel m;
    m.resize(3);
    Surfel s;
    s.center = Vector3d(0, 0, 1);
    m.set_surfel(0, s); // center
    s.center = Vector3d(100, 0, 1);
    m.set_surfel(1, s); // far +x
    s.center = Vector3d(-100, -100, 1);
    m.set_surfel(2, s); // far corner

    ForegroundBox box;
    box.min = Vector3d(-3, -3, 0);
    box.max = Vector3d(3, 3, 2);

    BlockPartition p1 = partition(m, 1, 1, box);
    CHECK(p1.block_surfels[0].size() == 3);

    BlockPartition p3 = partition(m, 3, 3, box);
    CHECK(p3.block_surfels[4] == std::vector<int>{0}); // middle cell
    // +x outlier lands in the right column, middle row.
    CHECK(p3.block_surfels[5] == std::vector<int>{1});
    CHECK(p3.block_surfels[0] == std::vector<int>{2});

    // Every surfel in exactly one block.
    std::vector<int> seen(3, 0);
    for (const auto& blk : p3.block_surfels)
        for (int i : blk) seen[size_t(i)] += 1;
    CHECK(seen == std::vector<int>({1, 1, 1}));

    CHECK_THROWS_AS(partition(m, 0, 1, box), ContractError);
}

TEST_CASE("independent rebinning oracle on a generated town") {
    SceneSpec spec;
    spec.seed = 77;
    spec.initial_points = 600;
    spec.finalize();
    SceneModel m = init_model(initial_cloud(spec), Vector3d::Zero());
    ForegroundBox box = default_foreground(m);
    BlockPartition part = partition(m, 4, 2, box);

    std::vector<int64_t> counts(8, 0);
    for (Eigen::Index i = 0; i < m.size(); ++i) {
        Vector3d c = contract(m.centers.row(i), box);
        int gx = std::clamp(int(std::floor((c.x() + 2.0) / 4.0 * 4)), 0, 3);
        int gy = std::clamp(int(std::floor((c.y() + 2.0) / 4.0 * 2)), 0, 1);
        counts[size_t(gy * 4 + gx)] += 1;
    }
    for (int b = 0; b < 8; ++b)
        CHECK(int64_t(part.block_surfels[size_t(b)].size()) == counts[size_t(b)]);
}

TEST_CASE("view assignment matches a brute-force recompute") {
    SceneSpec spec;
    spec.seed = 13;
    spec.initial_points = 500;
    spec.image_size = 32;
    spec.ring1_count = 6;
    spec.ring2_count = 0;
    spec.finalize();
    SceneModel m = init_model(initial_cloud(spec), Vector3d(0.6, 0.7, 0.9));
    auto cams = scene_cameras(spec);

    BlockPartition part = partition(m, 2, 2, default_foreground(m));
    double eps = 0.05;
    assign_views(part, m, cams, eps);

    // Every view appears somewhere.
    size_t assigned = 0;
    for (const auto& v : part.block_views) assigned += v.size();
    CHECK(assigned >= cams.size());

    // Brute-force recompute.
    for (int b = 0; b < part.blocks(); ++b) {
        std::vector<int> keep(size_t(m.size()), 1);
        for (int i : part.block_surfels[size_t(b)]) keep[size_t(i)] = 0;
        SceneModel without = m;
        without.filter(keep);
        for (size_t k = 0; k < cams.size(); ++k) {
            RenderOutput full = render(m, cams[k]);
            RenderOutput abl = render(without, cams[k]);
            bool expect = ssim(full.color, abl.color) < 1.0 - eps;
            bool got = std::find(part.block_views[size_t(b)].begin(),
                                 part.block_views[size_t(b)].end(),
                                 int(k)) != part.block_views[size_t(b)].end();
            if (expect) {
                CHECK(got);
            }
        }
    }

    // Single-block partition holds every view.
    BlockPartition one = partition(m, 1, 1, default_foreground(m));
    assign_views(one, m, cams, eps);
    CHECK(one.block_views[0].size() == cams.size());

    CHECK_THROWS_AS(assign_views(one, m, {}, eps), ContractError);
}

TEST_CASE("merge preserves order and counts") {
    SceneModel a;
    a.resize(2);
    SceneModel b;
    b.resize(3);
    for (int i = 0; i < 2; ++i) a.centers.row(i) << i, 0, 0;
    for (int i = 0; i < 3; ++i) b.centers.row(i) << 10 + i, 0, 0;

    BlockPartition part;
    part.bx = 2;
    part.by = 1;
    part.block_surfels = {{0, 1}, {2, 3, 4}};
    part.block_views = {{0}, {0}};
    part.degenerate = {0, 0};

    SceneModel orig;
    orig.resize(5);
    orig.background = Vector3d(0.1, 0.2, 0.3);
    SceneModel merged = merge_blocks(part, {a, b}, orig);
    CHECK(merged.size() == 5);
    CHECK(merged.centers(0, 0) == 0.0);
    CHECK(merged.centers(2, 0) == 10.0);
    CHECK(merged.background.isApprox(orig.background));

    CHECK_THROWS_AS(merge_blocks(part, {a}, orig), ContractError);
}
