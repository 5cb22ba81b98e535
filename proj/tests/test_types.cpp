#include <doctest.h>

#include "scv2/rng.hpp"
#include "scv2/types.hpp"

using namespace scv2;

namespace {

// Independent degree-2 real basis, written from the closed-form polynomials
// (same sign convention as the renderer, different arithmetic path).
void reference_basis(const Vector3d& d, double* b) {
    const double pi = std::acos(-1.0);
    double x = d.x(), y = d.y(), z = d.z();
    b[0] = std::sqrt(1.0 / (4.0 * pi));
    b[1] = -std::sqrt(3.0 / (4.0 * pi)) * y;
    b[2] = std::sqrt(3.0 / (4.0 * pi)) * z;
    b[3] = -std::sqrt(3.0 / (4.0 * pi)) * x;
    b[4] = 0.5 * std::sqrt(15.0 / pi) * x * y;
    b[5] = -0.5 * std::sqrt(15.0 / pi) * y * z;
    b[6] = 0.25 * std::sqrt(5.0 / pi) * (3.0 * z * z - 1.0); // unit directions
    b[7] = -0.5 * std::sqrt(15.0 / pi) * x * z;
    b[8] = 0.25 * std::sqrt(15.0 / pi) * (x * x - y * y);
}

Vector3d random_dir(Rng& rng) {
    Vector3d v(rng.normal(), rng.normal(), rng.normal());
    while (v.norm() < 1e-6) v = Vector3d(rng.normal(), rng.normal(), rng.normal());
    return v.normalized();
}

} // namespace

TEST_CASE("eval_sh dc-only and zero coefficients") {
    ShMatrix sh = ShMatrix::Zero();
    Rng rng(11);
    Vector3d dir = random_dir(rng);
    Vector3d rgb = eval_sh(sh, dir);
    CHECK(rgb.isApprox(Vector3d(0.5, 0.5, 0.5), 1e-12));

    double y00 = 0.28209479177387814;
    sh.row(0) = Eigen::RowVector3d(0.5 / y00, 0.5 / y00, 0.5 / y00);
    for (int i = 0; i < 5; ++i) {
        Vector3d d = random_dir(rng);
        Vector3d v = eval_sh(sh, d);
        CHECK(v.x() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(v.y() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(v.z() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("eval_sh matches termwise reference basis") {
    Rng rng(42);
    for (int trial = 0; trial < 20; ++trial) {
        ShMatrix sh;
        for (int k = 0; k < kShCoeffs; ++k)
            for (int c = 0; c < 3; ++c) sh(k, c) = rng.normal(0.0, 0.3);
        Vector3d dir = trial == 0 ? Vector3d(0, 0, 1) : random_dir(rng);

        double b[kShCoeffs];
        reference_basis(dir, b);
        Vector3d expect = Vector3d::Zero();
        for (int k = 0; k < kShCoeffs; ++k) expect += b[k] * sh.row(k).transpose();
        expect.array() += 0.5;
        expect = expect.cwiseMax(0.0);

        Vector3d got = eval_sh(sh, dir);
        CHECK((got - expect).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("eval_sh rejects non-unit directions") {
    ShMatrix sh = ShMatrix::Zero();
    CHECK_THROWS_AS(eval_sh(sh, Vector3d(0, 0, 2)), ContractError);
}

TEST_CASE("eval_sh is linear before clamping") {
    // Keep results away from the clamp so linearity is exact.
    Rng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        ShMatrix s1, s2;
        for (int k = 0; k < kShCoeffs; ++k)
            for (int c = 0; c < 3; ++c) {
                s1(k, c) = rng.normal(0.0, 0.02);
                s2(k, c) = rng.normal(0.0, 0.02);
            }
        double a = rng.uniform(0.1, 2.0), b = rng.uniform(0.1, 2.0);
        Vector3d dir = random_dir(rng);
        ShMatrix mix = a * s1 + b * s2;
        Vector3d lhs = eval_sh(mix, dir).array() - 0.5;
        Vector3d rhs = a * (eval_sh(s1, dir).array() - 0.5).matrix() +
                       b * (eval_sh(s2, dir).array() - 0.5).matrix();
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-10);
    }
}

TEST_CASE("surfel_normal canonical frame and flip") {
    Surfel s;
    Camera cam;
    cam.width = cam.height = 8;
    cam.fx = cam.fy = 8;
    cam.cx = cam.cy = 4;

    // Camera at +z looking along -z: world-to-cam flips z (and x to stay rigid).
    cam.R << -1, 0, 0, 0, 1, 0, 0, 0, -1;
    cam.t = Vector3d(0, 0, 5); // position (0,0,5)
    CHECK(surfel_normal(s, cam).isApprox(Vector3d(0, 0, 1), 1e-12));

    Camera cam2 = cam;
    cam2.R.setIdentity();
    cam2.t = Vector3d(0, 0, 5); // position (0,0,-5), looking +z
    CHECK(surfel_normal(s, cam2).isApprox(Vector3d(0, 0, -1), 1e-12));
}

TEST_CASE("surfel_normal orthogonal to tangents for random rotations") {
    Rng rng(7);
    Camera cam;
    cam.width = cam.height = 8;
    cam.fx = cam.fy = 8;
    cam.cx = cam.cy = 4;
    cam.t = Vector3d(0, 0, 4);
    for (int i = 0; i < 1000; ++i) {
        Surfel s;
        Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        while (q.norm() < 1e-3) q = Vector4d(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        q.normalize();
        s.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
        s.center = Vector3d(rng.normal(), rng.normal(), rng.normal());
        Vector3d n = surfel_normal(s, cam);
        CHECK(std::abs(n.dot(s.tangent_u())) < 1e-9);
        CHECK(std::abs(n.dot(s.tangent_v())) < 1e-9);
        CHECK(n.norm() == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(n.dot(s.center - cam.position()) <= 1e-12);
    }
}

TEST_CASE("elongation_rate basics") {
    CHECK(elongation_rate(1.0, 1.0) == doctest::Approx(1.0));
    CHECK(elongation_rate(0.01, 1.0) == doctest::Approx(0.01));
    CHECK(elongation_rate(3.0, 0.5) == doctest::Approx(0.5 / 3.0));
    CHECK(elongation_rate(3.0, 0.5) == elongation_rate(0.5, 3.0));
    CHECK_THROWS_AS(elongation_rate(0.0, 1.0), ContractError);
    CHECK_THROWS_AS(elongation_rate(1.0, -2.0), ContractError);

    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        double a = std::exp(rng.normal(0.0, 1.5)), b = std::exp(rng.normal(0.0, 1.5));
        double e = elongation_rate(a, b);
        CHECK(e > 0.0);
        CHECK(e <= 1.0);
        CHECK(e == elongation_rate(b, a));
    }
}

TEST_CASE("scene model round trip and invariants") {
    SceneModel m;
    m.resize(2);
    Surfel s;
    s.center = Vector3d(1, 2, 3);
    s.scales = Vector2d(0.5, 2.0);
    s.opacity = 0.25;
    s.rotation = Eigen::Quaterniond(Eigen::AngleAxisd(0.7, Vector3d(1, 1, 0).normalized()));
    s.sh.setConstant(0.1);
    m.set_surfel(0, s);
    m.set_surfel(1, s);

    Surfel back = m.surfel(0);
    CHECK(back.center.isApprox(s.center, 1e-12));
    CHECK(back.scales.isApprox(s.scales, 1e-12));
    CHECK(back.opacity == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(back.rotation.coeffs().isApprox(s.rotation.coeffs(), 1e-12));
    CHECK(back.sh.isApprox(s.sh, 1e-12));
    back.validate();

    std::vector<int> keep = {0, 1};
    keep[0] = 0;
    m.filter(keep);
    CHECK(m.size() == 1);
}

TEST_CASE("camera validation and projection") {
    Camera cam;
    cam.width = 16;
    cam.height = 16;
    cam.fx = cam.fy = 10.0;
    cam.cx = cam.cy = 8.0;
    cam.validate();

    Vector3d p(0.8, -0.8, 2.0);
    Vector3d proj = cam.project(p);
    CHECK(proj.x() == doctest::Approx(8.0 + 10.0 * 0.4));
    CHECK(proj.y() == doctest::Approx(8.0 - 10.0 * 0.4));
    CHECK(proj.z() == doctest::Approx(2.0));

    Vector3d ray = cam.ray_dir(proj.x(), proj.y());
    Vector3d hit = cam.position() + proj.z() * ray;
    CHECK(hit.isApprox(p, 1e-12));

    Camera bad = cam;
    bad.fx = -1;
    CHECK_THROWS_AS(bad.validate(), ContractError);
    bad = cam;
    bad.R(0, 0) = 2.0;
    CHECK_THROWS_AS(bad.validate(), ContractError);
}
