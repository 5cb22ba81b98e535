#pragma once

#include "scv2/rasterizer.hpp"
#include "scv2/rng.hpp"
#include "scv2/types.hpp"

namespace scv2::testutil {

// Camera at the origin looking along +z, principal point at the image center.
inline Camera simple_camera(int size = 32, double focal = 0.0) {
    Camera cam;
    cam.width = cam.height = size;
    cam.fx = cam.fy = focal > 0 ? focal : size * 0.9;
    cam.cx = cam.cy = size / 2.0;
    return cam;
}

// Random surfels inside the camera frustum, kept away from clamp corners so
// the forward map stays smooth for finite differences.
inline SceneModel random_scene(int n, Rng& rng, double zmin = 2.0, double zmax = 6.0) {
    SceneModel m;
    m.resize(n);
    for (int i = 0; i < n; ++i) {
        Surfel s;
        double z = rng.uniform(zmin, zmax);
        s.center = Vector3d(rng.uniform(-0.8, 0.8) * z * 0.4,
                            rng.uniform(-0.8, 0.8) * z * 0.4, z);
        Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        while (q.norm() < 1e-3)
            q = Vector4d(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        q.normalize();
        s.rotation = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
        s.scales = Vector2d(std::exp(rng.uniform(-1.8, -0.4)),
                            std::exp(rng.uniform(-1.8, -0.4)));
        s.opacity = rng.uniform(0.2, 0.9);
        for (int k = 0; k < kShCoeffs; ++k)
            for (int c = 0; c < 3; ++c)
                s.sh(k, c) = k == 0 ? rng.uniform(-0.4, 0.8) : rng.normal(0.0, 0.05);
        m.set_surfel(i, s);
    }
    m.background = Vector3d(0.1, 0.2, 0.3);
    return m;
}

} // namespace scv2::testutil
