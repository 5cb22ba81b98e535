#pragma once

#include "scv2/image.hpp"
#include "scv2/io_ply.hpp"
#include "scv2/rng.hpp"
#include "scv2/types.hpp"

#include <string>
#include <vector>

namespace scv2 {

struct BoxSpec {
    Vector3d center;  // resting on the ground: center.z = size.z / 2
    Vector3d size;
    Vector3d albedo;
};

// A ground plane with axis-aligned boxes, a two-ring inward-looking camera
// trajectory, and analytic ray-cast renders. Stands in for a captured scene
// at desk scale: images come from an external (non-splat) renderer, depths
// are exact.
struct SceneSpec {
    double ground_half = 10.0;
    Vector3d ground_albedo = Vector3d(0.45, 0.42, 0.36);
    Vector3d box_albedo_lo = Vector3d(0.2, 0.2, 0.25);
    Vector3d box_albedo_hi = Vector3d(0.85, 0.8, 0.7);
    int n_boxes = 8;
    std::vector<BoxSpec> boxes; // generated from the seed when empty

    int image_size = 64;
    int ring1_count = 16;
    double ring1_radius = 13.0, ring1_height = 7.0;
    int ring2_count = 8;
    double ring2_radius = 7.0, ring2_height = 11.0;
    int test_every = 8; // every n-th camera is a test view

    Vector3d sky = Vector3d(0.62, 0.73, 0.88);
    Vector3d light_dir = Vector3d(0.4, 0.3, -0.85);
    bool checker = true;        // two-tone albedo pattern
    double checker_period = 1.6;

    uint64_t seed = 7;
    int initial_points = 1500;  // sparse starting cloud
    int gt_points = 30000;      // evaluation cloud sampled on the surface
    double initial_jitter = 0.05;
    double prior_scale = 1.0;   // affine map applied to stored inverse depth
    double prior_shift = 0.0;

    void finalize(); // fills `boxes` deterministically when empty
};

std::vector<Camera> scene_cameras(const SceneSpec& spec);

// Analytic ray cast: Lambertian shading, exact camera-space depth
// (infinity on sky pixels).
void raycast(const SceneSpec& spec, const Camera& cam, Image3& image, ArrayXXd& depth);

TriangleMesh scene_mesh(const SceneSpec& spec);

// Area-weighted surface samples; ground under boxes is excluded.
PointCloud sample_scene_points(const SceneSpec& spec, int64_t count, uint64_t seed);

// Subsampled, jittered starting cloud with albedo colors.
PointCloud initial_cloud(const SceneSpec& spec);

// Writes images/, depth_priors/, cameras.json, points3d.ply, gt_points.ply,
// gt_mesh.ply under out_dir. Deterministic: same spec and seed give
// byte-identical files.
void generate_dataset(const SceneSpec& spec, const std::string& out_dir);

// Replaces a fraction of surfels with high-opacity needles (elongation about
// 1e-3); used by the count-explosion regression scenario.
void make_adversarial_elongated(SceneModel& model, double fraction, uint64_t seed);

} // namespace scv2
