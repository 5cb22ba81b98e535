#pragma once

#include "scv2/alpha_shape.hpp"
#include "scv2/io_ply.hpp"
#include "scv2/rasterizer.hpp"

namespace scv2 {

// One representative (member centroid) per occupied voxel.
PointCloud voxel_downsample(const PointCloud& cloud, double voxel);

// Ground-plane footprint and height band of the well-observed region.
struct CropVolume {
    AlphaShape footprint;     // in ground-frame xy
    double z_min = 0.0, z_max = 0.0;
    Eigen::Matrix4d world_to_ground = Eigen::Matrix4d::Identity();

    bool contains(const Vector3d& world_point) const;
    double area() const { return footprint.area(); }
};

struct CropVolumeParams {
    int vis_threshold = 3;      // minimum observing views
    double alpha = 0.0;         // 0: 3x median nn distance of the projection
    double vis_radius = 0.0;    // 0: half the median nn distance
    double footprint_limit = 6000; // polygon estimation point cap
    RenderOptions render;
};

CropVolume estimate_crop_volume(const PointCloud& gt, const std::vector<Camera>& cams,
                                const CropVolumeParams& params,
                                const Eigen::Matrix4d& world_to_ground =
                                    Eigen::Matrix4d::Identity());

// Area-weighted uniform surface samples.
PointCloud sample_surface(const TriangleMesh& mesh, int64_t count, uint64_t seed);

PointCloud crop(const PointCloud& cloud, const CropVolume& volume);

// Similarity transform (positive scale); throws on singular input.
PointCloud apply_transform(const PointCloud& cloud, const Eigen::Matrix4d& transform);

struct EvalReport {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double tau = 0.0;
    int64_t n_recon = 0;
    int64_t n_gt_cropped = 0;
    double crop_area = 0.0;
    double z_min = 0.0, z_max = 0.0;
    bool cropped_both = true;
};

// Precision/recall/F1 at distance threshold tau. `exhaustive` switches the
// nearest-neighbor search to the O(N^2) reference path.
EvalReport f1_score(const PointCloud& recon, const PointCloud& gt, double tau,
                    bool exhaustive = false);

} // namespace scv2
