#pragma once

#include "scv2/io_ply.hpp"
#include "scv2/types.hpp"

namespace scv2 {

// Truncated signed distance volume on a node lattice. Signed distance is
// positive on the camera side of the surface; stored values are normalized
// to [-1, 1] by the truncation band.
class TSDFVolume {
public:
    TSDFVolume(const Vector3d& min_corner, const Vector3d& max_corner, double voxel,
               double truncation);

    const Vector3d& origin() const { return origin_; }
    double voxel() const { return voxel_; }
    double truncation() const { return trunc_; }
    Eigen::Vector3i dims() const { return dims_; }

    double tsdf(int ix, int iy, int iz) const { return tsdf_[index(ix, iy, iz)]; }
    double weight(int ix, int iy, int iz) const { return weight_[index(ix, iy, iz)]; }
    Vector3d node_position(int ix, int iy, int iz) const {
        return origin_ + voxel_ * Vector3d(ix, iy, iz);
    }

    // Weighted projective update from one depth map. Pixels with non-finite
    // or non-positive depth and depths beyond `depth_truncation` are skipped.
    void integrate(const ArrayXXd& depth, const Camera& cam, double depth_truncation);

    // Direct update from an analytic signed-distance function.
    void integrate_sdf(const std::function<double(const Vector3d&)>& sdf);

    TriangleMesh extract_mesh() const;

private:
    size_t index(int ix, int iy, int iz) const {
        return (size_t(iz) * size_t(dims_.y()) + size_t(iy)) * size_t(dims_.x()) +
               size_t(ix);
    }

    Vector3d origin_;
    double voxel_;
    double trunc_;
    Eigen::Vector3i dims_; // node counts per axis
    std::vector<double> tsdf_;
    std::vector<double> weight_;
};

} // namespace scv2
