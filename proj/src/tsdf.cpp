#include "scv2/tsdf.hpp"
#include "scv2/threading.hpp"

#include <functional>
#include <map>

namespace scv2 {

#include "mc_tables.inc"

TSDFVolume::TSDFVolume(const Vector3d& min_corner, const Vector3d& max_corner,
                       double voxel, double truncation)
    : origin_(min_corner), voxel_(voxel), trunc_(truncation) {
    if (!(voxel > 0)) throw ContractError("tsdf: voxel size must be positive");
    if (!(truncation >= voxel)) throw ContractError("tsdf: truncation must cover a voxel");
    Vector3d span = max_corner - min_corner;
    if (!(span.minCoeff() > 0)) throw ContractError("tsdf: empty volume bounds");
    for (int k = 0; k < 3; ++k) dims_[k] = int(std::ceil(span[k] / voxel)) + 1;
    size_t n = size_t(dims_.x()) * size_t(dims_.y()) * size_t(dims_.z());
    tsdf_.assign(n, 1.0);
    weight_.assign(n, 0.0);
}

void TSDFVolume::integrate(const ArrayXXd& depth, const Camera& cam,
                           double depth_truncation) {
    cam.validate();
    if (!(depth_truncation > 0))
        throw ContractError("tsdf: depth truncation must be positive");
    if (depth.rows() != cam.height || depth.cols() != cam.width)
        throw ContractError("tsdf: depth image does not match the camera");

    parallel_ranges(size_t(dims_.z()), 16, [&](size_t z0, size_t z1, size_t) {
        for (size_t iz = z0; iz < z1; ++iz)
            for (int iy = 0; iy < dims_.y(); ++iy)
                for (int ix = 0; ix < dims_.x(); ++ix) {
                    Vector3d p = node_position(ix, iy, int(iz));
                    Vector3d c = cam.world_to_cam(p);
                    if (!(c.z() > 1e-9)) continue;
                    int px = int(std::floor(cam.fx * c.x() / c.z() + cam.cx));
                    int py = int(std::floor(cam.fy * c.y() / c.z() + cam.cy));
                    if (px < 0 || px >= cam.width || py < 0 || py >= cam.height)
                        continue;
                    double d = depth(py, px);
                    if (!std::isfinite(d) || d <= 0.0 || d > depth_truncation) continue;
                    double sdf = d - c.z();
                    if (sdf < -trunc_) continue; // far behind the surface
                    double clamped = std::clamp(sdf, -trunc_, trunc_) / trunc_;
                    size_t at = index(ix, iy, int(iz));
                    double w = weight_[at];
                    tsdf_[at] = (w * tsdf_[at] + clamped) / (w + 1.0);
                    weight_[at] = w + 1.0;
                }
    });
}

void TSDFVolume::integrate_sdf(const std::function<double(const Vector3d&)>& sdf) {
    parallel_ranges(size_t(dims_.z()), 16, [&](size_t z0, size_t z1, size_t) {
        for (size_t iz = z0; iz < z1; ++iz)
            for (int iy = 0; iy < dims_.y(); ++iy)
                for (int ix = 0; ix < dims_.x(); ++ix) {
                    Vector3d p = node_position(ix, iy, int(iz));
                    double clamped = std::clamp(sdf(p), -trunc_, trunc_) / trunc_;
                    size_t at = index(ix, iy, int(iz));
                    double w = weight_[at];
                    tsdf_[at] = (w * tsdf_[at] + clamped) / (w + 1.0);
                    weight_[at] = w + 1.0;
                }
    });
}

TriangleMesh TSDFVolume::extract_mesh() const {
    // Bourke cube corner order.
    static const int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                                      {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
    static const int kEdgeEnds[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0},
                                         {4, 5}, {5, 6}, {6, 7}, {7, 4},
                                         {0, 4}, {1, 5}, {2, 6}, {3, 7}};

    TriangleMesh mesh;
    std::vector<Vector3d> verts;
    std::vector<Vector3d> normals;
    std::vector<std::array<uint32_t, 3>> faces;
    std::map<std::pair<int64_t, int64_t>, uint32_t> edge_vertex;

    auto node_id = [&](int ix, int iy, int iz) {
        return (int64_t(iz) * dims_.y() + iy) * dims_.x() + ix;
    };
    auto gradient = [&](int ix, int iy, int iz) {
        auto sample = [&](int x, int y, int z) {
            x = std::clamp(x, 0, dims_.x() - 1);
            y = std::clamp(y, 0, dims_.y() - 1);
            z = std::clamp(z, 0, dims_.z() - 1);
            return tsdf_[index(x, y, z)];
        };
        return Vector3d(sample(ix + 1, iy, iz) - sample(ix - 1, iy, iz),
                        sample(ix, iy + 1, iz) - sample(ix, iy - 1, iz),
                        sample(ix, iy, iz + 1) - sample(ix, iy, iz - 1));
    };

    for (int iz = 0; iz + 1 < dims_.z(); ++iz)
        for (int iy = 0; iy + 1 < dims_.y(); ++iy)
            for (int ix = 0; ix + 1 < dims_.x(); ++ix) {
                double val[8];
                bool covered = true;
                int cube = 0;
                int cx[8], cy[8], cz[8];
                for (int k = 0; k < 8; ++k) {
                    cx[k] = ix + kCorner[k][0];
                    cy[k] = iy + kCorner[k][1];
                    cz[k] = iz + kCorner[k][2];
                    size_t at = index(cx[k], cy[k], cz[k]);
                    if (weight_[at] <= 0.0) {
                        covered = false;
                        break;
                    }
                    val[k] = tsdf_[at];
                    if (val[k] < 0.0) cube |= 1 << k;
                }
                if (!covered || kEdgeTable[cube] == 0) continue;

                uint32_t edge_vert[12];
                for (int e = 0; e < 12; ++e) {
                    if (!(kEdgeTable[cube] & (1 << e))) continue;
                    int a = kEdgeEnds[e][0], b = kEdgeEnds[e][1];
                    int64_t ida = node_id(cx[a], cy[a], cz[a]);
                    int64_t idb = node_id(cx[b], cy[b], cz[b]);
                    auto key = std::minmax(ida, idb);
                    auto it = edge_vertex.find({key.first, key.second});
                    if (it != edge_vertex.end()) {
                        edge_vert[e] = it->second;
                        continue;
                    }
                    double va = val[a], vb = val[b];
                    double t = va == vb ? 0.5 : va / (va - vb);
                    t = std::clamp(t, 0.0, 1.0);
                    Vector3d pa = node_position(cx[a], cy[a], cz[a]);
                    Vector3d pb = node_position(cx[b], cy[b], cz[b]);
                    Vector3d ga = gradient(cx[a], cy[a], cz[a]);
                    Vector3d gb = gradient(cx[b], cy[b], cz[b]);
                    Vector3d g = (1.0 - t) * ga + t * gb;
                    double gn = g.norm();
                    uint32_t idx = uint32_t(verts.size());
                    verts.push_back(pa + t * (pb - pa));
                    normals.push_back(gn > 1e-12 ? (g / gn).eval() : Vector3d(0, 0, 1));
                    edge_vertex[{key.first, key.second}] = idx;
                    edge_vert[e] = idx;
                }
                for (int t = 0; kTriTable[cube][t] != -1; t += 3)
                    faces.push_back({edge_vert[kTriTable[cube][t]],
                                     edge_vert[kTriTable[cube][t + 1]],
                                     edge_vert[kTriTable[cube][t + 2]]});
            }

    mesh.vertices.resize(Eigen::Index(verts.size()), 3);
    mesh.normals.resize(Eigen::Index(normals.size()), 3);
    for (size_t i = 0; i < verts.size(); ++i) {
        mesh.vertices.row(Eigen::Index(i)) = verts[i];
        mesh.normals.row(Eigen::Index(i)) = normals[i];
    }
    mesh.faces.resize(Eigen::Index(faces.size()), 3);
    for (size_t i = 0; i < faces.size(); ++i)
        mesh.faces.row(Eigen::Index(i)) << faces[i][0], faces[i][1], faces[i][2];
    return mesh;
}

} // namespace scv2
