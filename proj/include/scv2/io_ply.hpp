#pragma once

#include "scv2/types.hpp"

#include <string>

namespace scv2 {

struct PointCloud {
    MatX3 points;
    MatX3 colors;   // optional, [0,1]; empty when absent
    MatX3 normals;  // optional

    Eigen::Index size() const { return points.rows(); }
    bool has_colors() const { return colors.rows() == points.rows() && points.rows() > 0; }
    bool has_normals() const { return normals.rows() == points.rows() && points.rows() > 0; }
};

struct TriangleMesh {
    MatX3 vertices;
    MatX3 normals; // per vertex, optional
    Eigen::Matrix<uint32_t, Eigen::Dynamic, 3, Eigen::RowMajor> faces;

    double area() const;
    // V - E + F over unique undirected edges.
    int64_t euler_characteristic() const;
    // Edges incident to != 2 faces.
    int64_t boundary_edge_count() const;
};

// Binary little-endian PLY. Readers accept ascii and binary_little_endian
// with float/double vertex properties and optional uchar colors.
void save_ply(const std::string& path, const PointCloud& cloud);
PointCloud load_ply(const std::string& path);

void save_mesh_ply(const std::string& path, const TriangleMesh& mesh);
TriangleMesh load_mesh_ply(const std::string& path);

} // namespace scv2
