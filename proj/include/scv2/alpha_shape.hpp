#pragma once

#include "scv2/types.hpp"

#include <vector>

namespace scv2 {

using Ring = std::vector<Eigen::Vector2d>;

// Region boundary of a planar point set: Delaunay triangles with
// circumradius <= alpha, boundary edges assembled into closed rings
// (even-odd semantics; holes appear as separate rings).
struct AlphaShape {
    std::vector<Ring> rings;

    double area() const;                          // even-odd signed coverage
    bool contains(const Eigen::Vector2d& p) const; // boundary inclusive
};

AlphaShape alpha_shape_2d(const std::vector<Eigen::Vector2d>& points, double alpha);

// Delaunay triangulation (exposed for the alpha-shape tests).
std::vector<std::array<int, 3>> delaunay_2d(const std::vector<Eigen::Vector2d>& points);

} // namespace scv2
