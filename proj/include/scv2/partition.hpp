#pragma once

#include "scv2/rasterizer.hpp"
#include "scv2/types.hpp"

#include <vector>

namespace scv2 {

struct ForegroundBox {
    Vector3d min = Vector3d(-1, -1, -1);
    Vector3d max = Vector3d(1, 1, 1);

    void validate() const {
        if (!((max - min).minCoeff() > 0))
            throw ContractError("foreground box must be non-degenerate");
    }
};

// Piecewise contraction: inside the box each axis maps linearly to [-1,1];
// outside, m -> sign(m) * (2 - 1/|m|). Output lies in (-2,2)^3.
Vector3d contract(const Vector3d& p, const ForegroundBox& box);

// Central third of the model's ground footprint (full height range).
ForegroundBox default_foreground(const SceneModel& model);

struct BlockPartition {
    int bx = 1, by = 1;
    ForegroundBox box;
    std::vector<std::vector<int>> block_surfels; // model rows per block
    std::vector<std::vector<int>> block_views;   // view indices per block
    std::vector<uint8_t> degenerate;             // no views assigned

    int blocks() const { return bx * by; }
};

// Bins surfels by the contracted ground coordinates of their centers.
BlockPartition partition(const SceneModel& model, int bx, int by,
                         const ForegroundBox& box);

// A view joins every block whose removal changes its render by more than
// epsilon in SSIM; views that match nowhere go to the block that changes
// them most.
void assign_views(BlockPartition& part, const SceneModel& model,
                  const std::vector<Camera>& cams, double epsilon,
                  const RenderOptions& opts = {});

} // namespace scv2
