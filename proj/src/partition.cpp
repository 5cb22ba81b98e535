#include "scv2/partition.hpp"
#include "scv2/ssim.hpp"

namespace scv2 {

Vector3d contract(const Vector3d& p, const ForegroundBox& box) {
    box.validate();
    Vector3d c = 0.5 * (box.min + box.max);
    Vector3d half = 0.5 * (box.max - box.min);
    Vector3d out;
    for (int k = 0; k < 3; ++k) {
        double m = (p[k] - c[k]) / half[k];
        out[k] = std::abs(m) <= 1.0 ? m : (m > 0 ? 2.0 - 1.0 / m : -2.0 - 1.0 / m);
    }
    return out;
}

ForegroundBox default_foreground(const SceneModel& model) {
    if (model.size() == 0) throw ContractError("default_foreground: empty model");
    Vector3d lo = model.centers.colwise().minCoeff();
    Vector3d hi = model.centers.colwise().maxCoeff();
    Vector3d c = 0.5 * (lo + hi);
    Vector3d half = 0.5 * (hi - lo);
    for (int k = 0; k < 3; ++k) half[k] = std::max(half[k], 1e-6);
    ForegroundBox box;
    // Central third of the ground footprint; full height.
    box.min = Vector3d(c.x() - half.x() / 3.0, c.y() - half.y() / 3.0, lo.z() - 1e-6);
    box.max = Vector3d(c.x() + half.x() / 3.0, c.y() + half.y() / 3.0, hi.z() + 1e-6);
    return box;
}

BlockPartition partition(const SceneModel& model, int bx, int by,
                         const ForegroundBox& box) {
    if (bx < 1 || by < 1) throw ContractError("partition grid must be at least 1x1");
    box.validate();
    BlockPartition part;
    part.bx = bx;
    part.by = by;
    part.box = box;
    part.block_surfels.assign(size_t(bx) * size_t(by), {});
    part.block_views.assign(size_t(bx) * size_t(by), {});
    part.degenerate.assign(size_t(bx) * size_t(by), 0);
    for (Eigen::Index i = 0; i < model.size(); ++i) {
        Vector3d c = contract(model.centers.row(i), box);
        int gx = std::clamp(int(std::floor((c.x() + 2.0) / 4.0 * bx)), 0, bx - 1);
        int gy = std::clamp(int(std::floor((c.y() + 2.0) / 4.0 * by)), 0, by - 1);
        part.block_surfels[size_t(gy) * bx + gx].push_back(int(i));
    }
    return part;
}

void assign_views(BlockPartition& part, const SceneModel& model,
                  const std::vector<Camera>& cams, double epsilon,
                  const RenderOptions& opts) {
    if (cams.empty()) throw ContractError("assign_views requires cameras");
    const int nb = part.blocks();
    for (auto& v : part.block_views) v.clear();

    // Model with one block removed, per block.
    std::vector<SceneModel> ablated(static_cast<size_t>(nb));
    for (int m = 0; m < nb; ++m) {
        std::vector<int> keep(size_t(model.size()), 1);
        for (int i : part.block_surfels[size_t(m)]) keep[size_t(i)] = 0;
        ablated[size_t(m)] = model;
        ablated[size_t(m)].filter(keep);
    }

    for (size_t k = 0; k < cams.size(); ++k) {
        RenderOutput full = render(model, cams[k], opts);
        int best_block = 0;
        double best_ssim = 2.0;
        bool assigned = false;
        for (int m = 0; m < nb; ++m) {
            double s;
            if (part.block_surfels[size_t(m)].empty()) {
                s = 1.0; // removing nothing changes nothing
            } else {
                RenderOutput without = render(ablated[size_t(m)], cams[k], opts);
                s = ssim(full.color, without.color);
            }
            if (s < best_ssim) {
                best_ssim = s;
                best_block = m;
            }
            if (s < 1.0 - epsilon) {
                part.block_views[size_t(m)].push_back(int(k));
                assigned = true;
            }
        }
        if (!assigned) part.block_views[size_t(best_block)].push_back(int(k));
    }
    for (int m = 0; m < nb; ++m)
        part.degenerate[size_t(m)] = part.block_views[size_t(m)].empty() ? 1 : 0;
}

} // namespace scv2
