#pragma once

#include "scv2/io_ply.hpp"
#include "scv2/partition.hpp"
#include "scv2/trainer.hpp"

#include <string>
#include <vector>

namespace scv2 {

struct Dataset {
    std::vector<ViewData> train_views;
    std::vector<ViewData> test_views;
    PointCloud initial_points;
    PointCloud gt_points;      // empty when absent
    std::string gt_mesh_path;  // empty when absent
    Vector3d background = Vector3d::Zero();
};

// Reads the directory layout written by the dataset generator: cameras.json,
// images/, optional depth_priors/, points3d.ply (+ gt artifacts when present).
Dataset load_dataset(const std::string& dir);

// Surfels from a point cloud: isotropic scales from the mean 3-NN distance,
// opacity 0.1, SH limited to the color's constant term.
SceneModel init_model(const PointCloud& points, const Vector3d& background);

// Fits every prior's affine alignment against inverse depths of the initial
// cloud projected into the view.
void align_priors(Dataset& data);

SceneModel pretrain(Dataset& data, const TrainConfig& cfg, uint64_t seed,
                    const MetricsHook& hook = nullptr);

// Fine-tunes one block against the frozen remainder of the model. Returns
// the tuned block surfels only.
SceneModel tune_block(const SceneModel& full, const BlockPartition& part, int block,
                      const std::vector<ViewData>& train_views, const TrainConfig& cfg,
                      uint64_t seed, const MetricsHook& hook = nullptr);

// Concatenates tuned blocks in block order. Requires one entry per block.
SceneModel merge_blocks(const BlockPartition& part,
                        const std::vector<SceneModel>& tuned,
                        const SceneModel& original);

// Runs every block (optionally with several OS-level workers) and merges.
SceneModel tune_all_blocks(const SceneModel& full, const BlockPartition& part,
                           const std::vector<ViewData>& train_views,
                           const TrainConfig& cfg, uint64_t seed, int parallel_blocks);

} // namespace scv2
