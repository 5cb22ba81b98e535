#include "scv2/pipeline.hpp"
#include "scv2/kdtree.hpp"
#include "scv2/threading.hpp"

#include <atomic>
#include <thread>

namespace scv2 {

SceneModel init_model(const PointCloud& points, const Vector3d& background) {
    if (points.size() == 0) throw ContractError("init_model requires a non-empty cloud");
    const Eigen::Index n = points.size();
    SceneModel m;
    m.resize(n);
    m.background = background;

    KdTree tree(points.points);
    const double y00 = 0.28209479177387814;
    for (Eigen::Index i = 0; i < n; ++i) {
        auto nn = tree.knn(points.points.row(i), 3, int(i));
        double mean = 0.0;
        for (const auto& r : nn) mean += std::sqrt(r.sq_dist);
        mean = nn.empty() ? 1e-3 : mean / double(nn.size());
        mean = std::max(mean, 1e-7);

        m.centers.row(i) = points.points.row(i);
        m.rotations.row(i) << 1, 0, 0, 0;
        m.log_scales.row(i).setConstant(std::log(mean));
        m.opacity_logits[i] = logit(0.1);
        m.sh.row(i).setZero();
        Vector3d color = points.has_colors() ? Vector3d(points.colors.row(i))
                                             : Vector3d(0.5, 0.5, 0.5);
        for (int c = 0; c < 3; ++c) m.sh(i, c) = (color[c] - 0.5) / y00;
    }
    return m;
}

void align_priors(Dataset& data) {
    for (auto& view : data.train_views) {
        if (!view.prior.has_value()) continue;
        DepthPrior& prior = *view.prior;
        std::vector<std::pair<double, double>> samples;
        for (Eigen::Index i = 0; i < data.initial_points.size(); ++i) {
            Vector3d p = data.initial_points.points.row(i);
            Vector3d proj = view.cam.project(p);
            if (!(proj.z() > 0.05)) continue;
            int x = int(std::floor(proj.x())), y = int(std::floor(proj.y()));
            if (x < 0 || x >= view.cam.width || y < 0 || y >= view.cam.height) continue;
            if (!prior.mask(y, x)) continue;
            samples.push_back({prior.inv_depth(y, x), 1.0 / proj.z()});
        }
        if (samples.size() < 2) {
            prior.scale = 1.0;
            prior.shift = 0.0;
            prior.degenerate = true;
            continue;
        }
        DepthPrior fitted = align_depth_prior(prior.inv_depth, prior.mask, samples);
        prior.scale = fitted.scale;
        prior.shift = fitted.shift;
        prior.degenerate = fitted.degenerate;
    }
}

SceneModel pretrain(Dataset& data, const TrainConfig& cfg, uint64_t seed,
                    const MetricsHook& hook) {
    if (data.initial_points.size() == 0)
        throw ContractError("pretrain requires an initial point cloud");
    align_priors(data);
    SceneModel model = init_model(data.initial_points, data.background);
    Rng rng(seed);
    train_loop(model, model.size(), data.train_views, cfg, rng, hook);
    return model;
}

SceneModel tune_block(const SceneModel& full, const BlockPartition& part, int block,
                      const std::vector<ViewData>& train_views, const TrainConfig& cfg,
                      uint64_t seed, const MetricsHook& hook) {
    if (block < 0 || block >= part.blocks())
        throw ContractError("tune_block: block index out of range");
    const auto& members = part.block_surfels[size_t(block)];

    // Active block first, frozen context behind.
    std::vector<uint8_t> in_block(size_t(full.size()), 0);
    for (int i : members) in_block[size_t(i)] = 1;
    SceneModel work;
    work.resize(full.size());
    work.background = full.background;
    work.iteration = full.iteration;
    Eigen::Index j = 0;
    auto copy_row = [&](Eigen::Index dst, Eigen::Index src) {
        work.centers.row(dst) = full.centers.row(src);
        work.rotations.row(dst) = full.rotations.row(src);
        work.log_scales.row(dst) = full.log_scales.row(src);
        work.opacity_logits[dst] = full.opacity_logits[src];
        work.sh.row(dst) = full.sh.row(src);
    };
    for (Eigen::Index i = 0; i < full.size(); ++i)
        if (in_block[size_t(i)]) copy_row(j++, i);
    Eigen::Index active = j;
    for (Eigen::Index i = 0; i < full.size(); ++i)
        if (!in_block[size_t(i)]) copy_row(j++, i);

    std::vector<ViewData> views;
    for (int v : part.block_views[size_t(block)]) views.push_back(train_views[size_t(v)]);

    Eigen::Index active_end = active;
    if (!views.empty() && active > 0 && cfg.iters > 0) {
        TrainConfig tuned = cfg;
        tuned.lr.center *= cfg.tune_lr_center_mult;
        tuned.lr.log_scales *= cfg.tune_lr_scales_mult;
        tuned.weights.normal_activation_iter = 0; // active from the start
        Rng rng(seed);
        active_end = train_loop(work, active, views, tuned, rng, hook);
    }

    SceneModel out;
    out.resize(active_end);
    out.background = full.background;
    out.iteration = work.iteration;
    out.centers = work.centers.topRows(active_end);
    out.rotations = work.rotations.topRows(active_end);
    out.log_scales = work.log_scales.topRows(active_end);
    out.opacity_logits = work.opacity_logits.head(active_end);
    out.sh = work.sh.topRows(active_end);
    return out;
}

SceneModel merge_blocks(const BlockPartition& part,
                        const std::vector<SceneModel>& tuned,
                        const SceneModel& original) {
    if (int(tuned.size()) != part.blocks())
        throw ContractError("merge_blocks: missing tuned blocks");
    SceneModel merged;
    merged.resize(0);
    merged.background = original.background;
    int64_t iter = original.iteration;
    for (const auto& b : tuned) {
        merged.append_all(b);
        iter = std::max(iter, b.iteration);
    }
    merged.iteration = iter;
    if (merged.size() == 0) throw ContractError("merge_blocks produced an empty model");
    return merged;
}

SceneModel tune_all_blocks(const SceneModel& full, const BlockPartition& part,
                           const std::vector<ViewData>& train_views,
                           const TrainConfig& cfg, uint64_t seed, int parallel_blocks) {
    const int nb = part.blocks();
    std::vector<SceneModel> tuned(static_cast<size_t>(nb));
    Rng seeder(seed);
    std::vector<uint64_t> block_seeds(static_cast<size_t>(nb));
    for (int b = 0; b < nb; ++b) block_seeds[size_t(b)] = seeder.fork(uint64_t(b)).next_u64();

    if (parallel_blocks <= 1) {
        for (int b = 0; b < nb; ++b)
            tuned[size_t(b)] = tune_block(full, part, b, train_views, cfg, block_seeds[size_t(b)]);
    } else {
        std::atomic<int> next{0};
        auto worker = [&]() {
            ThreadPool::set_force_serial(true);
            for (;;) {
                int b = next.fetch_add(1);
                if (b >= nb) break;
                tuned[size_t(b)] =
                    tune_block(full, part, b, train_views, cfg, block_seeds[size_t(b)]);
            }
        };
        std::vector<std::thread> workers;
        int nw = std::min(parallel_blocks, nb);
        for (int w = 0; w < nw; ++w) workers.emplace_back(worker);
        for (auto& t : workers) t.join();
    }
    return merge_blocks(part, tuned, full);
}

} // namespace scv2
