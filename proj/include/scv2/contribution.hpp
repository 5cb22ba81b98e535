#pragma once

#include "scv2/rasterizer.hpp"
#include "scv2/types.hpp"

namespace scv2 {

// Accumulated per-surfel blend statistics across views.
struct ContributionStats {
    VectorXd sum;       // sum over views of the per-view contribution
    int64_t views = 0;
    double gamma = 0.5;

    void reset(Eigen::Index n, double g) {
        sum = VectorXd::Zero(n);
        views = 0;
        gamma = g;
    }
};

// Per-view contribution: mean over the pixels where the surfel's blend weight
// exceeds the contribution cutoff of alpha^gamma * T^(1-gamma). Surfels that
// touch no pixel score 0.
VectorXd single_view_contribution(const SceneModel& model, const Camera& cam,
                                  const RenderOptions& opts, double gamma);

void accumulate_contribution(ContributionStats& stats, const VectorXd& view_values);

// Mean over accumulated views; throws when no views were accumulated.
VectorXd average_contribution(const ContributionStats& stats);

// Contributions over a set of views in one call.
VectorXd contribution_over_views(const SceneModel& model,
                                 const std::vector<Camera>& cams,
                                 const RenderOptions& opts, double gamma);

// Keep mask for percentile trimming: drops every surfel whose contribution is
// <= the nearest-rank `ratio` quantile (ratio 0 drops only exact zeros).
// Only the first `active_count` rows participate; the rest are kept.
std::vector<int> trim_keep_mask(const VectorXd& contributions, double ratio,
                                Eigen::Index active_count);

// In-place trim; throws if the model would become empty.
void trim(SceneModel& model, const VectorXd& contributions, double ratio);

} // namespace scv2
