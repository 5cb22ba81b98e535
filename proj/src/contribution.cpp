#include "scv2/contribution.hpp"

#include <algorithm>

namespace scv2 {

VectorXd single_view_contribution(const SceneModel& model, const Camera& cam,
                                  const RenderOptions& opts, double gamma) {
    if (!(gamma >= 0.0 && gamma <= 1.0))
        throw ContractError("contribution gamma must be in [0,1]");
    const Eigen::Index n = model.size();
    constexpr size_t kChunks = 16;
    std::vector<VectorXd> sums(kChunks, VectorXd::Zero(n));
    std::vector<Eigen::VectorXi> counts(kChunks, Eigen::VectorXi::Zero(n));

    visit_blend_chains(model, cam, opts, kChunks,
                       [&](size_t chunk, int, int, const std::vector<BlendSample>& chain) {
                           for (const auto& b : chain) {
                               if (!(b.alpha * b.T > opts.contribution_cutoff)) continue;
                               sums[chunk][b.surfel] +=
                                   std::pow(b.alpha, gamma) * std::pow(b.T, 1.0 - gamma);
                               counts[chunk][b.surfel] += 1;
                           }
                       });

    VectorXd sum = VectorXd::Zero(n);
    Eigen::VectorXi count = Eigen::VectorXi::Zero(n);
    for (size_t c = 0; c < kChunks; ++c) {
        sum += sums[c];
        count += counts[c];
    }
    VectorXd out = VectorXd::Zero(n);
    for (Eigen::Index i = 0; i < n; ++i)
        if (count[i] > 0) out[i] = sum[i] / double(count[i]);
    return out;
}

void accumulate_contribution(ContributionStats& stats, const VectorXd& view_values) {
    if (stats.sum.size() != view_values.size())
        throw ContractError("contribution stats size mismatch");
    stats.sum += view_values;
    ++stats.views;
}

VectorXd average_contribution(const ContributionStats& stats) {
    if (stats.views < 1)
        throw ContractError("average_contribution requires at least one view");
    return stats.sum / double(stats.views);
}

VectorXd contribution_over_views(const SceneModel& model,
                                 const std::vector<Camera>& cams,
                                 const RenderOptions& opts, double gamma) {
    ContributionStats stats;
    stats.reset(model.size(), gamma);
    for (const auto& cam : cams)
        accumulate_contribution(stats, single_view_contribution(model, cam, opts, gamma));
    return average_contribution(stats);
}

std::vector<int> trim_keep_mask(const VectorXd& contributions, double ratio,
                                Eigen::Index active_count) {
    if (!(ratio >= 0.0 && ratio < 1.0))
        throw ContractError("trim ratio must be in [0,1)");
    const Eigen::Index n = contributions.size();
    active_count = std::min(active_count, n);

    double threshold = 0.0;
    if (ratio > 0.0 && active_count > 0) {
        std::vector<double> vals(contributions.data(), contributions.data() + active_count);
        std::sort(vals.begin(), vals.end());
        // Nearest-rank quantile.
        size_t rank = size_t(std::ceil(ratio * double(active_count)));
        rank = std::min(std::max<size_t>(rank, 1), vals.size());
        threshold = vals[rank - 1];
    }
    std::vector<int> keep(size_t(n), 1);
    for (Eigen::Index i = 0; i < active_count; ++i)
        if (contributions[i] <= threshold) keep[size_t(i)] = 0;
    return keep;
}

void trim(SceneModel& model, const VectorXd& contributions, double ratio) {
    if (contributions.size() != model.size())
        throw ContractError("trim: contribution vector length mismatch");
    auto keep = trim_keep_mask(contributions, ratio, model.size());
    Eigen::Index kept = 0;
    for (int k : keep) kept += k;
    if (kept == 0) throw ContractError("trim would remove every surfel");
    model.filter(keep);
}

} // namespace scv2
