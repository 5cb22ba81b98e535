#include "scv2/density_control.hpp"

namespace scv2 {

const char* to_string(GradientSource s) {
    switch (s) {
        case GradientSource::SsimOnly: return "ssim_only";
        case GradientSource::Total: return "total";
        case GradientSource::RgbOnly: return "rgb_only";
        case GradientSource::SsimPlusDepth: return "ssim_plus_depth";
    }
    return "?";
}

GradientSource gradient_source_from_string(const std::string& s) {
    if (s == "ssim_only") return GradientSource::SsimOnly;
    if (s == "total") return GradientSource::Total;
    if (s == "rgb_only") return GradientSource::RgbOnly;
    if (s == "ssim_plus_depth") return GradientSource::SsimPlusDepth;
    throw ContractError("unknown gradient source: " + s);
}

VectorXd densify_gradient(const DensifyAccumulators& acc, double omega) {
    const Eigen::Index n = acc.size();
    VectorXd out = VectorXd::Zero(n);
    double sum_total = 0.0, sum_ssim = 0.0;
    int64_t observed = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (acc.count[i] < 1.0) continue;
        sum_total += acc.total_norm[i] / acc.count[i];
        sum_ssim += acc.ssim_norm[i] / acc.count[i];
        ++observed;
    }
    double factor = 1.0;
    if (observed > 0 && sum_ssim > 0.0)
        factor = std::max(omega * (sum_total / sum_ssim), 1.0);
    for (Eigen::Index i = 0; i < n; ++i)
        if (acc.count[i] >= 1.0) out[i] = factor * acc.ssim_norm[i] / acc.count[i];
    return out;
}

DensifySelection select_densify(const SceneModel& model, const VectorXd& norms,
                                const DensifyConfig& cfg,
                                Eigen::Index active_count) {
    if (norms.size() != model.size())
        throw ContractError("select_densify: norm vector length mismatch");
    DensifySelection sel;
    for (Eigen::Index i = 0; i < std::min(active_count, model.size()); ++i) {
        if (!(norms[i] > cfg.grad_threshold)) continue;
        double su = std::exp(model.log_scales(i, 0));
        double sv = std::exp(model.log_scales(i, 1));
        if (elongation_rate(su, sv) < cfg.elongation_min) continue; // needle filter
        if (std::max(su, sv) <= cfg.split_scale_threshold)
            sel.clone.push_back(int(i));
        else
            sel.split.push_back(int(i));
    }
    return sel;
}

ModelEdit apply_densify(SceneModel& model, const DensifySelection& sel,
                        const DensifyAccumulators& acc, const DensifyConfig& cfg,
                        Eigen::Index active_count, Rng& rng) {
    // The elongation filter is a hard guarantee, not just a selection rule.
    for (const auto* set : {&sel.clone, &sel.split})
        for (int i : *set) {
            double su = std::exp(model.log_scales(i, 0));
            double sv = std::exp(model.log_scales(i, 1));
            if (elongation_rate(su, sv) < cfg.elongation_min)
                throw std::logic_error("apply_densify: elongation filter violated");
            if (Eigen::Index(i) >= active_count)
                throw std::logic_error("apply_densify: frozen surfel selected");
        }

    std::vector<uint8_t> is_split(size_t(model.size()), 0);
    for (int i : sel.split) is_split[size_t(i)] = 1;

    SceneModel out;
    out.background = model.background;
    out.iteration = model.iteration;
    Eigen::Index n_new = active_count - Eigen::Index(sel.split.size()) +
                         Eigen::Index(sel.clone.size()) +
                         2 * Eigen::Index(sel.split.size()) +
                         (model.size() - active_count);
    out.resize(n_new);
    ModelEdit edit;
    edit.src.reserve(size_t(n_new));

    Eigen::Index j = 0;
    auto copy_row = [&](Eigen::Index dst, Eigen::Index src) {
        out.centers.row(dst) = model.centers.row(src);
        out.rotations.row(dst) = model.rotations.row(src);
        out.log_scales.row(dst) = model.log_scales.row(src);
        out.opacity_logits[dst] = model.opacity_logits[src];
        out.sh.row(dst) = model.sh.row(src);
    };

    // Kept active rows (split parents removed).
    for (Eigen::Index i = 0; i < active_count; ++i) {
        if (is_split[size_t(i)]) continue;
        copy_row(j, i);
        edit.src.push_back(int(i));
        ++j;
    }
    // Clones: nudged along the accumulated descent direction.
    for (int i : sel.clone) {
        copy_row(j, i);
        Vector3d g = acc.world_grad.row(i);
        double gn = g.norm();
        if (gn > 1e-18) {
            double step = 0.01 * std::exp(model.log_scales.row(i).maxCoeff());
            out.centers.row(j) -= (step / gn) * g.transpose();
        }
        edit.src.push_back(-1);
        ++j;
    }
    // Splits: two children sampled on the parent disk.
    for (int i : sel.split) {
        Surfel parent = model.surfel(i);
        Matrix3d rot = parent.rotation.toRotationMatrix();
        for (int child = 0; child < 2; ++child) {
            copy_row(j, i);
            double du = rng.normal(0.0, parent.scales.x());
            double dv = rng.normal(0.0, parent.scales.y());
            out.centers.row(j) =
                (parent.center + du * rot.col(0) + dv * rot.col(1)).transpose();
            out.log_scales.row(j) =
                model.log_scales.row(i).array() - std::log(1.6);
            edit.src.push_back(-1);
            ++j;
        }
    }
    edit.new_active_count = j;
    // Frozen context, unchanged.
    for (Eigen::Index i = active_count; i < model.size(); ++i) {
        copy_row(j, i);
        edit.src.push_back(int(i));
        ++j;
    }
    model = std::move(out);
    return edit;
}

ModelEdit cull_low_opacity(SceneModel& model, const DensifyConfig& cfg,
                           Eigen::Index active_count) {
    std::vector<int> keep(size_t(model.size()), 1);
    Eigen::Index removed = 0;
    for (Eigen::Index i = 0; i < active_count; ++i) {
        if (sigmoid(model.opacity_logits[i]) < cfg.min_opacity) {
            keep[size_t(i)] = 0;
            ++removed;
        }
    }
    if (removed == model.size())
        throw ContractError("cull would remove every surfel");
    ModelEdit edit;
    edit.new_active_count = active_count - removed;
    for (Eigen::Index i = 0; i < model.size(); ++i)
        if (keep[size_t(i)]) edit.src.push_back(int(i));
    if (removed > 0) model.filter(keep);
    return edit;
}

void reset_opacity(SceneModel& model, const DensifyConfig& cfg,
                   Eigen::Index active_count) {
    double cap = logit(std::min(2.0 * cfg.min_opacity, 1.0 - 1e-9));
    for (Eigen::Index i = 0; i < active_count; ++i)
        model.opacity_logits[i] = std::min(model.opacity_logits[i], cap);
}

} // namespace scv2
