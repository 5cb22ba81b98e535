#include "scv2/trainer.hpp"
#include "scv2/ssim.hpp"

namespace scv2 {

namespace {

// Inverse of expected depth over confidently covered pixels.
ArrayXXd predicted_inverse_depth(const RenderOutput& out,
                                 Eigen::ArrayXX<uint8_t>& valid) {
    const Eigen::Index h = out.height(), w = out.width();
    ArrayXXd inv = ArrayXXd::Zero(h, w);
    valid.resize(h, w);
    for (Eigen::Index y = 0; y < h; ++y)
        for (Eigen::Index x = 0; x < w; ++x) {
            double d = out.expected_depth(y, x);
            bool ok = out.alpha(y, x) > 0.5 && d > 1e-6;
            valid(y, x) = ok ? 1 : 0;
            if (ok) inv(y, x) = 1.0 / d;
        }
    return inv;
}

} // namespace

Eigen::Index train_loop(SceneModel& model, Eigen::Index active_count,
                        const std::vector<ViewData>& views, const TrainConfig& cfg,
                        Rng& rng, const MetricsHook& hook) {
    if (views.empty()) throw ContractError("train_loop requires at least one view");
    if (model.size() == 0) throw ContractError("train_loop requires a non-empty model");
    cfg.densify.validate();
    active_count = std::min(active_count, model.size());

    double extent = cfg.scene_extent > 0 ? cfg.scene_extent : model.extent();

    Adam opt;
    opt.reset(model.size());
    DensifyAccumulators acc;
    acc.reset(model.size());

    std::vector<Camera> unit_cams;
    unit_cams.reserve(views.size());
    for (const auto& v : views) unit_cams.push_back(v.cam);

    auto trim_now = [&](Eigen::Index& active) {
        VectorXd contrib =
            contribution_over_views(model, unit_cams, cfg.render, cfg.gamma);
        auto keep = trim_keep_mask(contrib, cfg.trim_ratio, active);
        Eigen::Index kept_total = 0;
        for (int k : keep) kept_total += k;
        if (kept_total == 0) throw ContractError("trim would remove every surfel");
        std::vector<int> src;
        Eigen::Index kept_active = 0;
        for (Eigen::Index i = 0; i < model.size(); ++i) {
            if (!keep[size_t(i)]) continue;
            src.push_back(int(i));
            if (i < active) ++kept_active;
        }
        model.filter(keep);
        opt.remap(src);
        DensifyAccumulators next;
        next.reset(model.size());
        Eigen::Index j = 0;
        for (Eigen::Index i = 0; i < Eigen::Index(keep.size()); ++i) {
            if (!keep[size_t(i)]) continue;
            next.total_norm[j] = acc.total_norm[i];
            next.ssim_norm[j] = acc.ssim_norm[i];
            next.count[j] = acc.count[i];
            next.world_grad.row(j) = acc.world_grad.row(i);
            ++j;
        }
        acc = std::move(next);
        active = kept_active;
    };

    std::vector<size_t> order(views.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    size_t order_pos = order.size(); // forces an initial shuffle

    int64_t trim_interval =
        cfg.trim_ratio > 0.0 && cfg.trim_every_frac > 0.0
            ? std::max<int64_t>(1, int64_t(cfg.trim_every_frac * double(cfg.iters)))
            : 0;
    if (cfg.trim_ratio > 0.0 && cfg.trim_at_start) trim_now(active_count);

    for (int64_t iter = 1; iter <= cfg.iters; ++iter) {
        if (order_pos >= order.size()) {
            rng.shuffle(order);
            order_pos = 0;
        }
        const ViewData& view = views[order[order_pos++]];

        RenderOutput out = render(model, view.cam, cfg.render);
        PhotometricResult photo =
            photometric_loss(out.color, view.image, cfg.weights.lambda_ssim);
        double loss = photo.loss;

        PixelLossGrads total;
        total.d_color = photo.d_render;

        // Depth prior.
        ArrayXXd d_depth;
        if (cfg.weights.depth_enabled && view.prior.has_value()) {
            Eigen::ArrayXX<uint8_t> valid;
            ArrayXXd inv = predicted_inverse_depth(out, valid);
            DepthLossResult dl =
                depth_loss(inv, *view.prior, std::min(iter, cfg.weights.total_iters),
                           cfg.weights, valid);
            if (!dl.empty_mask) {
                loss += dl.loss;
                // d/d depth of 1/depth.
                d_depth = ArrayXXd::Zero(out.height(), out.width());
                for (Eigen::Index y = 0; y < out.height(); ++y)
                    for (Eigen::Index x = 0; x < out.width(); ++x)
                        if (valid(y, x))
                            d_depth(y, x) = -dl.d_inv_depth(y, x) * inv(y, x) * inv(y, x);
                total.d_depth = d_depth;
            }
        }

        // Normal consistency (depth branch constant).
        Image3 dn;
        if (cfg.weights.lambda_normal > 0.0 &&
            iter >= cfg.weights.normal_activation_iter) {
            dn = depth_normals(out.expected_depth, out.alpha, view.cam);
            NormalLossResult nl =
                normal_loss(out.normal, dn, out.alpha, cfg.weights.lambda_normal);
            loss += nl.loss;
            total.d_normal = nl.d_render_normal;
        }

        // Densification channel.
        PixelLossGrads dens;
        switch (cfg.densify.source) {
            case GradientSource::SsimOnly:
                dens.d_color = photo.d_render_ssim;
                break;
            case GradientSource::Total:
                dens = total;
                break;
            case GradientSource::RgbOnly: {
                dens.d_color.setZero(out.height(), out.width());
                for (int c = 0; c < 3; ++c)
                    dens.d_color.plane(c) =
                        photo.d_render.plane(c) - photo.d_render_ssim.plane(c);
                break;
            }
            case GradientSource::SsimPlusDepth: {
                dens.d_color = photo.d_render_ssim;
                if (d_depth.size() > 0) dens.d_depth = d_depth;
                break;
            }
        }

        SurfelGradients grads =
            render_backward(model, view.cam, cfg.render, out, total, dens);
        acc.observe(grads);

        LearningRates lr = cfg.lr;
        lr.center = decayed_lr(cfg.lr.center * extent, cfg.lr_center_final_mult, iter,
                               cfg.iters);
        opt.step(model, grads, lr, active_count);
        model.iteration += 1;

        // Density control.
        const DensifyConfig& dc = cfg.densify;
        if (iter >= dc.densify_start && iter <= dc.densify_end &&
            (iter - dc.densify_start) % dc.densify_interval == 0) {
            VectorXd norms = densify_gradient(acc, dc.omega);
            DensifySelection sel = select_densify(model, norms, dc, active_count);
            if (!sel.clone.empty() || !sel.split.empty()) {
                std::vector<uint8_t> touched_src(size_t(model.size()), 0);
                for (int i : sel.clone) touched_src[size_t(i)] = 1;
                for (int i : sel.split) touched_src[size_t(i)] = 1;

                ModelEdit edit = apply_densify(model, sel, acc, dc, active_count, rng);
                opt.remap(edit.src);
                // Accumulators survive except for touched rows and new rows.
                DensifyAccumulators next;
                next.reset(model.size());
                for (Eigen::Index i = 0; i < model.size(); ++i) {
                    int s = edit.src[size_t(i)];
                    if (s < 0 || touched_src[size_t(s)]) continue;
                    next.total_norm[i] = acc.total_norm[s];
                    next.ssim_norm[i] = acc.ssim_norm[s];
                    next.count[i] = acc.count[s];
                    next.world_grad.row(i) = acc.world_grad.row(s);
                }
                acc = std::move(next);
                active_count = edit.new_active_count;
                if (active_count > dc.hard_cap)
                    throw DivergenceError("surfel count exceeded the hard cap (" +
                                          std::to_string(active_count) + " > " +
                                          std::to_string(dc.hard_cap) + ")");
            }

            Eigen::Index before = model.size();
            ModelEdit culled = cull_low_opacity(model, dc, active_count);
            if (model.size() != before) {
                opt.remap(culled.src);
                DensifyAccumulators next;
                next.reset(model.size());
                for (Eigen::Index i = 0; i < model.size(); ++i) {
                    int s = culled.src[size_t(i)];
                    next.total_norm[i] = acc.total_norm[s];
                    next.ssim_norm[i] = acc.ssim_norm[s];
                    next.count[i] = acc.count[s];
                    next.world_grad.row(i) = acc.world_grad.row(s);
                }
                acc = std::move(next);
                active_count = culled.new_active_count;
            }
        }
        if (dc.opacity_reset_interval > 0 && iter % dc.opacity_reset_interval == 0 &&
            iter < cfg.iters) {
            reset_opacity(model, dc, active_count);
            opt.zero_opacity_state();
        }

        if (trim_interval > 0 && iter % trim_interval == 0 && iter < cfg.iters)
            trim_now(active_count);

        bool report = iter == cfg.iters ||
                      (cfg.metrics_interval > 0 && iter % cfg.metrics_interval == 0);
        if (hook && report) {
            IterStats st;
            st.iter = iter;
            st.loss = loss;
            st.psnr = psnr(out.color, view.image);
            st.surfels = active_count;
            hook(st);
        }
    }
    return active_count;
}

QualityReport evaluate_views(const SceneModel& model, const std::vector<ViewData>& views,
                             const RenderOptions& opts) {
    if (views.empty()) throw ContractError("evaluate_views requires views");
    QualityReport rep;
    for (const auto& v : views) {
        RenderOutput out = render(model, v.cam, opts);
        rep.psnr += psnr(out.color, v.image);
        rep.ssim += ssim(out.color, v.image);
    }
    rep.psnr /= double(views.size());
    rep.ssim /= double(views.size());
    return rep;
}

} // namespace scv2
