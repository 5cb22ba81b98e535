#include "scv2/objective.hpp"
#include "scv2/ssim.hpp"

namespace scv2 {

PhotometricResult photometric_loss(const Image3& render, const Image3& gt,
                                   double lambda_ssim) {
    if (!render.same_size(gt)) throw ContractError("photometric_loss: size mismatch");
    PhotometricResult res;
    const double n = double(render.r.size()) * 3.0;

    double l1 = 0.0;
    res.d_render.setZero(render.height(), render.width());
    for (int c = 0; c < 3; ++c) {
        ArrayXXd diff = render.plane(c) - gt.plane(c);
        l1 += diff.abs().sum();
        res.d_render.plane(c) = diff.sign() * ((1.0 - lambda_ssim) / n);
    }
    l1 /= n;
    res.l1 = l1;

    SsimGrad sg = ssim_with_grad(render, gt);
    res.dssim = 0.5 * (1.0 - sg.value);
    res.loss = (1.0 - lambda_ssim) * l1 + lambda_ssim * res.dssim;

    res.d_render_ssim.setZero(render.height(), render.width());
    for (int c = 0; c < 3; ++c) {
        res.d_render_ssim.plane(c) = sg.d_render.plane(c) * (-0.5 * lambda_ssim);
        res.d_render.plane(c) += res.d_render_ssim.plane(c);
    }
    return res;
}

double depth_weight(int64_t iter, const LossWeights& w) {
    if (w.total_iters <= 0) return w.depth_end;
    double t = std::clamp(double(iter) / double(w.total_iters), 0.0, 1.0);
    return w.depth_start * std::pow(w.depth_end / w.depth_start, t);
}

DepthLossResult depth_loss(const ArrayXXd& pred_inv_depth, const DepthPrior& prior,
                           int64_t iter, const LossWeights& w,
                           const Eigen::ArrayXX<uint8_t>& render_valid) {
    if (pred_inv_depth.rows() != prior.inv_depth.rows() ||
        pred_inv_depth.cols() != prior.inv_depth.cols())
        throw ContractError("depth_loss: size mismatch");
    if (iter < 0 || iter > w.total_iters)
        throw ContractError("depth_loss: iteration outside schedule");

    DepthLossResult res;
    res.d_inv_depth = ArrayXXd::Zero(pred_inv_depth.rows(), pred_inv_depth.cols());
    double weight = depth_weight(iter, w);

    int64_t count = 0;
    for (Eigen::Index y = 0; y < pred_inv_depth.rows(); ++y)
        for (Eigen::Index x = 0; x < pred_inv_depth.cols(); ++x) {
            if (!prior.mask(y, x)) continue;
            if (render_valid.size() > 0 && !render_valid(y, x)) continue;
            ++count;
        }
    if (count == 0) {
        res.empty_mask = true;
        return res;
    }

    double sum = 0.0;
    double g = weight / double(count);
    for (Eigen::Index y = 0; y < pred_inv_depth.rows(); ++y)
        for (Eigen::Index x = 0; x < pred_inv_depth.cols(); ++x) {
            if (!prior.mask(y, x)) continue;
            if (render_valid.size() > 0 && !render_valid(y, x)) continue;
            double target = prior.scale * prior.inv_depth(y, x) + prior.shift;
            double d = pred_inv_depth(y, x) - target;
            sum += std::abs(d);
            res.d_inv_depth(y, x) = d > 0 ? g : (d < 0 ? -g : 0.0);
        }
    res.loss = weight * sum / double(count);
    return res;
}

DepthPrior align_depth_prior(const ArrayXXd& raw_inv_depth,
                             const Eigen::ArrayXX<uint8_t>& mask,
                             const std::vector<std::pair<double, double>>& samples) {
    if (samples.size() < 2)
        throw ContractError("align_depth_prior needs at least 2 reference samples");
    DepthPrior prior;
    prior.inv_depth = raw_inv_depth;
    prior.mask = mask;

    double n = double(samples.size());
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (auto [raw, ref] : samples) {
        sx += raw;
        sy += ref;
        sxx += raw * raw;
        sxy += raw * ref;
    }
    double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-12 * std::max(1.0, sxx)) {
        prior.scale = 1.0;
        prior.shift = (sy - sx) / n;
        prior.degenerate = true;
    } else {
        prior.scale = (n * sxy - sx * sy) / det;
        prior.shift = (sy - prior.scale * sx) / n;
    }
    return prior;
}

NormalLossResult normal_loss(const Image3& render_normal, const Image3& depth_normal,
                             const ArrayXXd& alpha, double lambda_normal) {
    if (!render_normal.same_size(depth_normal) ||
        alpha.rows() != render_normal.height() || alpha.cols() != render_normal.width())
        throw ContractError("normal_loss: size mismatch");

    NormalLossResult res;
    res.d_render_normal.setZero(render_normal.height(), render_normal.width());
    int64_t count = 0;
    for (Eigen::Index y = 0; y < alpha.rows(); ++y)
        for (Eigen::Index x = 0; x < alpha.cols(); ++x)
            if (alpha(y, x) > 0.5 && depth_normal.pixel(y, x).squaredNorm() > 1e-12)
                ++count;
    if (count == 0) return res;

    double sum = 0.0;
    double g = lambda_normal / double(count);
    for (Eigen::Index y = 0; y < alpha.rows(); ++y)
        for (Eigen::Index x = 0; x < alpha.cols(); ++x) {
            if (!(alpha(y, x) > 0.5)) continue;
            Vector3d nd = depth_normal.pixel(y, x);
            if (nd.squaredNorm() <= 1e-12) continue;
            Vector3d nr = render_normal.pixel(y, x);
            sum += 1.0 - nr.dot(nd);
            res.d_render_normal.set_pixel(
                y, x, res.d_render_normal.pixel(y, x) - g * nd);
        }
    res.loss = lambda_normal * sum / double(count);
    return res;
}

Image3 depth_normals(const ArrayXXd& depth, const ArrayXXd& alpha, const Camera& cam) {
    const Eigen::Index H = depth.rows(), W = depth.cols();
    Image3 out(H, W);
    auto valid = [&](Eigen::Index y, Eigen::Index x) {
        return alpha(y, x) > 0.5 && std::isfinite(depth(y, x)) && depth(y, x) > 0.0;
    };
    auto point = [&](Eigen::Index y, Eigen::Index x) -> Vector3d {
        double z = depth(y, x);
        return {(x + 0.5 - cam.cx) / cam.fx * z, (y + 0.5 - cam.cy) / cam.fy * z, z};
    };
    for (Eigen::Index y = 1; y + 1 < H; ++y)
        for (Eigen::Index x = 1; x + 1 < W; ++x) {
            if (!valid(y, x) || !valid(y, x - 1) || !valid(y, x + 1) ||
                !valid(y - 1, x) || !valid(y + 1, x))
                continue;
            Vector3d dx = 0.5 * (point(y, x + 1) - point(y, x - 1));
            Vector3d dy = 0.5 * (point(y + 1, x) - point(y - 1, x));
            Vector3d n = dx.cross(dy);
            double len = n.norm();
            if (len < 1e-12) continue;
            n /= len;
            // Face the camera: rays look along +z in camera space.
            Vector3d ray((x + 0.5 - cam.cx) / cam.fx, (y + 0.5 - cam.cy) / cam.fy, 1.0);
            if (n.dot(ray) > 0) n = -n;
            out.set_pixel(y, x, (cam.R.transpose() * n).eval());
        }
    return out;
}

} // namespace scv2
