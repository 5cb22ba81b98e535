#include "scv2/ssim.hpp"

#include <array>

namespace scv2 {

namespace {

constexpr int kWin = 11;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

std::array<double, kWin> window() {
    std::array<double, kWin> w{};
    double sum = 0.0;
    for (int i = 0; i < kWin; ++i) {
        double d = i - (kWin - 1) / 2.0;
        w[size_t(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += w[size_t(i)];
    }
    for (auto& v : w) v /= sum;
    return w;
}

ArrayXXd conv_sep(const ArrayXXd& img) {
    static const auto w = window();
    const Eigen::Index H = img.rows(), W = img.cols();
    const int r = kWin / 2;
    ArrayXXd tmp = ArrayXXd::Zero(H, W), out = ArrayXXd::Zero(H, W);
    for (Eigen::Index y = 0; y < H; ++y)
        for (Eigen::Index x = 0; x < W; ++x) {
            double s = 0.0;
            for (int k = -r; k <= r; ++k) {
                Eigen::Index xx = x + k;
                if (xx >= 0 && xx < W) s += w[size_t(k + r)] * img(y, xx);
            }
            tmp(y, x) = s;
        }
    for (Eigen::Index y = 0; y < H; ++y)
        for (Eigen::Index x = 0; x < W; ++x) {
            double s = 0.0;
            for (int k = -r; k <= r; ++k) {
                Eigen::Index yy = y + k;
                if (yy >= 0 && yy < H) s += w[size_t(k + r)] * tmp(yy, x);
            }
            out(y, x) = s;
        }
    return out;
}

struct ChannelMaps {
    ArrayXXd mu1, mu2, v1, v2, v12;
    ArrayXXd a1, a2, b1, b2, s;
};

ChannelMaps ssim_maps(const ArrayXXd& x, const ArrayXXd& y) {
    ChannelMaps m;
    m.mu1 = conv_sep(x);
    m.mu2 = conv_sep(y);
    m.v1 = conv_sep(x.square());
    m.v2 = conv_sep(y.square());
    m.v12 = conv_sep(x * y);
    ArrayXXd s1 = m.v1 - m.mu1.square();
    ArrayXXd s2 = m.v2 - m.mu2.square();
    ArrayXXd s12 = m.v12 - m.mu1 * m.mu2;
    m.a1 = 2.0 * m.mu1 * m.mu2 + kC1;
    m.a2 = 2.0 * s12 + kC2;
    m.b1 = m.mu1.square() + m.mu2.square() + kC1;
    m.b2 = s1 + s2 + kC2;
    m.s = (m.a1 * m.a2) / (m.b1 * m.b2);
    return m;
}

} // namespace

ArrayXXd ssim_window_filter(const ArrayXXd& img) { return conv_sep(img); }

double ssim(const Image3& render, const Image3& gt) {
    if (!render.same_size(gt)) throw ContractError("ssim: image size mismatch");
    double total = 0.0;
    for (int c = 0; c < 3; ++c)
        total += ssim_maps(render.plane(c), gt.plane(c)).s.mean();
    return total / 3.0;
}

SsimGrad ssim_with_grad(const Image3& render, const Image3& gt) {
    if (!render.same_size(gt)) throw ContractError("ssim: image size mismatch");
    SsimGrad out;
    out.d_render.setZero(render.height(), render.width());
    const double npix = double(render.r.size()) * 3.0;
    for (int c = 0; c < 3; ++c) {
        const ArrayXXd& x = render.plane(c);
        const ArrayXXd& y = gt.plane(c);
        ChannelMaps m = ssim_maps(x, y);
        out.value += m.s.sum() / npix;

        ArrayXXd inv_bb = 1.0 / (m.b1 * m.b2);
        // Partials w.r.t. the convolution outputs.
        ArrayXXd ds_dsigma1 = -m.s / m.b2;
        ArrayXXd ds_dsigma12 = 2.0 * m.a1 * inv_bb;
        ArrayXXd ds_dmu1 = 2.0 * m.mu2 * m.a2 * inv_bb - 2.0 * m.mu1 * m.s / m.b1 -
                           2.0 * m.mu1 * ds_dsigma1 - m.mu2 * ds_dsigma12;
        // Mean over all pixels: each map gradient is 1/npix.
        ArrayXXd ge = conv_sep(ds_dmu1) / npix;
        ArrayXXd gv = conv_sep(ds_dsigma1) / npix;
        ArrayXXd gv12 = conv_sep(ds_dsigma12) / npix;
        out.d_render.plane(c) = ge + 2.0 * x * gv + y * gv12;
    }
    return out;
}

} // namespace scv2
