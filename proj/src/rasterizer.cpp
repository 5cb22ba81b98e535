#include "scv2/rasterizer.hpp"
#include "scv2/threading.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>

namespace scv2 {

namespace {

struct Prepared {
    Vector3d mu;
    Vector3d tu, tv, nrm;   // rotated frame; nrm = tu x tv (unoriented)
    double su, sv;
    double sigma;           // activated opacity
    double z;               // camera-space center depth
    double px, py;          // projected center in pixels
    Vector3d color;         // clamped SH color
    Vector3d clamp_mask;    // 1 where the channel was not clamped
    Vector3d dir;           // unit view direction (center - camera)
    double dist;
    double nsign;           // orientation sign for the composited normal
    Vector3d dpx_dmu, dpy_dmu; // projection jacobian rows (world)
    int x0, x1, y0, y1;     // pixel bbox, half-open
    int index;              // model row
};

struct ViewContext {
    std::vector<Prepared> ps;                 // depth sorted, front to back
    std::vector<std::vector<int>> bins;       // surfel ordinals per tile
    int tiles_x = 0, tiles_y = 0;
    int width = 0, height = 0;
    Vector3d origin;
    Vector3d ray_x, ray_y, ray_0;             // ray = ray_0 + px*ray_x + py*ray_y
    RenderOptions opts;
    Vector3d background;
};

ViewContext build_context(const SceneModel& model, const Camera& cam,
                          const RenderOptions& opts) {
    cam.validate();
    ViewContext ctx;
    ctx.opts = opts;
    ctx.width = cam.width;
    ctx.height = cam.height;
    ctx.origin = cam.position();
    ctx.background = model.background;
    Matrix3d Rt = cam.R.transpose();
    ctx.ray_x = Rt.col(0) / cam.fx;
    ctx.ray_y = Rt.col(1) / cam.fy;
    ctx.ray_0 = Rt * Vector3d(-cam.cx / cam.fx, -cam.cy / cam.fy, 1.0);

    const Eigen::Index n = model.size();
    ctx.ps.reserve(size_t(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        Vector3d mu = model.centers.row(i);
        Vector3d c = cam.world_to_cam(mu);
        if (!(c.z() > opts.near_clip)) continue;

        Prepared p;
        p.index = int(i);
        p.mu = mu;
        p.z = c.z();
        p.px = cam.fx * c.x() / c.z() + cam.cx;
        p.py = cam.fy * c.y() / c.z() + cam.cy;

        Vector4d q = model.rotations.row(i);
        double qn = q.norm();
        Eigen::Quaterniond quat(q[0] / qn, q[1] / qn, q[2] / qn, q[3] / qn);
        Matrix3d rot = quat.toRotationMatrix();
        p.tu = rot.col(0);
        p.tv = rot.col(1);
        p.nrm = rot.col(2);

        p.su = std::exp(model.log_scales(i, 0));
        p.sv = std::exp(model.log_scales(i, 1));
        p.sigma = sigmoid(model.opacity_logits[i]);

        Vector3d view = mu - ctx.origin;
        p.dist = view.norm();
        p.dir = view / p.dist;
        p.nsign = (p.nrm.dot(view) > 0.0) ? -1.0 : 1.0;

        double b[kShCoeffs];
        sh_basis(p.dir, b);
        for (int ch = 0; ch < 3; ++ch) {
            double v = 0.5;
            for (int k = 0; k < kShCoeffs; ++k)
                v += b[k] * model.sh(i, 3 * k + ch);
            p.clamp_mask[ch] = v > 0.0 ? 1.0 : 0.0;
            p.color[ch] = std::max(v, 0.0);
        }

        p.dpx_dmu = (cam.fx / c.z()) * Rt.col(0) - (cam.fx * c.x() / (c.z() * c.z())) * Rt.col(2);
        p.dpy_dmu = (cam.fy / c.z()) * Rt.col(1) - (cam.fy * c.y() / (c.z() * c.z())) * Rt.col(2);

        if (opts.full_coverage) {
            p.x0 = 0; p.x1 = ctx.width;
            p.y0 = 0; p.y1 = ctx.height;
        } else {
            double zc = std::max(c.z() - opts.bbox_sigma * std::max(p.su, p.sv), opts.near_clip);
            double rpx = opts.bbox_sigma * std::max(p.su, p.sv) * std::max(cam.fx, cam.fy) / zc +
                         3.0 * opts.lowpass_px + 1.0;
            p.x0 = std::max(0, int(std::floor(p.px - rpx)));
            p.x1 = std::min(ctx.width, int(std::ceil(p.px + rpx)) + 1);
            p.y0 = std::max(0, int(std::floor(p.py - rpx)));
            p.y1 = std::min(ctx.height, int(std::ceil(p.py + rpx)) + 1);
            if (p.x0 >= p.x1 || p.y0 >= p.y1) continue;
        }
        ctx.ps.push_back(std::move(p));
    }

    // Depth sort with a full value tie-break so the result is a function of
    // the surfel set, not of its input order.
    std::sort(ctx.ps.begin(), ctx.ps.end(), [](const Prepared& a, const Prepared& b) {
        auto key = [](const Prepared& s) {
            return std::array<double, 10>{s.z, s.px, s.py, s.su, s.sv, s.sigma,
                                          s.mu.x(), s.mu.y(), s.mu.z(), s.nsign};
        };
        return key(a) < key(b);
    });

    int tile = std::max(1, opts.tile);
    ctx.tiles_x = (ctx.width + tile - 1) / tile;
    ctx.tiles_y = (ctx.height + tile - 1) / tile;
    ctx.bins.assign(size_t(ctx.tiles_x) * ctx.tiles_y, {});
    for (int ord = 0; ord < int(ctx.ps.size()); ++ord) {
        const Prepared& p = ctx.ps[size_t(ord)];
        int tx0 = p.x0 / tile, tx1 = (p.x1 - 1) / tile;
        int ty0 = p.y0 / tile, ty1 = (p.y1 - 1) / tile;
        for (int ty = ty0; ty <= ty1; ++ty)
            for (int tx = tx0; tx <= tx1; ++tx)
                ctx.bins[size_t(ty) * ctx.tiles_x + tx].push_back(ord);
    }
    return ctx;
}

// One surfel evaluated at one pixel.
struct Eval {
    double alpha = 0;
    double g = 0;        // max(G, Glow)
    double G = 0;
    double Glow = 0;
    double u = 0, v = 0; // local plane coordinates
    double tstar = 0;    // ray-plane depth
    double z = 0;        // depth used for compositing
    double inv_denom = 0;
    bool valid_G = false;
    bool use_G = false;  // G branch of the max
};

inline bool eval_surfel(const ViewContext& ctx, const Prepared& s, double pxc,
                        double pyc, const Vector3d& ray, Eval& e) {
    double denom = s.nrm.dot(ray);
    e.valid_G = std::abs(denom) > 1e-12;
    e.G = 0.0;
    if (e.valid_G) {
        double t = s.nrm.dot(s.mu - ctx.origin) / denom;
        if (t > ctx.opts.near_clip) {
            e.tstar = t;
            e.inv_denom = 1.0 / denom;
            Vector3d delta = ctx.origin + t * ray - s.mu;
            e.u = s.tu.dot(delta);
            e.v = s.tv.dot(delta);
            double au = e.u / s.su, av = e.v / s.sv;
            e.G = std::exp(-0.5 * (au * au + av * av));
        } else {
            e.valid_G = false;
        }
    }
    if (ctx.opts.lowpass_px > 0.0) {
        double dx = pxc - s.px, dy = pyc - s.py;
        e.Glow = std::exp(-(dx * dx + dy * dy) /
                          (2.0 * ctx.opts.lowpass_px * ctx.opts.lowpass_px));
    } else {
        e.Glow = 0.0;
    }
    e.use_G = e.valid_G && e.G >= e.Glow;
    e.g = std::max(e.G, e.Glow);
    // Plane depth where the plane branch is taken; center depth otherwise.
    e.z = e.use_G ? e.tstar : s.z;
    e.alpha = s.sigma * e.g;
    return e.alpha > 0.0 && e.alpha >= ctx.opts.alpha_skip;
}

} // namespace

RenderOutput render(const SceneModel& model, const Camera& cam,
                    const RenderOptions& opts) {
    ViewContext ctx = build_context(model, cam, opts);
    const int W = ctx.width, H = ctx.height;
    const double inf = std::numeric_limits<double>::infinity();

    RenderOutput out;
    out.color.setZero(H, W);
    out.alpha = ArrayXXd::Zero(H, W);
    out.transmittance = ArrayXXd::Zero(H, W);
    out.expected_depth = ArrayXXd::Zero(H, W);
    out.median_depth = ArrayXXd::Constant(H, W, inf);
    out.normal.setZero(H, W);
    out.visible.assign(size_t(model.size()), 0);
    out.max_contribution = VectorXd::Zero(model.size());

    size_t n_tiles = ctx.bins.size();
    std::vector<std::vector<double>> tile_maxc(n_tiles);

    ThreadPool::instance().run_chunks(n_tiles, [&](size_t tidx) {
        const auto& bin = ctx.bins[tidx];
        tile_maxc[tidx].assign(bin.size(), 0.0);
        int tile = std::max(1, opts.tile);
        int tx = int(tidx % size_t(ctx.tiles_x)), ty = int(tidx / size_t(ctx.tiles_x));
        int x0 = tx * tile, x1 = std::min(W, x0 + tile);
        int y0 = ty * tile, y1 = std::min(H, y0 + tile);
        Eval e;
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                double pxc = x + 0.5, pyc = y + 0.5;
                Vector3d ray = ctx.ray_0 + pxc * ctx.ray_x + pyc * ctx.ray_y;
                double T = 1.0, sumw = 0.0, sz = 0.0;
                Vector3d c = Vector3d::Zero(), sn = Vector3d::Zero();
                double median = inf;
                bool crossed = false;
                for (size_t bi = 0; bi < bin.size(); ++bi) {
                    const Prepared& s = ctx.ps[size_t(bin[bi])];
                    if (x < s.x0 || x >= s.x1 || y < s.y0 || y >= s.y1) continue;
                    if (!eval_surfel(ctx, s, pxc, pyc, ray, e)) continue;
                    double w = e.alpha * T;
                    c += w * s.color;
                    sumw += w;
                    sz += w * e.z;
                    sn += (w * s.nsign) * s.nrm;
                    if (!crossed && sumw >= 0.5) {
                        median = e.z;
                        crossed = true;
                    }
                    if (w > opts.contribution_cutoff)
                        tile_maxc[tidx][bi] = std::max(tile_maxc[tidx][bi], w);
                    T *= (1.0 - e.alpha);
                    if (T < opts.stop_transmittance) break;
                }
                c += T * ctx.background;
                out.color.set_pixel(y, x, c);
                out.alpha(y, x) = sumw;
                out.transmittance(y, x) = T;
                out.expected_depth(y, x) = sumw > 1e-12 ? sz / sumw : 0.0;
                out.median_depth(y, x) = median;
                double nn = sn.norm();
                out.normal.set_pixel(y, x, nn > 1e-12 ? (sn / nn).eval() : Vector3d::Zero());
            }
        }
    });

    for (size_t tidx = 0; tidx < n_tiles; ++tidx) {
        const auto& bin = ctx.bins[tidx];
        for (size_t bi = 0; bi < bin.size(); ++bi) {
            if (tile_maxc[tidx][bi] <= 0.0) continue;
            int idx = ctx.ps[size_t(bin[bi])].index;
            out.visible[size_t(idx)] = 1;
            out.max_contribution[idx] = std::max(out.max_contribution[idx], tile_maxc[tidx][bi]);
        }
    }
    return out;
}

namespace {

// Per-surfel gradient slots accumulated inside a tile. Rotation and SH chains
// are applied once per surfel after the tile merge.
constexpr int kMu = 0;      // 3: dL/d center (total channel)
constexpr int kMuD = 3;     // 3: densify channel
constexpr int kTu = 6;      // 3
constexpr int kTv = 9;      // 3
constexpr int kNr = 12;     // 3: raw (unoriented) normal
constexpr int kLogS = 15;   // 2
constexpr int kSigma = 17;  // 1
constexpr int kDc = 18;     // 3: dL/d color (clamp mask applied)
constexpr int kDcD = 21;    // 3: densify channel
constexpr int kStride = 24;

struct ChainEntry {
    int bi;      // position in tile bin
    Eval e;
    double w;
    double T;    // transmittance in front
};

inline void quat_grad(const Vector4d& q_raw, const Matrix3d& dR, Vector4d& dq_raw) {
    double n = q_raw.norm();
    Vector4d q = q_raw / n;
    double r = q[0], x = q[1], y = q[2], z = q[3];
    // dR/dq for a unit quaternion (w,x,y,z), column layout [tu tv n].
    Matrix3d dRr, dRx, dRy, dRz;
    dRr << 0, -z, y,
           z, 0, -x,
          -y, x, 0;
    dRx << 0, y, z,
           y, -2 * x, -r,
           z, r, -2 * x;
    dRy << -2 * y, x, r,
           x, 0, z,
          -r, z, -2 * y;
    dRz << -2 * z, -r, x,
           r, -2 * z, y,
           x, y, 0;
    Vector4d dq_unit;
    dq_unit[0] = 2.0 * (dR.array() * dRr.array()).sum();
    dq_unit[1] = 2.0 * (dR.array() * dRx.array()).sum();
    dq_unit[2] = 2.0 * (dR.array() * dRy.array()).sum();
    dq_unit[3] = 2.0 * (dR.array() * dRz.array()).sum();
    dq_raw = (dq_unit - q * q.dot(dq_unit)) / n;
}

} // namespace

SurfelGradients render_backward(const SceneModel& model, const Camera& cam,
                                const RenderOptions& opts,
                                const RenderOutput& output,
                                const PixelLossGrads& loss_grads,
                                const PixelLossGrads& densify_grads) {
    const int W = cam.width, H = cam.height;
    auto check = [&](const Image3& img) {
        if (!img.empty() && (img.height() != H || img.width() != W))
            throw ContractError("render_backward: gradient image size mismatch");
    };
    check(loss_grads.d_color);
    check(loss_grads.d_normal);
    check(densify_grads.d_color);
    check(densify_grads.d_normal);
    if ((loss_grads.has_depth() && (loss_grads.d_depth.rows() != H || loss_grads.d_depth.cols() != W)) ||
        (densify_grads.has_depth() && (densify_grads.d_depth.rows() != H || densify_grads.d_depth.cols() != W)) ||
        output.height() != H || output.width() != W)
        throw ContractError("render_backward: gradient image size mismatch");

    ViewContext ctx = build_context(model, cam, opts);
    const size_t n_tiles = ctx.bins.size();
    const size_t n_ord = ctx.ps.size();

    std::vector<std::vector<double>> tile_grads(n_tiles);
    std::vector<std::vector<uint8_t>> tile_touch(n_tiles);

    ThreadPool::instance().run_chunks(n_tiles, [&](size_t tidx) {
        const auto& bin = ctx.bins[tidx];
        auto& acc = tile_grads[tidx];
        acc.assign(bin.size() * kStride, 0.0);
        tile_touch[tidx].assign(bin.size(), 0);
        int tile = std::max(1, opts.tile);
        int tx = int(tidx % size_t(ctx.tiles_x)), ty = int(tidx / size_t(ctx.tiles_x));
        int x0 = tx * tile, x1 = std::min(W, x0 + tile);
        int y0 = ty * tile, y1 = std::min(H, y0 + tile);

        std::vector<ChainEntry> chain;
        chain.reserve(64);

        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                double pxc = x + 0.5, pyc = y + 0.5;
                Vector3d ray = ctx.ray_0 + pxc * ctx.ray_x + pyc * ctx.ray_y;

                // Forward re-walk, keeping the chain.
                chain.clear();
                double T = 1.0, sumw = 0.0, sz = 0.0;
                Vector3d sn = Vector3d::Zero();
                for (size_t bi = 0; bi < bin.size(); ++bi) {
                    const Prepared& s = ctx.ps[size_t(bin[bi])];
                    if (x < s.x0 || x >= s.x1 || y < s.y0 || y >= s.y1) continue;
                    ChainEntry ce;
                    if (!eval_surfel(ctx, s, pxc, pyc, ray, ce.e)) continue;
                    ce.bi = int(bi);
                    ce.T = T;
                    ce.w = ce.e.alpha * T;
                    sumw += ce.w;
                    sz += ce.w * ce.e.z;
                    sn += (ce.w * s.nsign) * s.nrm;
                    chain.push_back(ce);
                    T *= (1.0 - ce.e.alpha);
                    if (T < opts.stop_transmittance) break;
                }
                if (chain.empty()) continue;

                double A = sumw;
                double dexp = A > 1e-12 ? sz / A : 0.0;
                Vector3d nraw = sn;
                double nlen = nraw.norm();
                Vector3d nunit = nlen > 1e-12 ? (nraw / nlen).eval() : Vector3d::Zero();

                // Pixel gradients for both channels.
                Vector3d gC = loss_grads.has_color() ? loss_grads.d_color.pixel(y, x)
                                                     : Vector3d::Zero();
                Vector3d gCd = densify_grads.has_color() ? densify_grads.d_color.pixel(y, x)
                                                         : Vector3d::Zero();
                double gDe = 0.0, gDeD = 0.0;
                if (A > 1e-12) {
                    if (loss_grads.has_depth()) gDe = loss_grads.d_depth(y, x) / A;
                    if (densify_grads.has_depth()) gDeD = densify_grads.d_depth(y, x) / A;
                }
                Vector3d gNr = Vector3d::Zero(), gNrD = Vector3d::Zero();
                if (nlen > 1e-12) {
                    if (loss_grads.has_normal()) {
                        Vector3d gN = loss_grads.d_normal.pixel(y, x);
                        gNr = (gN - nunit * nunit.dot(gN)) / nlen;
                    }
                    if (densify_grads.has_normal()) {
                        Vector3d gN = densify_grads.d_normal.pixel(y, x);
                        gNrD = (gN - nunit * nunit.dot(gN)) / nlen;
                    }
                }

                // Suffix accumulators start with the background contribution.
                double S = T * gC.dot(ctx.background);
                double Sd = T * gCd.dot(ctx.background);

                for (size_t k = chain.size(); k-- > 0;) {
                    const ChainEntry& ce = chain[k];
                    const Prepared& s = ctx.ps[size_t(bin[size_t(ce.bi)])];
                    const Eval& e = ce.e;
                    double* slot = acc.data() + size_t(ce.bi) * kStride;
                    tile_touch[tidx][size_t(ce.bi)] = 1;

                    Vector3d ni = s.nsign * s.nrm;
                    double phi = gC.dot(s.color) + gDe * (e.z - dexp) + gNr.dot(ni);
                    double phid = gCd.dot(s.color) + gDeD * (e.z - dexp) + gNrD.dot(ni);

                    double om = 1.0 - e.alpha;
                    double dalpha = ce.T * phi - (om > 1e-12 ? S / om : 0.0);
                    double dalphad = ce.T * phid - (om > 1e-12 ? Sd / om : 0.0);
                    S += ce.w * phi;
                    Sd += ce.w * phid;

                    // Direct value paths (weighted by w).
                    double dz = gDe * ce.w;      // dL/d z_i
                    double dzd = gDeD * ce.w;
                    Vector3d dc = ce.w * (gC.array() * s.clamp_mask.array()).matrix();
                    Vector3d dcd = ce.w * (gCd.array() * s.clamp_mask.array()).matrix();
                    Vector3d dn_map = ce.w * s.nsign * gNr; // onto raw normal
                    Vector3d dn_mapd = ce.w * s.nsign * gNrD;

                    slot[kDc + 0] += dc[0]; slot[kDc + 1] += dc[1]; slot[kDc + 2] += dc[2];
                    slot[kDcD + 0] += dcd[0]; slot[kDcD + 1] += dcd[1]; slot[kDcD + 2] += dcd[2];

                    // alpha = sigma * g
                    double dsig = e.g * dalpha;
                    double dg = s.sigma * dalpha;
                    double dgd = s.sigma * dalphad;
                    slot[kSigma] += dsig;

                    Vector3d dmu = Vector3d::Zero();
                    Vector3d dmud = Vector3d::Zero();
                    // Normal-value path only feeds parameter gradients; the
                    // densify channel is positional and unaffected by it.
                    Vector3d dnr = dn_map;
                    (void)dn_mapd;

                    if (e.use_G) {
                        // Gaussian branch: G = exp(-(u/su)^2/2 - (v/sv)^2/2)
                        double au = e.u / s.su, av = e.v / s.sv;
                        double dGdu = -(au / s.su) * e.G;
                        double dGdv = -(av / s.sv) * e.G;
                        double du = dg * dGdu, dv = dg * dGdv;
                        double dud = dgd * dGdu, dvd = dgd * dGdv;

                        slot[kLogS + 0] += dg * (au * au) * e.G;
                        slot[kLogS + 1] += dg * (av * av) * e.G;

                        double tur = s.tu.dot(ray), tvr = s.tv.dot(ray);
                        Vector3d delta = ctx.origin + e.tstar * ray - s.mu;
                        // du/dmu = (tu.r)/(n.r) n - tu ; dz/dmu = n/(n.r)
                        Vector3d du_dmu = (tur * e.inv_denom) * s.nrm - s.tu;
                        Vector3d dv_dmu = (tvr * e.inv_denom) * s.nrm - s.tv;
                        Vector3d dz_dmu = e.inv_denom * s.nrm;
                        Vector3d dz_dn = -e.inv_denom * delta;

                        dmu += du * du_dmu + dv * dv_dmu + dz * dz_dmu;
                        dmud += dud * du_dmu + dvd * dv_dmu + dzd * dz_dmu;

                        slot[kTu + 0] += du * delta[0];
                        slot[kTu + 1] += du * delta[1];
                        slot[kTu + 2] += du * delta[2];
                        slot[kTv + 0] += dv * delta[0];
                        slot[kTv + 1] += dv * delta[1];
                        slot[kTv + 2] += dv * delta[2];
                        Vector3d dn_geo = (du * (-tur * e.inv_denom) + dv * (-tvr * e.inv_denom)) * delta +
                                          dz * dz_dn;
                        dnr += dn_geo;
                    } else {
                        // Low-pass branch: g = exp(-d^2 / (2 lp^2)), depth is
                        // the center depth.
                        double lp2 = ctx.opts.lowpass_px * ctx.opts.lowpass_px;
                        if (lp2 > 0.0 && e.Glow > 0.0) {
                            double dd2 = -dg * e.Glow / (2.0 * lp2);
                            double dd2d = -dgd * e.Glow / (2.0 * lp2);
                            double ddx = -2.0 * (pxc - s.px); // d d2 / d s.px
                            double ddy = -2.0 * (pyc - s.py);
                            dmu += (dd2 * ddx) * s.dpx_dmu + (dd2 * ddy) * s.dpy_dmu;
                            dmud += (dd2d * ddx) * s.dpx_dmu + (dd2d * ddy) * s.dpy_dmu;
                        }
                        // z fallback: camera z of the center.
                        Vector3d dz_dmu = cam.R.row(2).transpose();
                        dmu += dz * dz_dmu;
                        dmud += dzd * dz_dmu;
                    }

                    slot[kMu + 0] += dmu[0]; slot[kMu + 1] += dmu[1]; slot[kMu + 2] += dmu[2];
                    slot[kMuD + 0] += dmud[0]; slot[kMuD + 1] += dmud[1]; slot[kMuD + 2] += dmud[2];
                    slot[kNr + 0] += dnr[0]; slot[kNr + 1] += dnr[1]; slot[kNr + 2] += dnr[2];
                }
            }
        }
    });

    // Ordered merge of the tile buffers.
    std::vector<double> global(n_ord * kStride, 0.0);
    std::vector<uint8_t> touched_ord(n_ord, 0);
    for (size_t tidx = 0; tidx < n_tiles; ++tidx) {
        const auto& bin = ctx.bins[tidx];
        const auto& acc = tile_grads[tidx];
        for (size_t bi = 0; bi < bin.size(); ++bi) {
            if (!tile_touch[tidx][bi]) continue;
            touched_ord[size_t(bin[bi])] = 1;
            double* dst = global.data() + size_t(bin[bi]) * kStride;
            const double* src = acc.data() + bi * kStride;
            for (int k = 0; k < kStride; ++k) dst[k] += src[k];
        }
    }

    SurfelGradients grads;
    grads.setZero(model.size());

    // Per-surfel chains: SH color path, rotation, activations, screen norms.
    parallel_ranges(n_ord, 16, [&](size_t begin, size_t end, size_t) {
        Eigen::Matrix<double, kShCoeffs, 3> db;
        for (size_t ord = begin; ord < end; ++ord) {
            if (!touched_ord[ord]) continue;
            const Prepared& s = ctx.ps[ord];
            const double* g = global.data() + ord * kStride;
            int i = s.index;
            grads.touched[size_t(i)] = 1;

            Vector3d dmu(g[kMu], g[kMu + 1], g[kMu + 2]);
            Vector3d dmud(g[kMuD], g[kMuD + 1], g[kMuD + 2]);
            Vector3d dc(g[kDc], g[kDc + 1], g[kDc + 2]);
            Vector3d dcd(g[kDcD], g[kDcD + 1], g[kDcD + 2]);

            // Color -> SH coefficients and view direction.
            double b[kShCoeffs];
            sh_basis(s.dir, b);
            sh_basis_grad(s.dir, db);
            ShMatrix shm = ShMatrix::Zero();
            for (int k = 0; k < kShCoeffs; ++k)
                for (int ch = 0; ch < 3; ++ch)
                    shm(k, ch) = model.sh(i, 3 * k + ch);
            Vector3d ddir = Vector3d::Zero(), ddird = Vector3d::Zero();
            for (int ch = 0; ch < 3; ++ch) {
                Vector3d gb = db.transpose() * shm.col(ch);
                ddir += dc[ch] * gb;
                ddird += dcd[ch] * gb;
                for (int k = 0; k < kShCoeffs; ++k)
                    grads.d_sh(i, 3 * k + ch) += b[k] * dc[ch];
            }
            Matrix3d P = (Matrix3d::Identity() - s.dir * s.dir.transpose()) / s.dist;
            dmu += P * ddir;
            dmud += P * ddird;

            grads.d_center.row(i) += dmu.transpose();

            // Rotation via the frame columns.
            Matrix3d dR;
            dR.col(0) = Vector3d(g[kTu], g[kTu + 1], g[kTu + 2]);
            dR.col(1) = Vector3d(g[kTv], g[kTv + 1], g[kTv + 2]);
            dR.col(2) = Vector3d(g[kNr], g[kNr + 1], g[kNr + 2]);
            Vector4d q_raw = model.rotations.row(i);
            Vector4d dq;
            quat_grad(q_raw, dR, dq);
            grads.d_rotation.row(i) += dq.transpose();

            grads.d_log_scales(i, 0) += g[kLogS];
            grads.d_log_scales(i, 1) += g[kLogS + 1];
            double sig = s.sigma;
            grads.d_opacity_logit[i] += g[kSigma] * sig * (1.0 - sig);

            // Screen-space positional norms (ndc units: half image spans).
            Vector3d ax = cam.R.row(0).transpose() * (s.z / cam.fx);
            Vector3d ay = cam.R.row(1).transpose() * (s.z / cam.fy);
            double gx = dmu.dot(ax) * (0.5 * W), gy = dmu.dot(ay) * (0.5 * H);
            grads.pos_grad_total[i] = std::hypot(gx, gy);
            double gxd = dmud.dot(ax) * (0.5 * W), gyd = dmud.dot(ay) * (0.5 * H);
            grads.pos_grad_ssim[i] = std::hypot(gxd, gyd);
        }
    });

    return grads;
}

std::vector<uint8_t> render_visibility(const MatX3& points, const Camera& cam,
                                       double radius, const RenderOptions& opts) {
    if (points.rows() == 0) return {};
    if (!(radius > 0.0)) throw ContractError("render_visibility requires radius > 0");

    // Camera-facing opaque disks.
    SceneModel m;
    m.resize(points.rows());
    Vector3d origin = cam.position();
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
        Vector3d p = points.row(i);
        Vector3d d = p - origin;
        double dn = d.norm();
        Eigen::Quaterniond q = dn > 1e-12
            ? Eigen::Quaterniond::FromTwoVectors(Vector3d::UnitZ(), d / dn)
            : Eigen::Quaterniond::Identity();
        m.centers.row(i) = p;
        m.rotations.row(i) << q.w(), q.x(), q.y(), q.z();
        m.log_scales.row(i).setConstant(std::log(radius));
        m.opacity_logits[i] = 40.0; // effectively opaque
        m.sh.row(i).setZero();
    }

    ViewContext ctx = build_context(m, cam, opts);

    // Map each point to the pixel under its projected center.
    std::vector<int> center_px(ctx.ps.size(), -1);
    for (size_t ord = 0; ord < ctx.ps.size(); ++ord) {
        const Prepared& s = ctx.ps[ord];
        int x = int(std::floor(s.px)), y = int(std::floor(s.py));
        if (x < 0 || x >= ctx.width || y < 0 || y >= ctx.height) continue;
        center_px[ord] = y * ctx.width + x;
    }

    std::vector<uint8_t> visible(size_t(points.rows()), 0);
    parallel_ranges(ctx.ps.size(), 16, [&](size_t begin, size_t end, size_t) {
        Eval e;
        for (size_t ord = begin; ord < end; ++ord) {
            if (center_px[ord] < 0) continue;
            const Prepared& self = ctx.ps[ord];
            int y = center_px[ord] / ctx.width, x = center_px[ord] % ctx.width;
            double pxc = x + 0.5, pyc = y + 0.5;
            Vector3d ray = ctx.ray_0 + pxc * ctx.ray_x + pyc * ctx.ray_y;
            const auto& bin =
                ctx.bins[size_t(y / std::max(1, opts.tile)) * ctx.tiles_x +
                         size_t(x / std::max(1, opts.tile))];
            double T = 1.0;
            for (size_t bi = 0; bi < bin.size(); ++bi) {
                size_t other = size_t(bin[bi]);
                if (other > ord) break; // bins are depth sorted
                const Prepared& s = ctx.ps[other];
                if (x < s.x0 || x >= s.x1 || y < s.y0 || y >= s.y1) continue;
                if (!eval_surfel(ctx, s, pxc, pyc, ray, e)) continue;
                if (other == ord) {
                    if (e.alpha * T > opts.contribution_cutoff)
                        visible[size_t(self.index)] = 1;
                    break;
                }
                T *= (1.0 - e.alpha);
                if (T < opts.stop_transmittance) break;
            }
        }
    });
    return visible;
}

void visit_blend_chains(
    const SceneModel& model, const Camera& cam, const RenderOptions& opts,
    size_t n_chunks,
    const std::function<void(size_t, int, int, const std::vector<BlendSample>&)>& fn) {
    ViewContext ctx = build_context(model, cam, opts);
    const int W = ctx.width, H = ctx.height;
    if (n_chunks == 0) n_chunks = 1;
    parallel_ranges(size_t(H), n_chunks, [&](size_t ybegin, size_t yend, size_t chunk) {
        Eval e;
        std::vector<BlendSample> chain;
        chain.reserve(64);
        int tile = std::max(1, opts.tile);
        for (size_t y = ybegin; y < yend; ++y) {
            for (int x = 0; x < W; ++x) {
                chain.clear();
                double pxc = x + 0.5, pyc = double(y) + 0.5;
                Vector3d ray = ctx.ray_0 + pxc * ctx.ray_x + pyc * ctx.ray_y;
                const auto& bin = ctx.bins[(y / size_t(tile)) * size_t(ctx.tiles_x) +
                                           size_t(x / tile)];
                double T = 1.0;
                for (size_t bi = 0; bi < bin.size(); ++bi) {
                    const Prepared& s = ctx.ps[size_t(bin[bi])];
                    if (int(x) < s.x0 || int(x) >= s.x1 || int(y) < s.y0 || int(y) >= s.y1)
                        continue;
                    if (!eval_surfel(ctx, s, pxc, pyc, ray, e)) continue;
                    chain.push_back({s.index, e.alpha, T, e.z});
                    T *= (1.0 - e.alpha);
                    if (T < opts.stop_transmittance) break;
                }
                fn(chunk, int(y), x, chain);
            }
        }
    });
}

} // namespace scv2
