#include "scv2/geo_eval.hpp"
#include "scv2/kdtree.hpp"
#include "scv2/rng.hpp"
#include "scv2/threading.hpp"

#include <map>
#include <numeric>

namespace scv2 {

PointCloud voxel_downsample(const PointCloud& cloud, double voxel) {
    if (!(voxel > 0)) throw ContractError("voxel_downsample requires voxel > 0");
    struct Cell {
        Vector3d sum = Vector3d::Zero();
        Vector3d color = Vector3d::Zero();
        int64_t count = 0;
    };
    std::map<std::tuple<int64_t, int64_t, int64_t>, Cell> cells;
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        Vector3d p = cloud.points.row(i);
        auto key = std::make_tuple(int64_t(std::floor(p.x() / voxel)),
                                   int64_t(std::floor(p.y() / voxel)),
                                   int64_t(std::floor(p.z() / voxel)));
        Cell& c = cells[key];
        c.sum += p;
        if (cloud.has_colors()) c.color += Vector3d(cloud.colors.row(i));
        ++c.count;
    }
    PointCloud out;
    out.points.resize(Eigen::Index(cells.size()), 3);
    if (cloud.has_colors()) out.colors.resize(Eigen::Index(cells.size()), 3);
    Eigen::Index j = 0;
    for (const auto& [key, c] : cells) {
        out.points.row(j) = (c.sum / double(c.count)).transpose();
        if (cloud.has_colors()) out.colors.row(j) = (c.color / double(c.count)).transpose();
        ++j;
    }
    return out;
}

bool CropVolume::contains(const Vector3d& world_point) const {
    Eigen::Vector4d h(world_point.x(), world_point.y(), world_point.z(), 1.0);
    Eigen::Vector4d g = world_to_ground * h;
    if (g.z() < z_min || g.z() > z_max) return false;
    return footprint.contains(Eigen::Vector2d(g.x(), g.y()));
}

CropVolume estimate_crop_volume(const PointCloud& gt, const std::vector<Camera>& cams,
                                const CropVolumeParams& params,
                                const Eigen::Matrix4d& world_to_ground) {
    if (cams.empty()) throw ContractError("estimate_crop_volume requires cameras");
    if (params.vis_threshold < 1)
        throw ContractError("estimate_crop_volume requires vis_threshold >= 1");
    if (gt.size() == 0) throw ContractError("estimate_crop_volume requires points");

    double nn = median_nn_distance(gt.points);
    double radius = params.vis_radius > 0 ? params.vis_radius : std::max(0.5 * nn, 1e-6);

    // Count observing views per point.
    std::vector<int> frequency(size_t(gt.size()), 0);
    for (const auto& cam : cams) {
        auto vis = render_visibility(gt.points, cam, radius, params.render);
        for (size_t i = 0; i < vis.size(); ++i) frequency[i] += vis[i];
    }

    std::vector<int> keep;
    for (size_t i = 0; i < frequency.size(); ++i)
        if (frequency[i] >= params.vis_threshold) keep.push_back(int(i));
    if (keep.empty())
        throw ContractError("estimate_crop_volume: no point passes the visibility "
                            "threshold (" + std::to_string(params.vis_threshold) + ")");

    CropVolume vol;
    vol.world_to_ground = world_to_ground;
    std::vector<Eigen::Vector2d> proj;
    proj.reserve(keep.size());
    vol.z_min = std::numeric_limits<double>::infinity();
    vol.z_max = -std::numeric_limits<double>::infinity();
    for (int i : keep) {
        Eigen::Vector4d h(gt.points(i, 0), gt.points(i, 1), gt.points(i, 2), 1.0);
        Eigen::Vector4d g = world_to_ground * h;
        vol.z_min = std::min(vol.z_min, g.z());
        vol.z_max = std::max(vol.z_max, g.z());
        proj.push_back({g.x(), g.y()});
    }

    // Thin the projection before the triangulation when it is large.
    std::vector<Eigen::Vector2d> thinned;
    if (params.footprint_limit > 0 && double(proj.size()) > params.footprint_limit) {
        double stride = double(proj.size()) / params.footprint_limit;
        for (double at = 0; at < double(proj.size()); at += stride)
            thinned.push_back(proj[size_t(at)]);
    } else {
        thinned = proj;
    }

    double alpha = params.alpha;
    if (!(alpha > 0)) {
        MatX3 flat(Eigen::Index(thinned.size()), 3);
        for (size_t i = 0; i < thinned.size(); ++i)
            flat.row(Eigen::Index(i)) << thinned[i].x(), thinned[i].y(), 0.0;
        alpha = 3.0 * std::max(median_nn_distance(flat), 1e-9);
    }
    vol.footprint = alpha_shape_2d(thinned, alpha);
    if (vol.footprint.rings.empty())
        throw ContractError("estimate_crop_volume: footprint estimation failed");
    return vol;
}

PointCloud sample_surface(const TriangleMesh& mesh, int64_t count, uint64_t seed) {
    if (mesh.faces.rows() == 0) throw ContractError("sample_surface: empty mesh");
    if (count < 1) throw ContractError("sample_surface requires count >= 1");
    std::vector<double> cum(static_cast<size_t>(mesh.faces.rows()));
    double total = 0;
    for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
        Vector3d a = mesh.vertices.row(mesh.faces(f, 0));
        Vector3d b = mesh.vertices.row(mesh.faces(f, 1));
        Vector3d c = mesh.vertices.row(mesh.faces(f, 2));
        total += 0.5 * (b - a).cross(c - a).norm();
        cum[size_t(f)] = total;
    }
    if (!(total > 0)) throw ContractError("sample_surface: zero-area mesh");

    Rng rng(seed);
    PointCloud out;
    out.points.resize(count, 3);
    for (int64_t i = 0; i < count; ++i) {
        double r = rng.uniform() * total;
        size_t f = size_t(std::lower_bound(cum.begin(), cum.end(), r) - cum.begin());
        f = std::min(f, cum.size() - 1);
        Vector3d a = mesh.vertices.row(mesh.faces(Eigen::Index(f), 0));
        Vector3d b = mesh.vertices.row(mesh.faces(Eigen::Index(f), 1));
        Vector3d c = mesh.vertices.row(mesh.faces(Eigen::Index(f), 2));
        double u = rng.uniform(), v = rng.uniform();
        if (u + v > 1.0) {
            u = 1.0 - u;
            v = 1.0 - v;
        }
        out.points.row(i) = (a + u * (b - a) + v * (c - a)).transpose();
    }
    return out;
}

PointCloud crop(const PointCloud& cloud, const CropVolume& volume) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < cloud.size(); ++i)
        if (volume.contains(cloud.points.row(i))) keep.push_back(i);
    PointCloud out;
    out.points.resize(Eigen::Index(keep.size()), 3);
    if (cloud.has_colors()) out.colors.resize(Eigen::Index(keep.size()), 3);
    for (size_t j = 0; j < keep.size(); ++j) {
        out.points.row(Eigen::Index(j)) = cloud.points.row(keep[j]);
        if (cloud.has_colors()) out.colors.row(Eigen::Index(j)) = cloud.colors.row(keep[j]);
    }
    return out;
}

PointCloud apply_transform(const PointCloud& cloud, const Eigen::Matrix4d& transform) {
    double det = transform.topLeftCorner<3, 3>().determinant();
    if (!(det > 1e-12))
        throw ContractError("apply_transform requires a positive-scale transform");
    PointCloud out = cloud;
    for (Eigen::Index i = 0; i < cloud.size(); ++i) {
        Eigen::Vector4d h(cloud.points(i, 0), cloud.points(i, 1), cloud.points(i, 2), 1.0);
        Eigen::Vector4d g = transform * h;
        out.points.row(i) << g.x(), g.y(), g.z();
    }
    return out;
}

namespace {

// Fraction of `from` points whose nearest neighbor in `to` is within tau.
double coverage(const MatX3& from, const MatX3& to, double tau, bool exhaustive) {
    if (from.rows() == 0) return 0.0;
    const double tau2 = tau * tau;
    std::vector<int64_t> hits(16, 0);
    if (exhaustive) {
        parallel_ranges(size_t(from.rows()), 16, [&](size_t b, size_t e, size_t chunk) {
            int64_t local = 0;
            for (size_t i = b; i < e; ++i) {
                double best = std::numeric_limits<double>::infinity();
                for (Eigen::Index j = 0; j < to.rows(); ++j) {
                    double d2 = (to.row(j) - from.row(Eigen::Index(i))).squaredNorm();
                    if (d2 < best) best = d2;
                }
                if (best <= tau2) ++local;
            }
            hits[chunk] += local;
        });
    } else {
        KdTree tree(to);
        parallel_ranges(size_t(from.rows()), 16, [&](size_t b, size_t e, size_t chunk) {
            int64_t local = 0;
            for (size_t i = b; i < e; ++i) {
                auto r = tree.nearest(from.row(Eigen::Index(i)));
                if (r.sq_dist <= tau2) ++local;
            }
            hits[chunk] += local;
        });
    }
    int64_t total = std::accumulate(hits.begin(), hits.end(), int64_t(0));
    return double(total) / double(from.rows());
}

} // namespace

EvalReport f1_score(const PointCloud& recon, const PointCloud& gt, double tau,
                    bool exhaustive) {
    if (recon.size() == 0 || gt.size() == 0)
        throw ContractError("f1_score requires non-empty clouds");
    if (!(tau > 0)) throw ContractError("f1_score requires tau > 0");
    EvalReport rep;
    rep.tau = tau;
    rep.n_recon = recon.size();
    rep.n_gt_cropped = gt.size();
    rep.precision = coverage(recon.points, gt.points, tau, exhaustive);
    rep.recall = coverage(gt.points, recon.points, tau, exhaustive);
    rep.f1 = rep.precision + rep.recall > 0
                 ? 2.0 * rep.precision * rep.recall / (rep.precision + rep.recall)
                 : 0.0;
    return rep;
}

} // namespace scv2
