#include "scv2/scenegen.hpp"
#include "scv2/io_pfm.hpp"
#include "scv2/io_png.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>

namespace scv2 {

namespace {

Camera look_at(const Vector3d& eye, const Vector3d& target, int id, int size) {
    Vector3d f = (target - eye).normalized();
    Vector3d up(0, 0, 1);
    if (std::abs(f.dot(up)) > 0.999) up = Vector3d(0, 1, 0);
    Vector3d r = f.cross(up).normalized();
    Vector3d d = f.cross(r); // image-down
    Camera cam;
    cam.id = id;
    cam.width = cam.height = size;
    cam.fx = cam.fy = 0.9 * size;
    cam.cx = cam.cy = size / 2.0;
    cam.R.row(0) = r.transpose();
    cam.R.row(1) = d.transpose();
    cam.R.row(2) = f.transpose();
    cam.t = -cam.R * eye;
    return cam;
}

struct Hit {
    double t = std::numeric_limits<double>::infinity();
    Vector3d normal = Vector3d::Zero();
    Vector3d albedo = Vector3d::Zero();
    bool ok = false;
};

bool box_bounds(const BoxSpec& b, Vector3d& lo, Vector3d& hi) {
    lo = b.center - 0.5 * b.size;
    hi = b.center + 0.5 * b.size;
    return true;
}

void intersect_box(const BoxSpec& b, const Vector3d& o, const Vector3d& dir, Hit& hit) {
    Vector3d lo, hi;
    box_bounds(b, lo, hi);
    double tmin = 1e-9, tmax = hit.t;
    int axis = -1;
    double sign = 0;
    for (int k = 0; k < 3; ++k) {
        if (std::abs(dir[k]) < 1e-12) {
            if (o[k] < lo[k] || o[k] > hi[k]) return;
            continue;
        }
        double inv = 1.0 / dir[k];
        double t0 = (lo[k] - o[k]) * inv;
        double t1 = (hi[k] - o[k]) * inv;
        double s = -1;
        if (t0 > t1) {
            std::swap(t0, t1);
            s = 1;
        }
        if (t0 > tmin) {
            tmin = t0;
            axis = k;
            sign = s;
        }
        if (t1 < tmax) tmax = t1;
        if (tmin > tmax) return;
    }
    if (axis < 0) return; // origin inside the box
    hit.t = tmin;
    hit.normal = Vector3d::Zero();
    hit.normal[axis] = sign;
    hit.albedo = b.albedo;
    hit.ok = true;
}

double checker_factor(const SceneSpec& spec, const Vector3d& p) {
    if (!spec.checker) return 1.0;
    double s = 1.0 / spec.checker_period;
    int64_t parity = int64_t(std::floor(p.x() * s)) + int64_t(std::floor(p.y() * s)) +
                     int64_t(std::floor(p.z() * s + 0.25));
    return (parity & 1) ? 1.18 : 0.82;
}

Hit trace(const SceneSpec& spec, const Vector3d& o, const Vector3d& dir) {
    Hit hit;
    // Ground plane z = 0, bounded.
    if (dir.z() < -1e-12) {
        double t = -o.z() / dir.z();
        if (t > 1e-9) {
            Vector3d p = o + t * dir;
            if (std::abs(p.x()) <= spec.ground_half && std::abs(p.y()) <= spec.ground_half) {
                hit.t = t;
                hit.normal = Vector3d(0, 0, 1);
                hit.albedo = spec.ground_albedo;
                hit.ok = true;
            }
        }
    }
    for (const auto& b : spec.boxes) intersect_box(b, o, dir, hit);
    return hit;
}

Vector3d shade(const SceneSpec& spec, const Hit& hit, const Vector3d& p) {
    Vector3d l = spec.light_dir.normalized();
    double diff = std::max(0.0, hit.normal.dot(-l));
    Vector3d c = hit.albedo * checker_factor(spec, p) * (0.35 + 0.65 * diff);
    return c.cwiseMin(1.0).cwiseMax(0.0);
}

void push_quad(TriangleMesh& mesh, std::vector<Vector3d>& verts,
               std::vector<std::array<uint32_t, 3>>& faces, const Vector3d& a,
               const Vector3d& b, const Vector3d& c, const Vector3d& d) {
    uint32_t base = uint32_t(verts.size());
    verts.push_back(a);
    verts.push_back(b);
    verts.push_back(c);
    verts.push_back(d);
    faces.push_back({base, base + 1, base + 2});
    faces.push_back({base, base + 2, base + 3});
    (void)mesh;
}

} // namespace

void SceneSpec::finalize() {
    if (!boxes.empty() || n_boxes <= 0) return;
    Rng rng(seed ^ 0xB0E5ULL);
    for (int i = 0; i < n_boxes; ++i) {
        BoxSpec b;
        double reach = ground_half * 0.55;
        b.size = Vector3d(rng.uniform(1.2, 3.2), rng.uniform(1.2, 3.2),
                          rng.uniform(1.0, 3.6));
        b.center = Vector3d(rng.uniform(-reach, reach), rng.uniform(-reach, reach),
                            b.size.z() / 2.0);
        double mix = rng.uniform();
        b.albedo = box_albedo_lo + mix * (box_albedo_hi - box_albedo_lo);
        boxes.push_back(b);
    }
}

std::vector<Camera> scene_cameras(const SceneSpec& spec) {
    std::vector<Camera> cams;
    Vector3d target(0, 0, 0.8);
    int id = 0;
    auto ring = [&](int count, double radius, double height) {
        for (int i = 0; i < count; ++i) {
            double a = 2.0 * std::acos(-1.0) * double(i) / double(count);
            Vector3d eye(radius * std::cos(a), radius * std::sin(a), height);
            Camera cam = look_at(eye, target, id, spec.image_size);
            cam.is_test = spec.test_every > 0 && (id % spec.test_every) == spec.test_every / 2;
            cams.push_back(cam);
            ++id;
        }
    };
    ring(spec.ring1_count, spec.ring1_radius, spec.ring1_height);
    ring(spec.ring2_count, spec.ring2_radius, spec.ring2_height);
    return cams;
}

void raycast(const SceneSpec& spec, const Camera& cam, Image3& image, ArrayXXd& depth) {
    const int H = cam.height, W = cam.width;
    image.setZero(H, W);
    depth = ArrayXXd::Constant(H, W, std::numeric_limits<double>::infinity());
    Vector3d o = cam.position();
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            Vector3d dir = cam.ray_dir(x + 0.5, y + 0.5);
            Hit hit = trace(spec, o, dir);
            if (hit.ok) {
                Vector3d p = o + hit.t * dir;
                image.set_pixel(y, x, shade(spec, hit, p));
                depth(y, x) = hit.t; // unit camera-z parametrization
            } else {
                image.set_pixel(y, x, spec.sky);
            }
        }
}

TriangleMesh scene_mesh(const SceneSpec& spec) {
    std::vector<Vector3d> verts;
    std::vector<std::array<uint32_t, 3>> faces;
    TriangleMesh mesh;
    double g = spec.ground_half;
    push_quad(mesh, verts, faces, {-g, -g, 0}, {g, -g, 0}, {g, g, 0}, {-g, g, 0});
    for (const auto& b : spec.boxes) {
        Vector3d lo, hi;
        box_bounds(b, lo, hi);
        // Sides and top; the resting face is unobservable.
        push_quad(mesh, verts, faces, {lo.x(), lo.y(), lo.z()}, {hi.x(), lo.y(), lo.z()},
                  {hi.x(), lo.y(), hi.z()}, {lo.x(), lo.y(), hi.z()});
        push_quad(mesh, verts, faces, {hi.x(), hi.y(), lo.z()}, {lo.x(), hi.y(), lo.z()},
                  {lo.x(), hi.y(), hi.z()}, {hi.x(), hi.y(), hi.z()});
        push_quad(mesh, verts, faces, {lo.x(), hi.y(), lo.z()}, {lo.x(), lo.y(), lo.z()},
                  {lo.x(), lo.y(), hi.z()}, {lo.x(), hi.y(), hi.z()});
        push_quad(mesh, verts, faces, {hi.x(), lo.y(), lo.z()}, {hi.x(), hi.y(), lo.z()},
                  {hi.x(), hi.y(), hi.z()}, {hi.x(), lo.y(), hi.z()});
        push_quad(mesh, verts, faces, {lo.x(), lo.y(), hi.z()}, {hi.x(), lo.y(), hi.z()},
                  {hi.x(), hi.y(), hi.z()}, {lo.x(), hi.y(), hi.z()});
    }
    mesh.vertices.resize(Eigen::Index(verts.size()), 3);
    for (size_t i = 0; i < verts.size(); ++i) mesh.vertices.row(Eigen::Index(i)) = verts[i];
    mesh.faces.resize(Eigen::Index(faces.size()), 3);
    for (size_t i = 0; i < faces.size(); ++i)
        mesh.faces.row(Eigen::Index(i)) << faces[i][0], faces[i][1], faces[i][2];
    return mesh;
}

PointCloud sample_scene_points(const SceneSpec& spec, int64_t count, uint64_t seed) {
    TriangleMesh mesh = scene_mesh(spec);
    std::vector<double> cum;
    cum.reserve(size_t(mesh.faces.rows()));
    double total = 0;
    for (Eigen::Index f = 0; f < mesh.faces.rows(); ++f) {
        Vector3d a = mesh.vertices.row(mesh.faces(f, 0));
        Vector3d b = mesh.vertices.row(mesh.faces(f, 1));
        Vector3d c = mesh.vertices.row(mesh.faces(f, 2));
        total += 0.5 * (b - a).cross(c - a).norm();
        cum.push_back(total);
    }
    auto under_box = [&](const Vector3d& p) {
        if (std::abs(p.z()) > 1e-9) return false;
        for (const auto& b : spec.boxes) {
            Vector3d lo, hi;
            box_bounds(b, lo, hi);
            if (p.x() >= lo.x() && p.x() <= hi.x() && p.y() >= lo.y() && p.y() <= hi.y())
                return true;
        }
        return false;
    };

    Rng rng(seed);
    PointCloud cloud;
    cloud.points.resize(count, 3);
    cloud.colors.resize(count, 3);
    for (int64_t i = 0; i < count; ++i) {
        Vector3d p;
        Vector3d albedo;
        for (int attempt = 0; attempt < 64; ++attempt) {
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
            p = a + u * (b - a) + v * (c - a);
            if (!under_box(p)) break;
        }
        albedo = std::abs(p.z()) < 1e-9 ? spec.ground_albedo
                                        : Vector3d(0.6, 0.6, 0.6);
        for (const auto& b : spec.boxes) {
            Vector3d lo, hi;
            box_bounds(b, lo, hi);
            if ((p.array() >= lo.array() - 1e-9).all() &&
                (p.array() <= hi.array() + 1e-9).all())
                albedo = b.albedo;
        }
        cloud.points.row(i) = p;
        cloud.colors.row(i) =
            (albedo * checker_factor(spec, p) * 0.75).cwiseMin(1.0).cwiseMax(0.0);
    }
    return cloud;
}

PointCloud initial_cloud(const SceneSpec& spec) {
    PointCloud base = sample_scene_points(spec, spec.initial_points, spec.seed ^ 0x1111);
    Rng rng(spec.seed ^ 0x2222);
    for (Eigen::Index i = 0; i < base.size(); ++i)
        base.points.row(i) += spec.initial_jitter *
                              Vector3d(rng.normal(), rng.normal(), rng.normal()).transpose();
    return base;
}

void generate_dataset(const SceneSpec& spec_in, const std::string& out_dir) {
    SceneSpec spec = spec_in;
    spec.finalize();
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(out_dir) / "images");
    fs::create_directories(fs::path(out_dir) / "depth_priors");

    std::vector<Camera> cams = scene_cameras(spec);
    nlohmann::json views = nlohmann::json::array();
    for (const auto& cam : cams) {
        Image3 image;
        ArrayXXd depth;
        raycast(spec, cam, image, depth);

        char name[64];
        std::snprintf(name, sizeof(name), "view_%03d", cam.id);
        std::string img_rel = std::string("images/") + name + ".png";
        save_png((fs::path(out_dir) / img_rel).string(), image);

        // Inverse depth; sky pixels store 0 (= invalid).
        ArrayXXd inv(depth.rows(), depth.cols());
        for (Eigen::Index y = 0; y < depth.rows(); ++y)
            for (Eigen::Index x = 0; x < depth.cols(); ++x)
                inv(y, x) = std::isfinite(depth(y, x))
                                ? spec.prior_scale / depth(y, x) + spec.prior_shift
                                : 0.0;
        std::string pfm_rel = std::string("depth_priors/") + name + ".pfm";
        save_pfm((fs::path(out_dir) / pfm_rel).string(), inv);
        std::ofstream side((fs::path(out_dir) / "depth_priors" / (std::string(name) + ".txt")));
        side << "id " << cam.id << "\nscale 1\nshift 0\ninvalid_value 0\n";

        nlohmann::json v;
        v["id"] = cam.id;
        v["width"] = cam.width;
        v["height"] = cam.height;
        v["fx"] = cam.fx;
        v["fy"] = cam.fy;
        v["cx"] = cam.cx;
        v["cy"] = cam.cy;
        std::vector<double> R(9), t(3);
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c) R[size_t(3 * r + c)] = cam.R(r, c);
        for (int r = 0; r < 3; ++r) t[size_t(r)] = cam.t[r];
        v["R"] = R;
        v["t"] = t;
        v["split"] = cam.is_test ? "test" : "train";
        v["image"] = img_rel;
        v["depth_prior"] = pfm_rel;
        views.push_back(v);
    }

    nlohmann::json root;
    root["background"] = {spec.sky.x(), spec.sky.y(), spec.sky.z()};
    root["views"] = views;
    std::ofstream os((fs::path(out_dir) / "cameras.json"));
    os << root.dump(2) << "\n";

    save_ply((fs::path(out_dir) / "points3d.ply").string(), initial_cloud(spec));
    save_ply((fs::path(out_dir) / "gt_points.ply").string(),
             sample_scene_points(spec, spec.gt_points, spec.seed ^ 0x3333));
    save_mesh_ply((fs::path(out_dir) / "gt_mesh.ply").string(), scene_mesh(spec));
}

void make_adversarial_elongated(SceneModel& model, double fraction, uint64_t seed) {
    if (!(fraction >= 0.0 && fraction < 1.0))
        throw ContractError("adversarial fraction must be in [0,1)");
    if (fraction == 0.0 || model.size() == 0) return;
    Rng rng(seed);
    std::vector<int> idx(size_t(model.size()));
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = int(i);
    rng.shuffle(idx);
    Eigen::Index n = Eigen::Index(std::ceil(fraction * double(model.size())));
    for (Eigen::Index k = 0; k < n; ++k) {
        int i = idx[size_t(k)];
        double s = std::exp(model.log_scales.row(i).maxCoeff());
        model.log_scales(i, 0) = std::log(s);
        model.log_scales(i, 1) = std::log(s * 1e-3);
        model.opacity_logits[i] = logit(0.95);
        Vector4d q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        while (q.norm() < 1e-3)
            q = Vector4d(rng.normal(), rng.normal(), rng.normal(), rng.normal());
        model.rotations.row(i) = q.normalized().transpose();
    }
}

} // namespace scv2
