#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace scv2 {

using Eigen::Vector2d;
using Eigen::Vector3d;
using Eigen::Vector4d;
using Eigen::Matrix3d;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using Eigen::ArrayXXd;

using MatX3 = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;
using MatX4 = Eigen::Matrix<double, Eigen::Dynamic, 4, Eigen::RowMajor>;
using MatX2 = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

inline constexpr int kShCoeffs = 9;                  // degree-2 real basis
inline constexpr int kShDim = 3 * kShCoeffs;         // 9 coefficients x RGB
using ShMatrix = Eigen::Matrix<double, kShCoeffs, 3>; // coefficient-major
using MatXSh = Eigen::Matrix<double, Eigen::Dynamic, kShDim, Eigen::RowMajor>;

// Thrown when a documented precondition is violated.
struct ContractError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
// Malformed or inconsistent input data (files, datasets, checkpoints).
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
// Optimization blew past a configured safety limit.
struct DivergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// ---------------------------------------------------------------------------
// Surfel: an oriented 2D Gaussian disk. The quaternion's rotated basis gives
// the tangent directions t_u, t_v; the normal is t_u x t_v. Values here are
// post-activation (unit quaternion, positive scales, opacity in [0,1]).
// ---------------------------------------------------------------------------
struct Surfel {
    Vector3d center = Vector3d::Zero();
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();
    Vector2d scales = Vector2d::Ones();
    double opacity = 0.5;
    ShMatrix sh = ShMatrix::Zero();

    Vector3d tangent_u() const { return rotation.toRotationMatrix().col(0); }
    Vector3d tangent_v() const { return rotation.toRotationMatrix().col(1); }

    void validate() const {
        if (!(scales.x() > 0.0 && scales.y() > 0.0))
            throw ContractError("surfel scales must be positive");
        if (std::abs(rotation.norm() - 1.0) > 1e-6)
            throw ContractError("surfel quaternion must be unit");
        if (!(opacity >= 0.0 && opacity <= 1.0))
            throw ContractError("surfel opacity must be in [0,1]");
    }
};

// Pinhole camera with a rigid world-to-camera transform x_cam = R x + t.
// Pixel (ix, iy) has its center at (ix + 0.5, iy + 0.5).
struct Camera {
    int id = 0;
    int width = 0;
    int height = 0;
    double fx = 0, fy = 0, cx = 0, cy = 0;
    Matrix3d R = Matrix3d::Identity();
    Vector3d t = Vector3d::Zero();
    bool is_test = false;

    Vector3d world_to_cam(const Vector3d& p) const { return R * p + t; }
    Vector3d cam_to_world(const Vector3d& p) const { return R.transpose() * (p - t); }
    Vector3d position() const { return -R.transpose() * t; }

    // Returns (px, py, z). z <= 0 means behind the camera.
    Vector3d project(const Vector3d& p) const {
        Vector3d c = world_to_cam(p);
        return {fx * c.x() / c.z() + cx, fy * c.y() / c.z() + cy, c.z()};
    }

    // World-space ray direction with unit camera-space z, so that the ray
    // parameter equals camera depth.
    Vector3d ray_dir(double px, double py) const {
        Vector3d d((px - cx) / fx, (py - cy) / fy, 1.0);
        return R.transpose() * d;
    }

    void validate() const {
        if (width <= 0 || height <= 0) throw ContractError("camera image size must be positive");
        if (!(fx > 0 && fy > 0)) throw ContractError("camera focal lengths must be positive");
        Matrix3d e = R * R.transpose() - Matrix3d::Identity();
        if (e.cwiseAbs().maxCoeff() > 1e-6) throw ContractError("camera rotation must be orthonormal");
    }
};

// ---------------------------------------------------------------------------
// SceneModel: structure-of-arrays surfel storage. Optimizable parameters are
// kept raw (unnormalized quaternion, log scales, opacity logit); surfel(i)
// exposes activated values.
// ---------------------------------------------------------------------------
class SceneModel {
public:
    MatX3 centers;
    MatX4 rotations;    // raw quaternion (w, x, y, z), normalized on read
    MatX2 log_scales;
    VectorXd opacity_logits;
    MatXSh sh;          // row layout: coefficient-major, rgb innermost

    Vector3d background = Vector3d::Zero();
    int64_t iteration = 0;

    Eigen::Index size() const { return centers.rows(); }

    void resize(Eigen::Index n) {
        centers.resize(n, 3);
        rotations.resize(n, 4);
        log_scales.resize(n, 2);
        opacity_logits.resize(n);
        sh.resize(n, kShDim);
    }

    Surfel surfel(Eigen::Index i) const {
        Surfel s;
        s.center = centers.row(i);
        Vector4d q = rotations.row(i);
        double n = q.norm();
        s.rotation = Eigen::Quaterniond(q[0] / n, q[1] / n, q[2] / n, q[3] / n);
        s.scales = log_scales.row(i).array().exp();
        s.opacity = sigmoid(opacity_logits[i]);
        s.sh = Eigen::Map<const Eigen::Matrix<double, 3, kShCoeffs>>(sh.row(i).data()).transpose();
        return s;
    }

    void set_surfel(Eigen::Index i, const Surfel& s) {
        centers.row(i) = s.center;
        rotations.row(i) << s.rotation.w(), s.rotation.x(), s.rotation.y(), s.rotation.z();
        log_scales.row(i) = s.scales.array().log().matrix();
        double o = std::clamp(s.opacity, 1e-12, 1.0 - 1e-12);
        opacity_logits[i] = logit(o);
        Eigen::Map<Eigen::Matrix<double, 3, kShCoeffs>>(sh.row(i).data()) = s.sh.transpose();
    }

    void append(const Surfel& s) {
        Eigen::Index n = size();
        conservative_resize(n + 1);
        set_surfel(n, s);
    }

    // Keep rows where keep[i] is true.
    void filter(const std::vector<int>& keep);
    void conservative_resize(Eigen::Index n);

    // Concatenate another model's surfels (background/iteration unchanged).
    void append_all(const SceneModel& other);

    // Half the diagonal of the center bounding box; used to scale learning
    // rates and densification thresholds.
    double extent() const;
};

// ---------------------------------------------------------------------------
// Spherical harmonics, degree 2, real basis in the splatting convention.
// ---------------------------------------------------------------------------

// Fills b[0..8] with basis values for a unit direction.
void sh_basis(const Vector3d& dir, double* b);

// d(basis)/d(dir) as a 9x3 matrix (row k = gradient of basis k).
void sh_basis_grad(const Vector3d& dir, Eigen::Matrix<double, kShCoeffs, 3>& db);

// Color from SH coefficients: clamp(sum_k c_k b_k + 0.5, 0, inf) per channel.
// Requires |dir| = 1 within 1e-6.
Vector3d eval_sh(const ShMatrix& sh, const Vector3d& dir);

// Surfel normal oriented toward the camera (dot with the view direction <= 0).
Vector3d surfel_normal(const Surfel& s, const Camera& cam);

// min(scale)/max(scale), in (0, 1]. Requires positive scales.
double elongation_rate(const Surfel& s);
double elongation_rate(double su, double sv);

} // namespace scv2
