#include "scv2/types.hpp"

namespace scv2 {

void SceneModel::filter(const std::vector<int>& keep) {
    if (Eigen::Index(keep.size()) != size())
        throw ContractError("filter mask length mismatch");
    Eigen::Index n = 0;
    for (int k : keep) n += (k != 0);
    SceneModel out;
    out.resize(n);
    Eigen::Index j = 0;
    for (Eigen::Index i = 0; i < size(); ++i) {
        if (!keep[i]) continue;
        out.centers.row(j) = centers.row(i);
        out.rotations.row(j) = rotations.row(i);
        out.log_scales.row(j) = log_scales.row(i);
        out.opacity_logits[j] = opacity_logits[i];
        out.sh.row(j) = sh.row(i);
        ++j;
    }
    centers = std::move(out.centers);
    rotations = std::move(out.rotations);
    log_scales = std::move(out.log_scales);
    opacity_logits = std::move(out.opacity_logits);
    sh = std::move(out.sh);
}

void SceneModel::conservative_resize(Eigen::Index n) {
    centers.conservativeResize(n, 3);
    rotations.conservativeResize(n, 4);
    log_scales.conservativeResize(n, 2);
    opacity_logits.conservativeResize(n);
    sh.conservativeResize(n, kShDim);
}

void SceneModel::append_all(const SceneModel& other) {
    Eigen::Index n = size(), m = other.size();
    conservative_resize(n + m);
    centers.bottomRows(m) = other.centers;
    rotations.bottomRows(m) = other.rotations;
    log_scales.bottomRows(m) = other.log_scales;
    opacity_logits.tail(m) = other.opacity_logits;
    sh.bottomRows(m) = other.sh;
}

double SceneModel::extent() const {
    if (size() == 0) return 1.0;
    Vector3d lo = centers.colwise().minCoeff();
    Vector3d hi = centers.colwise().maxCoeff();
    double e = 0.5 * (hi - lo).norm();
    return e > 0 ? e : 1.0;
}

namespace {
constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792,
                           0.31539156525252005, -1.0925484305920792,
                           0.5462742152960396};
} // namespace

void sh_basis(const Vector3d& dir, double* b) {
    double x = dir.x(), y = dir.y(), z = dir.z();
    b[0] = kC0;
    b[1] = -kC1 * y;
    b[2] = kC1 * z;
    b[3] = -kC1 * x;
    b[4] = kC2[0] * x * y;
    b[5] = kC2[1] * y * z;
    b[6] = kC2[2] * (2.0 * z * z - x * x - y * y);
    b[7] = kC2[3] * x * z;
    b[8] = kC2[4] * (x * x - y * y);
}

void sh_basis_grad(const Vector3d& dir, Eigen::Matrix<double, kShCoeffs, 3>& db) {
    double x = dir.x(), y = dir.y(), z = dir.z();
    db.setZero();
    db(1, 1) = -kC1;
    db(2, 2) = kC1;
    db(3, 0) = -kC1;
    db(4, 0) = kC2[0] * y;
    db(4, 1) = kC2[0] * x;
    db(5, 1) = kC2[1] * z;
    db(5, 2) = kC2[1] * y;
    db(6, 0) = -2.0 * kC2[2] * x;
    db(6, 1) = -2.0 * kC2[2] * y;
    db(6, 2) = 4.0 * kC2[2] * z;
    db(7, 0) = kC2[3] * z;
    db(7, 2) = kC2[3] * x;
    db(8, 0) = 2.0 * kC2[4] * x;
    db(8, 1) = -2.0 * kC2[4] * y;
}

Vector3d eval_sh(const ShMatrix& sh, const Vector3d& dir) {
    if (std::abs(dir.norm() - 1.0) > 1e-6)
        throw ContractError("eval_sh requires a unit view direction");
    double b[kShCoeffs];
    sh_basis(dir, b);
    Vector3d rgb = Vector3d::Zero();
    for (int k = 0; k < kShCoeffs; ++k) rgb += b[k] * sh.row(k).transpose();
    rgb.array() += 0.5;
    return rgb.cwiseMax(0.0);
}

Vector3d surfel_normal(const Surfel& s, const Camera& cam) {
    Matrix3d rot = s.rotation.toRotationMatrix();
    Vector3d n = rot.col(0).cross(rot.col(1));
    Vector3d view = s.center - cam.position();
    if (n.dot(view) > 0.0) n = -n;
    return n;
}

double elongation_rate(double su, double sv) {
    if (!(su > 0.0 && sv > 0.0))
        throw ContractError("elongation_rate requires positive scales");
    return std::min(su, sv) / std::max(su, sv);
}

double elongation_rate(const Surfel& s) {
    return elongation_rate(s.scales.x(), s.scales.y());
}

} // namespace scv2
