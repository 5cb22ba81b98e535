#include "scv2/adam.hpp"

namespace scv2 {

void Adam::reset(Eigen::Index n) {
    m_center_ = MatX3::Zero(n, 3);
    v_center_ = MatX3::Zero(n, 3);
    m_rot_ = MatX4::Zero(n, 4);
    v_rot_ = MatX4::Zero(n, 4);
    m_ls_ = MatX2::Zero(n, 2);
    v_ls_ = MatX2::Zero(n, 2);
    m_op_ = VectorXd::Zero(n);
    v_op_ = VectorXd::Zero(n);
    m_sh_ = MatXSh::Zero(n, kShDim);
    v_sh_ = MatXSh::Zero(n, kShDim);
    t_ = 0;
}

void Adam::remap(const std::vector<int>& src) {
    Eigen::Index n = Eigen::Index(src.size());
    Adam next;
    next.reset(n);
    next.t_ = t_;
    for (Eigen::Index i = 0; i < n; ++i) {
        int s = src[size_t(i)];
        if (s < 0) continue;
        next.m_center_.row(i) = m_center_.row(s);
        next.v_center_.row(i) = v_center_.row(s);
        next.m_rot_.row(i) = m_rot_.row(s);
        next.v_rot_.row(i) = v_rot_.row(s);
        next.m_ls_.row(i) = m_ls_.row(s);
        next.v_ls_.row(i) = v_ls_.row(s);
        next.m_op_[i] = m_op_[s];
        next.v_op_[i] = v_op_[s];
        next.m_sh_.row(i) = m_sh_.row(s);
        next.v_sh_.row(i) = v_sh_.row(s);
    }
    next.beta1 = beta1;
    next.beta2 = beta2;
    next.eps = eps;
    *this = std::move(next);
}

void Adam::zero_opacity_state() {
    m_op_.setZero();
    v_op_.setZero();
}

void Adam::step(SceneModel& model, const SurfelGradients& g, const LearningRates& lr,
                Eigen::Index active_count) {
    if (size() != model.size())
        throw ContractError("adam state size does not match the model");
    ++t_;
    double bc1 = 1.0 - std::pow(beta1, double(t_));
    double bc2 = 1.0 - std::pow(beta2, double(t_));

    auto update = [&](auto& param, const auto& grad, auto& m, auto& v, double rate) {
        for (Eigen::Index i = 0; i < active_count; ++i) {
            for (Eigen::Index k = 0; k < param.cols(); ++k) {
                double gr = grad(i, k);
                double& mm = m(i, k);
                double& vv = v(i, k);
                mm = beta1 * mm + (1.0 - beta1) * gr;
                vv = beta2 * vv + (1.0 - beta2) * gr * gr;
                double mhat = mm / bc1, vhat = vv / bc2;
                param(i, k) -= rate * mhat / (std::sqrt(vhat) + eps);
            }
        }
    };
    update(model.centers, g.d_center, m_center_, v_center_, lr.center);
    update(model.rotations, g.d_rotation, m_rot_, v_rot_, lr.rotation);
    update(model.log_scales, g.d_log_scales, m_ls_, v_ls_, lr.log_scales);
    update(model.sh, g.d_sh, m_sh_, v_sh_, lr.sh);
    for (Eigen::Index i = 0; i < active_count; ++i) {
        double gr = g.d_opacity_logit[i];
        double& mm = m_op_[i];
        double& vv = v_op_[i];
        mm = beta1 * mm + (1.0 - beta1) * gr;
        vv = beta2 * vv + (1.0 - beta2) * gr * gr;
        model.opacity_logits[i] -= lr.opacity * (mm / bc1) / (std::sqrt(vv / bc2) + eps);
    }
}

double decayed_lr(double lr_init, double final_mult, int64_t iter, int64_t total) {
    if (total <= 0) return lr_init;
    double t = std::clamp(double(iter) / double(total), 0.0, 1.0);
    return lr_init * std::pow(final_mult, t);
}

} // namespace scv2
