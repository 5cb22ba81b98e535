#pragma once

#include "scv2/rasterizer.hpp"
#include "scv2/types.hpp"

namespace scv2 {

struct LearningRates {
    double center = 1.6e-4;  // scaled by scene extent and decayed by the caller
    double rotation = 1e-3;
    double log_scales = 5e-3;
    double opacity = 5e-2;
    double sh = 2.5e-3;
};

// First-order adaptive-moment optimizer state over the surfel arrays.
class Adam {
public:
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-15;

    void reset(Eigen::Index n);
    Eigen::Index size() const { return m_op_.size(); }

    // Remap state rows after a structural model edit (-1 = fresh zeros).
    void remap(const std::vector<int>& src);

    void zero_opacity_state();

    // One update of the first `active_count` rows.
    void step(SceneModel& model, const SurfelGradients& g, const LearningRates& lr,
              Eigen::Index active_count);

private:
    MatX3 m_center_, v_center_;
    MatX4 m_rot_, v_rot_;
    MatX2 m_ls_, v_ls_;
    VectorXd m_op_, v_op_;
    MatXSh m_sh_, v_sh_;
    int64_t t_ = 0;
};

// Log-space interpolation from lr_init to lr_init * final_mult across the run.
double decayed_lr(double lr_init, double final_mult, int64_t iter, int64_t total);

} // namespace scv2
