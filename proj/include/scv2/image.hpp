#pragma once

#include "scv2/types.hpp"

namespace scv2 {

// Planar RGB image of doubles; each plane is an Eigen array (rows = y).
struct Image3 {
    ArrayXXd r, g, b;

    Image3() = default;
    Image3(Eigen::Index h, Eigen::Index w) { setZero(h, w); }

    void setZero(Eigen::Index h, Eigen::Index w) {
        r = ArrayXXd::Zero(h, w);
        g = ArrayXXd::Zero(h, w);
        b = ArrayXXd::Zero(h, w);
    }
    Eigen::Index height() const { return r.rows(); }
    Eigen::Index width() const { return r.cols(); }
    bool empty() const { return r.size() == 0; }

    ArrayXXd& plane(int c) { return c == 0 ? r : (c == 1 ? g : b); }
    const ArrayXXd& plane(int c) const { return c == 0 ? r : (c == 1 ? g : b); }

    Vector3d pixel(Eigen::Index y, Eigen::Index x) const {
        return {r(y, x), g(y, x), b(y, x)};
    }
    void set_pixel(Eigen::Index y, Eigen::Index x, const Vector3d& v) {
        r(y, x) = v.x();
        g(y, x) = v.y();
        b(y, x) = v.z();
    }
    bool same_size(const Image3& o) const {
        return height() == o.height() && width() == o.width();
    }
};

double psnr(const Image3& a, const Image3& b);
double mse(const Image3& a, const Image3& b);

// 8-bit interleaved RGB <-> planar double in [0,1].
Image3 from_bytes(const std::vector<unsigned char>& rgb, int width, int height);
std::vector<unsigned char> to_bytes(const Image3& img);

} // namespace scv2
