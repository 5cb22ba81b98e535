#include "scv2/image.hpp"

namespace scv2 {

double mse(const Image3& a, const Image3& b) {
    if (!a.same_size(b)) throw ContractError("mse: image size mismatch");
    double s = (a.r - b.r).square().sum() + (a.g - b.g).square().sum() +
               (a.b - b.b).square().sum();
    return s / double(3 * a.r.size());
}

double psnr(const Image3& a, const Image3& b) {
    double m = mse(a, b);
    if (m <= 0.0) return std::numeric_limits<double>::infinity();
    return -10.0 * std::log10(m);
}

Image3 from_bytes(const std::vector<unsigned char>& rgb, int width, int height) {
    if (Eigen::Index(rgb.size()) != Eigen::Index(width) * height * 3)
        throw ContractError("from_bytes: buffer size mismatch");
    Image3 img(height, width);
    size_t i = 0;
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            img.r(y, x) = rgb[i++] / 255.0;
            img.g(y, x) = rgb[i++] / 255.0;
            img.b(y, x) = rgb[i++] / 255.0;
        }
    return img;
}

std::vector<unsigned char> to_bytes(const Image3& img) {
    std::vector<unsigned char> out(size_t(img.height()) * img.width() * 3);
    size_t i = 0;
    auto q = [](double v) {
        double c = std::clamp(v, 0.0, 1.0) * 255.0;
        return (unsigned char)std::lround(c);
    };
    for (Eigen::Index y = 0; y < img.height(); ++y)
        for (Eigen::Index x = 0; x < img.width(); ++x) {
            out[i++] = q(img.r(y, x));
            out[i++] = q(img.g(y, x));
            out[i++] = q(img.b(y, x));
        }
    return out;
}

} // namespace scv2
