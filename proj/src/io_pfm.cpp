#include "scv2/io_pfm.hpp"

#include <fstream>
#include <vector>

namespace scv2 {

void save_pfm(const std::string& path, const ArrayXXd& img) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("pfm: cannot write " + path);
    os << "Pf\n" << img.cols() << " " << img.rows() << "\n-1.0\n";
    std::vector<float> row(size_t(img.cols()));
    for (Eigen::Index y = img.rows(); y-- > 0;) {
        for (Eigen::Index x = 0; x < img.cols(); ++x) row[size_t(x)] = float(img(y, x));
        os.write(reinterpret_cast<const char*>(row.data()),
                 std::streamsize(row.size() * sizeof(float)));
    }
    if (!os) throw DataError("pfm: write failed " + path);
}

ArrayXXd load_pfm(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("pfm: cannot open " + path);
    std::string magic;
    is >> magic;
    if (magic != "Pf") throw DataError("pfm: only grayscale Pf supported: " + path);
    Eigen::Index w, h;
    double scale;
    is >> w >> h >> scale;
    is.get(); // newline
    if (w <= 0 || h <= 0) throw DataError("pfm: bad dimensions in " + path);
    if (scale > 0) throw DataError("pfm: big-endian files unsupported: " + path);
    ArrayXXd img(h, w);
    std::vector<float> row(static_cast<size_t>(w));
    for (Eigen::Index y = h; y-- > 0;) {
        is.read(reinterpret_cast<char*>(row.data()),
                std::streamsize(row.size() * sizeof(float)));
        if (!is) throw DataError("pfm: truncated file " + path);
        for (Eigen::Index x = 0; x < w; ++x) img(y, x) = row[size_t(x)];
    }
    return img;
}

} // namespace scv2
