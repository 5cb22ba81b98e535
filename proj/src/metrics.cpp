#include "scv2/metrics.hpp"

#include <filesystem>
#include <fstream>

namespace scv2 {

MetricsWriter::MetricsWriter(const std::string& path) : path_(path) {
    if (!std::filesystem::exists(path_)) {
        std::ofstream os(path_);
        if (!os) throw DataError("metrics: cannot write " + path_);
        os << kHeader << "\n";
    }
}

void MetricsWriter::row(const std::string& stage, int64_t iter, double psnr,
                        double ssim, double f1, int64_t count, double wall_ms) {
    std::ofstream os(path_, std::ios::app);
    if (!os) throw DataError("metrics: cannot append to " + path_);
    char buf[256];
    auto num = [&](double v) {
        if (!std::isfinite(v)) return std::string("");
        std::snprintf(buf, sizeof(buf), "%.9g", v);
        return std::string(buf);
    };
    os << stage << "," << iter << "," << num(psnr) << "," << num(ssim) << ","
       << num(f1) << "," << count << "," << num(wall_ms) << "\n";
}

void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<ChartSeries>& series) {
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series)
        for (size_t i = 0; i < s.x.size(); ++i) {
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i]);
            ymax = std::max(ymax, s.y[i]);
        }
    if (!(xmax >= xmin)) {
        xmin = 0;
        xmax = 1;
        ymin = 0;
        ymax = 1;
    }
    if (ymax - ymin < 1e-12) ymax = ymin + 1.0;
    const double W = 640, H = 360, m = 48;
    auto sx = [&](double x) { return m + (x - xmin) / (xmax - xmin) * (W - 2 * m); };
    auto sy = [&](double y) { return H - m - (y - ymin) / (ymax - ymin) * (H - 2 * m); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                   "#ff7f0e", "#8c564b"};

    std::ofstream os(path);
    if (!os) throw DataError("chart: cannot write " + path);
    os << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H
       << "'>\n<rect width='100%' height='100%' fill='white'/>\n";
    os << "<text x='" << W / 2 << "' y='20' text-anchor='middle' font-size='14'>"
       << title << "</text>\n";
    os << "<line x1='" << m << "' y1='" << H - m << "' x2='" << W - m << "' y2='"
       << H - m << "' stroke='black'/>\n";
    os << "<line x1='" << m << "' y1='" << m << "' x2='" << m << "' y2='" << H - m
       << "' stroke='black'/>\n";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4g", ymin);
    os << "<text x='4' y='" << H - m << "' font-size='10'>" << buf << "</text>\n";
    std::snprintf(buf, sizeof(buf), "%.4g", ymax);
    os << "<text x='4' y='" << m << "' font-size='10'>" << buf << "</text>\n";
    int ci = 0;
    for (const auto& s : series) {
        os << "<polyline fill='none' stroke='" << colors[ci % 6] << "' points='";
        for (size_t i = 0; i < s.x.size(); ++i)
            os << sx(s.x[i]) << "," << sy(s.y[i]) << " ";
        os << "'/>\n";
        os << "<text x='" << W - m + 4 << "' y='" << m + 14 * ci << "' font-size='11' fill='"
           << colors[ci % 6] << "'>" << s.label << "</text>\n";
        ++ci;
    }
    os << "</svg>\n";
}

} // namespace scv2
