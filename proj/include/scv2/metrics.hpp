#pragma once

#include "scv2/types.hpp"

#include <string>
#include <vector>

namespace scv2 {

// Append-only run log. Columns are frozen:
// stage,iter,psnr,ssim,f1,count,wall_ms
// wall_ms is informational and excluded from determinism guarantees.
class MetricsWriter {
public:
    explicit MetricsWriter(const std::string& path);

    void row(const std::string& stage, int64_t iter, double psnr, double ssim,
             double f1, int64_t count, double wall_ms);

    static constexpr const char* kHeader = "stage,iter,psnr,ssim,f1,count,wall_ms";

private:
    std::string path_;
};

// Minimal SVG line chart: one polyline per series over a shared x axis.
struct ChartSeries {
    std::string label;
    std::vector<double> x, y;
};
void write_svg_chart(const std::string& path, const std::string& title,
                     const std::vector<ChartSeries>& series);

} // namespace scv2
