#pragma once

#include "scv2/types.hpp"

#include <cstdint>
#include <vector>

namespace scv2 {

// IEEE 754 binary16 conversions, round-to-nearest-even.
uint16_t f32_to_f16(float v);
float f16_to_f32(uint16_t h);

struct KMeansResult {
    MatrixXd centroids;            // k x dim
    std::vector<uint32_t> assign;  // per row
    std::vector<double> objective; // per iteration (non-increasing)
};

// Lloyd iterations with k-means++ seeding; deterministic for a given seed.
KMeansResult kmeans(const MatrixXd& data, int k, int iters, uint64_t seed);

// Contribution-ranked compressed model: the most important fraction keeps
// every attribute in half precision, the rest replace their SH vector by a
// codebook index.
struct QuantizedModel {
    int64_t total = 0;
    double ratio = 0.0;
    uint32_t codebook_size = 0;
    uint64_t seed = 0;
    int64_t iteration = 0;
    Vector3d background = Vector3d::Zero();

    std::vector<uint8_t> is_tail;        // per surfel, original order
    // head arrays (in original relative order)
    std::vector<uint16_t> head_center;   // 3 per surfel
    std::vector<uint16_t> head_rotation; // 4
    std::vector<uint16_t> head_log_scales; // 2
    std::vector<uint16_t> head_opacity;  // 1
    std::vector<uint16_t> head_sh;       // 27
    // tail arrays
    std::vector<uint16_t> tail_center;
    std::vector<uint16_t> tail_rotation;
    std::vector<uint16_t> tail_log_scales;
    std::vector<uint16_t> tail_opacity;
    std::vector<uint16_t> tail_index;    // codebook row per tail surfel
    std::vector<uint16_t> codebook;      // codebook_size x 27

    int64_t head_count() const;
    int64_t tail_count() const;
};

// Bottom `ratio` fraction by contribution becomes the tail; the codebook is
// k-means over tail SH vectors (k clamped to the tail size).
QuantizedModel quantize(const SceneModel& model, const VectorXd& contributions,
                        double ratio, uint32_t codebook_size, uint64_t seed);

SceneModel dequantize(const QuantizedModel& q);

} // namespace scv2
