#include "scv2/compress.hpp"
#include "scv2/rng.hpp"
#include "scv2/threading.hpp"

#include <algorithm>
#include <cstring>
#include <numeric>

namespace scv2 {

uint16_t f32_to_f16(float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    uint32_t sign = (bits >> 16) & 0x8000u;
    int32_t exp = int32_t((bits >> 23) & 0xFF) - 127 + 15;
    uint32_t mant = bits & 0x7FFFFFu;
    if (((bits >> 23) & 0xFF) == 0xFF) // inf / nan
        return uint16_t(sign | 0x7C00u | (mant ? 0x200u : 0u));
    if (exp >= 31) return uint16_t(sign | 0x7C00u); // overflow -> inf
    if (exp <= 0) {
        if (exp < -10) return uint16_t(sign); // underflow -> signed zero
        // subnormal: shift with round-to-nearest-even
        mant |= 0x800000u;
        int shift = 14 - exp;
        uint32_t half = mant >> shift;
        uint32_t rem = mant & ((1u << shift) - 1);
        uint32_t mid = 1u << (shift - 1);
        if (rem > mid || (rem == mid && (half & 1u))) ++half;
        return uint16_t(sign | half);
    }
    uint32_t half = uint32_t(exp << 10) | (mant >> 13);
    uint32_t rem = mant & 0x1FFFu;
    if (rem > 0x1000u || (rem == 0x1000u && (half & 1u))) ++half;
    return uint16_t(sign | half);
}

float f16_to_f32(uint16_t h) {
    uint32_t sign = uint32_t(h & 0x8000u) << 16;
    uint32_t exp = (h >> 10) & 0x1Fu;
    uint32_t mant = h & 0x3FFu;
    uint32_t bits;
    if (exp == 0) {
        if (mant == 0) {
            bits = sign;
        } else {
            exp = 127 - 15 + 1;
            while (!(mant & 0x400u)) {
                mant <<= 1;
                --exp;
            }
            mant &= 0x3FFu;
            bits = sign | (exp << 23) | (mant << 13);
        }
    } else if (exp == 31) {
        bits = sign | 0x7F800000u | (mant << 13);
    } else {
        bits = sign | ((exp - 15 + 127) << 23) | (mant << 13);
    }
    float out;
    std::memcpy(&out, &bits, 4);
    return out;
}

KMeansResult kmeans(const MatrixXd& data, int k, int iters, uint64_t seed) {
    const Eigen::Index n = data.rows(), dim = data.cols();
    if (n == 0 || k < 1) throw ContractError("kmeans requires data and k >= 1");
    k = int(std::min<Eigen::Index>(k, n));

    Rng rng(seed);
    KMeansResult res;
    res.centroids.resize(k, dim);
    res.assign.assign(size_t(n), 0);

    // k-means++ seeding.
    std::vector<double> min_d2(size_t(n), std::numeric_limits<double>::infinity());
    Eigen::Index first = Eigen::Index(rng.uniform_index(static_cast<uint64_t>(n)));
    res.centroids.row(0) = data.row(first);
    for (int c = 1; c < k; ++c) {
        double total = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            double d2 = (data.row(i) - res.centroids.row(c - 1)).squaredNorm();
            min_d2[size_t(i)] = std::min(min_d2[size_t(i)], d2);
            total += min_d2[size_t(i)];
        }
        Eigen::Index pick = 0;
        if (total > 0.0) {
            double r = rng.uniform() * total;
            double acc = 0.0;
            for (Eigen::Index i = 0; i < n; ++i) {
                acc += min_d2[size_t(i)];
                if (acc >= r) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = Eigen::Index(rng.uniform_index(static_cast<uint64_t>(n)));
        }
        res.centroids.row(c) = data.row(pick);
    }

    std::vector<double> obj_chunks(16, 0.0);
    for (int it = 0; it < iters; ++it) {
        // Assignment (deterministic chunked reduction for the objective).
        std::fill(obj_chunks.begin(), obj_chunks.end(), 0.0);
        parallel_ranges(size_t(n), 16, [&](size_t b, size_t e, size_t chunk) {
            double local = 0.0;
            for (size_t i = b; i < e; ++i) {
                double best = std::numeric_limits<double>::infinity();
                uint32_t arg = 0;
                for (int c = 0; c < k; ++c) {
                    double d2 = (data.row(Eigen::Index(i)) - res.centroids.row(c)).squaredNorm();
                    if (d2 < best) {
                        best = d2;
                        arg = uint32_t(c);
                    }
                }
                res.assign[i] = arg;
                local += best;
            }
            obj_chunks[chunk] += local;
        });
        double obj = 0.0;
        for (double v : obj_chunks) obj += v;
        res.objective.push_back(obj);

        if (it + 1 == iters) break;
        // Update; empty clusters keep their centroid.
        MatrixXd sums = MatrixXd::Zero(k, dim);
        std::vector<int64_t> counts(size_t(k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            sums.row(res.assign[size_t(i)]) += data.row(i);
            ++counts[res.assign[size_t(i)]];
        }
        for (int c = 0; c < k; ++c)
            if (counts[size_t(c)] > 0)
                res.centroids.row(c) = sums.row(c) / double(counts[size_t(c)]);
    }
    return res;
}

int64_t QuantizedModel::tail_count() const { return int64_t(tail_index.size()); }
int64_t QuantizedModel::head_count() const { return total - tail_count(); }

QuantizedModel quantize(const SceneModel& model, const VectorXd& contributions,
                        double ratio, uint32_t codebook_size, uint64_t seed) {
    if (!(ratio >= 0.0 && ratio < 1.0)) throw ContractError("quantize ratio must be in [0,1)");
    if (codebook_size < 1) throw ContractError("quantize requires codebook size >= 1");
    if (contributions.size() != model.size())
        throw ContractError("quantize: contribution vector length mismatch");
    const Eigen::Index n = model.size();

    // Bottom `ratio` fraction by (contribution, index).
    Eigen::Index n_tail = n - Eigen::Index(std::ceil((1.0 - ratio) * double(n)));
    std::vector<int> order(static_cast<size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (contributions[a] != contributions[b]) return contributions[a] < contributions[b];
        return a < b;
    });

    QuantizedModel q;
    q.total = n;
    q.ratio = ratio;
    q.seed = seed;
    q.iteration = model.iteration;
    q.background = model.background;
    q.is_tail.assign(size_t(n), 0);
    for (Eigen::Index i = 0; i < n_tail; ++i) q.is_tail[size_t(order[size_t(i)])] = 1;

    uint32_t k = codebook_size;
    if (n_tail > 0 && int64_t(k) > n_tail) k = uint32_t(n_tail); // clamped, with note
    if (n_tail > 0) {
        MatrixXd tail_sh(n_tail, kShDim);
        Eigen::Index r = 0;
        for (Eigen::Index i = 0; i < n; ++i)
            if (q.is_tail[size_t(i)]) tail_sh.row(r++) = model.sh.row(i);
        KMeansResult km = kmeans(tail_sh, int(k), 25, seed);
        q.codebook_size = uint32_t(km.centroids.rows());
        q.codebook.resize(size_t(q.codebook_size) * kShDim);
        for (Eigen::Index c = 0; c < km.centroids.rows(); ++c)
            for (int d = 0; d < kShDim; ++d)
                q.codebook[size_t(c) * kShDim + size_t(d)] =
                    f32_to_f16(float(km.centroids(c, d)));
        q.tail_index.resize(static_cast<size_t>(n_tail));
        for (Eigen::Index i = 0; i < n_tail; ++i)
            q.tail_index[size_t(i)] = uint16_t(km.assign[size_t(i)]);
    } else {
        q.codebook_size = 0;
    }

    auto push = [](std::vector<uint16_t>& dst, double v) { dst.push_back(f32_to_f16(float(v))); };
    for (Eigen::Index i = 0; i < n; ++i) {
        bool tail = q.is_tail[size_t(i)] != 0;
        auto& center = tail ? q.tail_center : q.head_center;
        auto& rot = tail ? q.tail_rotation : q.head_rotation;
        auto& ls = tail ? q.tail_log_scales : q.head_log_scales;
        auto& op = tail ? q.tail_opacity : q.head_opacity;
        for (int d = 0; d < 3; ++d) push(center, model.centers(i, d));
        for (int d = 0; d < 4; ++d) push(rot, model.rotations(i, d));
        for (int d = 0; d < 2; ++d) push(ls, model.log_scales(i, d));
        push(op, model.opacity_logits[i]);
        if (!tail)
            for (int d = 0; d < kShDim; ++d) push(q.head_sh, model.sh(i, d));
    }
    return q;
}

SceneModel dequantize(const QuantizedModel& q) {
    SceneModel m;
    m.resize(q.total);
    m.background = q.background;
    m.iteration = q.iteration;
    Eigen::Index hi = 0, ti = 0;
    for (Eigen::Index i = 0; i < q.total; ++i) {
        bool tail = q.is_tail[size_t(i)] != 0;
        const auto& center = tail ? q.tail_center : q.head_center;
        const auto& rot = tail ? q.tail_rotation : q.head_rotation;
        const auto& ls = tail ? q.tail_log_scales : q.head_log_scales;
        const auto& op = tail ? q.tail_opacity : q.head_opacity;
        Eigen::Index r = tail ? ti : hi;
        for (int d = 0; d < 3; ++d) m.centers(i, d) = f16_to_f32(center[size_t(3 * r + d)]);
        for (int d = 0; d < 4; ++d) m.rotations(i, d) = f16_to_f32(rot[size_t(4 * r + d)]);
        for (int d = 0; d < 2; ++d) m.log_scales(i, d) = f16_to_f32(ls[size_t(2 * r + d)]);
        m.opacity_logits[i] = f16_to_f32(op[size_t(r)]);
        if (tail) {
            uint32_t idx = q.tail_index[size_t(r)];
            if (idx >= q.codebook_size)
                throw DataError("dequantize: codebook index " + std::to_string(idx) +
                                " out of range at tail row " + std::to_string(r));
            for (int d = 0; d < kShDim; ++d)
                m.sh(i, d) = f16_to_f32(q.codebook[size_t(idx) * kShDim + size_t(d)]);
            ++ti;
        } else {
            for (int d = 0; d < kShDim; ++d)
                m.sh(i, d) = f16_to_f32(q.head_sh[size_t(kShDim * r + d)]);
            ++hi;
        }
    }
    return m;
}

} // namespace scv2
