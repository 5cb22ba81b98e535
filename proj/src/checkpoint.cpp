#include "scv2/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace scv2 {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'V', '2'};
constexpr uint32_t kVersion = 1;
constexpr uint32_t kKindRaw = 0;
constexpr uint32_t kKindQuantized = 1;

struct Writer {
    std::vector<unsigned char> buf;

    template <typename T>
    void raw(T v) {
        static_assert(std::is_trivially_copyable_v<T>);
        size_t at = buf.size();
        buf.resize(at + sizeof(T));
        std::memcpy(buf.data() + at, &v, sizeof(T));
    }
    void f32(double v) { raw(float(v)); }
    void bytes(const void* p, size_t n) {
        size_t at = buf.size();
        buf.resize(at + n);
        std::memcpy(buf.data() + at, p, n);
    }
};

struct Reader {
    const unsigned char* p;
    size_t remaining;
    std::string path;

    template <typename T>
    T raw() {
        if (remaining < sizeof(T))
            throw DataError("checkpoint: truncated payload in " + path);
        T v;
        std::memcpy(&v, p, sizeof(T));
        p += sizeof(T);
        remaining -= sizeof(T);
        return v;
    }
    void bytes(void* dst, size_t n) {
        if (remaining < n) throw DataError("checkpoint: truncated payload in " + path);
        std::memcpy(dst, p, n);
        p += n;
        remaining -= n;
    }
};

void write_file(const std::string& path, uint32_t kind, const Writer& payload) {
    std::vector<unsigned char> out;
    out.insert(out.end(), kMagic, kMagic + 4);
    Writer head;
    head.raw(kVersion);
    head.raw(kind);
    out.insert(out.end(), head.buf.begin(), head.buf.end());
    out.insert(out.end(), payload.buf.begin(), payload.buf.end());
    uint32_t crc = uint32_t(::crc32(0, out.data(), uInt(out.size())));
    Writer trailer;
    trailer.raw(crc);
    out.insert(out.end(), trailer.buf.begin(), trailer.buf.end());

    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("checkpoint: cannot write " + path);
    os.write(reinterpret_cast<const char*>(out.data()), std::streamsize(out.size()));
    if (!os) throw DataError("checkpoint: write failed " + path);
}

std::vector<unsigned char> read_file(const std::string& path, uint32_t& kind) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
    if (buf.size() < 16 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw DataError("checkpoint: bad magic in " + path);
    uint32_t stored_crc;
    std::memcpy(&stored_crc, buf.data() + buf.size() - 4, 4);
    uint32_t crc = uint32_t(::crc32(0, buf.data(), uInt(buf.size() - 4)));
    if (crc != stored_crc) throw DataError("checkpoint: crc mismatch in " + path);
    uint32_t version;
    std::memcpy(&version, buf.data() + 4, 4);
    if (version != kVersion)
        throw DataError("checkpoint: unsupported version " + std::to_string(version) +
                        " in " + path);
    std::memcpy(&kind, buf.data() + 8, 4);
    // Strip header and trailer.
    buf.erase(buf.begin(), buf.begin() + 12);
    buf.resize(buf.size() - 4);
    return buf;
}

} // namespace

void save_checkpoint(const std::string& path, const SceneModel& model) {
    Writer w;
    w.raw(static_cast<uint64_t>(model.size()));
    w.raw(int64_t(model.iteration));
    for (int d = 0; d < 3; ++d) w.f32(model.background[d]);
    for (Eigen::Index i = 0; i < model.size(); ++i)
        for (int d = 0; d < 3; ++d) w.f32(model.centers(i, d));
    for (Eigen::Index i = 0; i < model.size(); ++i)
        for (int d = 0; d < 4; ++d) w.f32(model.rotations(i, d));
    for (Eigen::Index i = 0; i < model.size(); ++i)
        for (int d = 0; d < 2; ++d) w.f32(model.log_scales(i, d));
    for (Eigen::Index i = 0; i < model.size(); ++i) w.f32(model.opacity_logits[i]);
    for (Eigen::Index i = 0; i < model.size(); ++i)
        for (int d = 0; d < kShDim; ++d) w.f32(model.sh(i, d));
    write_file(path, kKindRaw, w);
}

void save_checkpoint(const std::string& path, const QuantizedModel& q) {
    Writer w;
    w.raw(static_cast<uint64_t>(q.total));
    w.raw(static_cast<uint64_t>(q.tail_count()));
    w.raw(q.codebook_size);
    w.raw(float(q.ratio));
    w.raw(q.seed);
    w.raw(int64_t(q.iteration));
    for (int d = 0; d < 3; ++d) w.f32(q.background[d]);
    // Membership bitmask.
    std::vector<uint8_t> bits((size_t(q.total) + 7) / 8, 0);
    for (int64_t i = 0; i < q.total; ++i)
        if (q.is_tail[size_t(i)]) bits[size_t(i) / 8] |= uint8_t(1u << (i % 8));
    w.bytes(bits.data(), bits.size());
    auto dump = [&](const std::vector<uint16_t>& v) {
        w.bytes(v.data(), v.size() * sizeof(uint16_t));
    };
    dump(q.head_center);
    dump(q.head_rotation);
    dump(q.head_log_scales);
    dump(q.head_opacity);
    dump(q.head_sh);
    dump(q.tail_center);
    dump(q.tail_rotation);
    dump(q.tail_log_scales);
    dump(q.tail_opacity);
    dump(q.tail_index);
    dump(q.codebook);
    write_file(path, kKindQuantized, w);
}

bool checkpoint_is_quantized(const std::string& path) {
    uint32_t kind;
    read_file(path, kind);
    return kind == kKindQuantized;
}

SceneModel load_checkpoint(const std::string& path) {
    uint32_t kind;
    auto buf = read_file(path, kind);
    if (kind != kKindRaw)
        throw DataError("checkpoint: expected a raw model in " + path);
    Reader r{buf.data(), buf.size(), path};
    uint64_t n = r.raw<uint64_t>();
    SceneModel m;
    m.resize(Eigen::Index(n));
    m.iteration = r.raw<int64_t>();
    for (int d = 0; d < 3; ++d) m.background[d] = r.raw<float>();
    for (Eigen::Index i = 0; i < m.size(); ++i)
        for (int d = 0; d < 3; ++d) m.centers(i, d) = r.raw<float>();
    for (Eigen::Index i = 0; i < m.size(); ++i)
        for (int d = 0; d < 4; ++d) m.rotations(i, d) = r.raw<float>();
    for (Eigen::Index i = 0; i < m.size(); ++i)
        for (int d = 0; d < 2; ++d) m.log_scales(i, d) = r.raw<float>();
    for (Eigen::Index i = 0; i < m.size(); ++i) m.opacity_logits[i] = r.raw<float>();
    for (Eigen::Index i = 0; i < m.size(); ++i)
        for (int d = 0; d < kShDim; ++d) m.sh(i, d) = r.raw<float>();
    if (r.remaining != 0) throw DataError("checkpoint: trailing bytes in " + path);
    return m;
}

QuantizedModel load_quantized_checkpoint(const std::string& path) {
    uint32_t kind;
    auto buf = read_file(path, kind);
    if (kind != kKindQuantized)
        throw DataError("checkpoint: expected a quantized model in " + path);
    Reader r{buf.data(), buf.size(), path};
    QuantizedModel q;
    q.total = int64_t(r.raw<uint64_t>());
    uint64_t n_tail = r.raw<uint64_t>();
    q.codebook_size = r.raw<uint32_t>();
    q.ratio = r.raw<float>();
    q.seed = r.raw<uint64_t>();
    q.iteration = r.raw<int64_t>();
    for (int d = 0; d < 3; ++d) q.background[d] = r.raw<float>();
    std::vector<uint8_t> bits((size_t(q.total) + 7) / 8);
    r.bytes(bits.data(), bits.size());
    q.is_tail.assign(size_t(q.total), 0);
    int64_t tails = 0;
    for (int64_t i = 0; i < q.total; ++i) {
        q.is_tail[size_t(i)] = (bits[size_t(i) / 8] >> (i % 8)) & 1u;
        tails += q.is_tail[size_t(i)];
    }
    if (tails != int64_t(n_tail))
        throw DataError("checkpoint: inconsistent tail count in " + path);
    int64_t heads = q.total - tails;
    auto slurp = [&](std::vector<uint16_t>& v, int64_t count) {
        v.resize(static_cast<size_t>(count));
        r.bytes(v.data(), v.size() * sizeof(uint16_t));
    };
    slurp(q.head_center, 3 * heads);
    slurp(q.head_rotation, 4 * heads);
    slurp(q.head_log_scales, 2 * heads);
    slurp(q.head_opacity, heads);
    slurp(q.head_sh, kShDim * heads);
    slurp(q.tail_center, 3 * tails);
    slurp(q.tail_rotation, 4 * tails);
    slurp(q.tail_log_scales, 2 * tails);
    slurp(q.tail_opacity, tails);
    slurp(q.tail_index, tails);
    slurp(q.codebook, int64_t(q.codebook_size) * kShDim);
    if (r.remaining != 0) throw DataError("checkpoint: trailing bytes in " + path);
    return q;
}

SceneModel load_model_any(const std::string& path) {
    uint32_t kind;
    read_file(path, kind);
    if (kind == kKindQuantized) return dequantize(load_quantized_checkpoint(path));
    return load_checkpoint(path);
}

} // namespace scv2
