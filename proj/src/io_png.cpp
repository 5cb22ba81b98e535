#include "scv2/io_png.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

namespace scv2 {

namespace {

void put_u32(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back((v >> 24) & 0xFF);
    out.push_back((v >> 16) & 0xFF);
    out.push_back((v >> 8) & 0xFF);
    out.push_back(v & 0xFF);
}

uint32_t get_u32(const unsigned char* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) |
           uint32_t(p[3]);
}

void put_chunk(std::vector<unsigned char>& out, const char type[4],
               const std::vector<unsigned char>& payload) {
    put_u32(out, uint32_t(payload.size()));
    size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), payload.begin(), payload.end());
    uint32_t crc = uint32_t(::crc32(0, out.data() + start, uInt(out.size() - start)));
    put_u32(out, crc);
}

int paeth(int a, int b, int c) {
    int p = a + b - c;
    int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

} // namespace

std::vector<unsigned char> encode_png(const std::vector<unsigned char>& rgb,
                                      int width, int height) {
    if (width <= 0 || height <= 0 ||
        rgb.size() != size_t(width) * size_t(height) * 3)
        throw ContractError("encode_png: bad dimensions");

    std::vector<unsigned char> raw;
    raw.reserve(size_t(height) * (1 + size_t(width) * 3));
    for (int y = 0; y < height; ++y) {
        raw.push_back(0); // filter: none
        const unsigned char* row = rgb.data() + size_t(y) * width * 3;
        raw.insert(raw.end(), row, row + size_t(width) * 3);
    }

    uLongf bound = ::compressBound(uLong(raw.size()));
    std::vector<unsigned char> compressed(bound);
    if (::compress2(compressed.data(), &bound, raw.data(), uLong(raw.size()), 9) != Z_OK)
        throw DataError("encode_png: deflate failed");
    compressed.resize(bound);

    std::vector<unsigned char> out = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    std::vector<unsigned char> ihdr;
    put_u32(ihdr, uint32_t(width));
    put_u32(ihdr, uint32_t(height));
    ihdr.push_back(8); // bit depth
    ihdr.push_back(2); // color type: RGB
    ihdr.push_back(0);
    ihdr.push_back(0);
    ihdr.push_back(0);
    put_chunk(out, "IHDR", ihdr);
    put_chunk(out, "IDAT", compressed);
    put_chunk(out, "IEND", {});
    return out;
}

void save_png(const std::string& path, const Image3& img) {
    auto bytes = to_bytes(img);
    auto png = encode_png(bytes, int(img.width()), int(img.height()));
    std::ofstream os(path, std::ios::binary);
    if (!os) throw DataError("png: cannot write " + path);
    os.write(reinterpret_cast<const char*>(png.data()), std::streamsize(png.size()));
    if (!os) throw DataError("png: write failed " + path);
}

Image3 load_png(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("png: cannot open " + path);
    std::vector<unsigned char> buf((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (buf.size() < 8 || std::memcmp(buf.data(), sig, 8) != 0)
        throw DataError("png: bad signature in " + path);

    int width = 0, height = 0, color_type = -1, bit_depth = 0;
    std::vector<unsigned char> idat;
    size_t pos = 8;
    while (pos + 8 <= buf.size()) {
        uint32_t len = get_u32(buf.data() + pos);
        if (pos + 12 + len > buf.size()) throw DataError("png: truncated chunk in " + path);
        std::string type(reinterpret_cast<const char*>(buf.data() + pos + 4), 4);
        const unsigned char* payload = buf.data() + pos + 8;
        if (type == "IHDR") {
            width = int(get_u32(payload));
            height = int(get_u32(payload + 4));
            bit_depth = payload[8];
            color_type = payload[9];
            if (payload[12] != 0) throw DataError("png: interlaced files unsupported");
        } else if (type == "IDAT") {
            idat.insert(idat.end(), payload, payload + len);
        } else if (type == "IEND") {
            break;
        }
        pos += 12 + len;
    }
    if (width <= 0 || height <= 0 || bit_depth != 8)
        throw DataError("png: unsupported header in " + path);
    int ch;
    switch (color_type) {
        case 0: ch = 1; break;
        case 2: ch = 3; break;
        case 6: ch = 4; break;
        default: throw DataError("png: unsupported color type in " + path);
    }

    size_t stride = size_t(width) * size_t(ch);
    std::vector<unsigned char> raw(size_t(height) * (stride + 1));
    uLongf raw_len = uLongf(raw.size());
    if (::uncompress(raw.data(), &raw_len, idat.data(), uLong(idat.size())) != Z_OK ||
        raw_len != raw.size())
        throw DataError("png: inflate failed for " + path);

    std::vector<unsigned char> pixels(size_t(height) * stride);
    for (int y = 0; y < height; ++y) {
        unsigned char filter = raw[size_t(y) * (stride + 1)];
        const unsigned char* src = raw.data() + size_t(y) * (stride + 1) + 1;
        unsigned char* dst = pixels.data() + size_t(y) * stride;
        const unsigned char* up = y > 0 ? pixels.data() + size_t(y - 1) * stride : nullptr;
        for (size_t i = 0; i < stride; ++i) {
            int a = i >= size_t(ch) ? dst[i - size_t(ch)] : 0;
            int b = up ? up[i] : 0;
            int c = (up && i >= size_t(ch)) ? up[i - size_t(ch)] : 0;
            int v = src[i];
            switch (filter) {
                case 0: break;
                case 1: v += a; break;
                case 2: v += b; break;
                case 3: v += (a + b) / 2; break;
                case 4: v += paeth(a, b, c); break;
                default: throw DataError("png: unknown filter in " + path);
            }
            dst[i] = (unsigned char)(v & 0xFF);
        }
    }

    std::vector<unsigned char> rgb(size_t(width) * size_t(height) * 3);
    for (size_t p = 0; p < size_t(width) * size_t(height); ++p) {
        const unsigned char* s = pixels.data() + p * size_t(ch);
        if (ch == 1) {
            rgb[3 * p] = rgb[3 * p + 1] = rgb[3 * p + 2] = s[0];
        } else {
            rgb[3 * p] = s[0];
            rgb[3 * p + 1] = s[1];
            rgb[3 * p + 2] = s[2];
        }
    }
    return from_bytes(rgb, width, height);
}

} // namespace scv2
