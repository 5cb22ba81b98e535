#pragma once

#include "scv2/image.hpp"

#include <string>
#include <vector>

namespace scv2 {

// Minimal PNG codec (8-bit RGB/RGBA/gray, non-interlaced) over zlib. Output
// bytes are deterministic for a given image.
void save_png(const std::string& path, const Image3& img);
Image3 load_png(const std::string& path);

std::vector<unsigned char> encode_png(const std::vector<unsigned char>& rgb,
                                      int width, int height);

} // namespace scv2
