#pragma once

#include "scv2/types.hpp"

#include <string>

namespace scv2 {

// Grayscale PFM ("Pf"), float32 little-endian, bottom-up row order.
void save_pfm(const std::string& path, const ArrayXXd& img);
ArrayXXd load_pfm(const std::string& path);

} // namespace scv2
