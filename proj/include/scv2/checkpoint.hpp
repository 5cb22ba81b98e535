#pragma once

#include "scv2/compress.hpp"
#include "scv2/types.hpp"

#include <string>

namespace scv2 {

// Checkpoint container: magic "SCV2", version, kind, little-endian payload,
// crc32 trailer. Raw models store float32 attribute arrays; quantized models
// store the half-precision arrays and codebook.
void save_checkpoint(const std::string& path, const SceneModel& model);
void save_checkpoint(const std::string& path, const QuantizedModel& q);

bool checkpoint_is_quantized(const std::string& path);

SceneModel load_checkpoint(const std::string& path);
QuantizedModel load_quantized_checkpoint(const std::string& path);

// Loads either kind, dequantizing when needed.
SceneModel load_model_any(const std::string& path);

} // namespace scv2
