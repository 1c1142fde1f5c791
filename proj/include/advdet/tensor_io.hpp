#pragma once

#include <filesystem>

#include "advdet/tensor.hpp"

namespace advdet {

// Binary tensor container used for images, perturbations, and weights:
// 16-byte header (8-byte magic "ADVTENSR", u32 version, u32 reserved),
// then rank (u32), extents (u32 each), then the raw little-endian f32
// payload in row-major order.
void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

} // namespace advdet
