#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "stdn/tensor.hpp"

namespace stdn {

/// Binary P6 image tiling [N,3,H,W] values (clamped to [0,1]) row by row,
/// `columns` tiles wide, with `gap` black pixels between tiles.
std::vector<std::uint8_t> encode_ppm_grid(const Tensor<float>& images, std::size_t columns, std::size_t gap = 2);

void write_ppm_grid(const std::filesystem::path& path, const Tensor<float>& images, std::size_t columns,
                    std::size_t gap = 2);

}  // namespace stdn
