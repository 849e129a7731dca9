#include "stdn/ppm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <string>

#include "stdn/error.hpp"

namespace stdn {

std::vector<std::uint8_t> encode_ppm_grid(const Tensor<float>& images, std::size_t columns, std::size_t gap) {
  if (images.rank() != 4 || images.dim(1) != 3) {
    throw DimensionError("ppm grid needs [N,3,H,W], got " + shape_string(images.shape()));
  }
  if (columns < 1) throw ContractError("ppm grid needs at least one column");
  const std::size_t n = images.dim(0), h = images.dim(2), w = images.dim(3);
  const std::size_t cols = std::min(columns, n);
  const std::size_t rows = (n + cols - 1) / cols;
  const std::size_t width = cols * w + (cols - 1) * gap;
  const std::size_t height = rows * h + (rows - 1) * gap;

  const std::string header = "P6\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  const std::size_t body = out.size();
  out.resize(body + width * height * 3, 0);

  auto px = images.data();
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t ox = (i % cols) * (w + gap), oy = (i / cols) * (h + gap);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        for (std::size_t c = 0; c < 3; ++c) {
          const float v = std::clamp(px[((i * 3 + c) * h + y) * w + x], 0.0f, 1.0f);
          out[body + ((oy + y) * width + ox + x) * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0f));
        }
  }
  return out;
}

void write_ppm_grid(const std::filesystem::path& path, const Tensor<float>& images, std::size_t columns,
                    std::size_t gap) {
  const auto bytes = encode_ppm_grid(images, columns, gap);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

}  // namespace stdn
