#pragma once

// Named-tensor container file.
//
// Layout, little-endian throughout:
//   "STDN" | version u16 | entry count u32
//   per entry: name length u16 | ASCII name | rank u8 | dims u64 x rank |
//              dtype u8 (0 = f32, 1 = f64) | row-major payload
//
// Readers load the whole file before parsing, so a failed read never yields
// partial results.

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "stdn/tensor.hpp"

namespace stdn {

inline constexpr char kContainerMagic[4] = {'S', 'T', 'D', 'N'};
inline constexpr std::uint16_t kContainerVersion = 1;

enum class DType : std::uint8_t { f32 = 0, f64 = 1 };

struct StoredTensor {
  std::string name;
  Shape shape;
  std::variant<std::vector<float>, std::vector<double>> values;

  DType dtype() const { return values.index() == 0 ? DType::f32 : DType::f64; }

  template <typename T>
  static StoredTensor from(std::string name, const Tensor<T>& t) {
    return {std::move(name), t.shape(), std::vector<T>(t.data().begin(), t.data().end())};
  }

  // Converts from either stored precision.
  template <typename T>
  Tensor<T> to_tensor(bool requires_grad = false) const {
    std::vector<T> out;
    std::visit([&](const auto& v) { out.assign(v.begin(), v.end()); }, values);
    return Tensor<T>(shape, std::move(out), requires_grad);
  }
};

std::vector<std::uint8_t> encode_container(const std::vector<StoredTensor>& entries);
std::vector<StoredTensor> decode_container(const std::vector<std::uint8_t>& bytes);

void write_container(const std::filesystem::path& path, const std::vector<StoredTensor>& entries);
std::vector<StoredTensor> read_container(const std::filesystem::path& path);

// nullptr when absent.
const StoredTensor* find_entry(const std::vector<StoredTensor>& entries, const std::string& name);

}  // namespace stdn
