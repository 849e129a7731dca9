#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "stdn/tensor.hpp"

namespace stdn {

enum class Split { train, val, test };

const char* split_name(Split split);

/// Images [M,3,H,W] with values in [0,1] before normalization, labels in {0,1}.
struct Dataset {
  Tensor<float> images;
  std::vector<int> labels;
  Split split = Split::train;

  std::size_t size() const { return labels.size(); }
  std::size_t image_h() const { return images.dim(2); }
  std::size_t image_w() const { return images.dim(3); }
  void validate() const;
  // Rows [begin, begin + count) as a new dataset.
  Dataset subset(std::size_t begin, std::size_t count) const;
};

/// Two-class synthetic tissue analogue. Every image is smooth pinkish
/// background texture with per-pixel noise and a dozen faint blobs scattered
/// anywhere; class 1 additionally carries a cluster of brighter blobs whose
/// centroid lies in the central third of the image. Labels are balanced (class 1 gets floor(n/2)) and shuffled with
/// the seed; the output is a pure function of (n, image_size, seed).
Dataset synthesize_dataset(std::size_t n, std::size_t image_size, std::uint64_t seed,
                           Split split = Split::train);

// Container entries "images" (f32 [M,3,H,W]) and "labels" (f32 [M]).
void write_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& path, Split split = Split::train);

}  // namespace stdn
