#pragma once

// Explicit instantiations shared by the reference and parallel kernel files.
// Expand inside the namespace whose templates should be instantiated.
#define STDN_INSTANTIATE(T)                                                                          \
  template void conv2d_forward<T>(const ConvGeometry&, std::span<const T>, std::span<const T>,       \
                                  std::span<const T>, std::span<T>);                                 \
  template void conv2d_backward_input<T>(const ConvGeometry&, std::span<const T>, std::span<const T>, \
                                         std::span<T>);                                              \
  template void conv2d_backward_params<T>(const ConvGeometry&, std::span<const T>,                   \
                                          std::span<const T>, std::span<T>, std::span<T>);           \
  template void maxpool2x2_forward<T>(const PlaneGeometry&, std::span<const T>, std::span<T>);       \
  template void maxpool2x2_backward<T>(const PlaneGeometry&, std::span<const T>, std::span<const T>, \
                                       std::span<T>);                                                \
  template void avgpool2x2_forward<T>(const PlaneGeometry&, std::span<const T>, std::span<T>);       \
  template void avgpool2x2_backward<T>(const PlaneGeometry&, std::span<const T>, std::span<T>);      \
  template void bilinear_forward<T>(const SampleGeometry&, std::span<const T>, std::span<const T>,   \
                                    std::span<T>);                                                   \
  template void bilinear_backward<T>(const SampleGeometry&, std::span<const T>, std::span<const T>,  \
                                     std::span<const T>, std::span<T>, std::span<T>);

