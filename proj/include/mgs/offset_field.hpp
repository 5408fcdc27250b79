#pragma once

#include <cstddef>
#include <string>

#include "mgs/tensor.hpp"

namespace mgs {

// Per-output-pixel, per-kernel-tap 2-D displacements for a k x k deformable
// convolution. Stored as a tensor of shape N x (2*k*k) x H x W; channel 2n is
// the y displacement of tap n, channel 2n+1 the x displacement. Taps enumerate
// the kernel grid row-major, so for k = 3 tap 4 is the center.
struct OffsetField {
  Tensor data;
  int kernel = 3;

  OffsetField() = default;
  OffsetField(std::size_t n, int k, std::size_t h, std::size_t w)
      : data(n, 2 * static_cast<std::size_t>(k) * k, h, w), kernel(k) {}

  int taps() const { return kernel * kernel; }

  double dy(std::size_t n, int tap, std::size_t y, std::size_t x) const {
    return data(n, 2 * static_cast<std::size_t>(tap), y, x);
  }
  double dx(std::size_t n, int tap, std::size_t y, std::size_t x) const {
    return data(n, 2 * static_cast<std::size_t>(tap) + 1, y, x);
  }
  double& dy(std::size_t n, int tap, std::size_t y, std::size_t x) {
    return data(n, 2 * static_cast<std::size_t>(tap), y, x);
  }
  double& dx(std::size_t n, int tap, std::size_t y, std::size_t x) {
    return data(n, 2 * static_cast<std::size_t>(tap) + 1, y, x);
  }

  void validate(int expected_kernel) const {
    require(kernel == expected_kernel,
            "offset field built for kernel " + std::to_string(kernel) +
                ", convolution uses " + std::to_string(expected_kernel));
    require(data.c() ==
                2 * static_cast<std::size_t>(kernel) * kernel,
            "offset field channel count must be 2*k*k");
  }
};

}  // namespace mgs
