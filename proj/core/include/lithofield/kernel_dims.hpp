#pragma once

#include <cstddef>

namespace lithofield {

struct KernelDims {
  std::size_t rows;  // n, along image height
  std::size_t cols;  // m, along image width

  friend bool operator==(const KernelDims&, const KernelDims&) = default;
};

/// Smallest odd support covering the passband of a diffraction-limited
/// projector: m = 2 * ceil(W * pixel * 2 NA / lambda) + 1, likewise n from H.
KernelDims kernel_dims(std::size_t width_px, std::size_t height_px, double wavelength_nm,
                       double numerical_aperture, double pixel_size_nm);

/// Nearest odd integer >= x (x >= 1).
std::size_t odd_at_least(std::size_t x);

}  // namespace lithofield
