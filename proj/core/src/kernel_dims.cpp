#include "lithofield/kernel_dims.hpp"

#include <cmath>

#include "lithofield/error.hpp"

namespace lithofield {

namespace {
std::size_t half_extent(std::size_t px, double pixel_nm, double na, double lambda) {
  // Exact bin boundaries land on an integer; guard against it rounding up by one ulp.
  const double bins = static_cast<double>(px) * pixel_nm * 2.0 * na / lambda;
  const double nearest = std::round(bins);
  const double c = std::abs(bins - nearest) < 1e-9 * std::max(1.0, bins) ? nearest : std::ceil(bins);
  return static_cast<std::size_t>(c);
}
}  // namespace

KernelDims kernel_dims(std::size_t width_px, std::size_t height_px, double wavelength_nm,
                       double numerical_aperture, double pixel_size_nm) {
  if (width_px == 0 || height_px == 0 || !(wavelength_nm > 0) || !(numerical_aperture > 0) ||
      !(pixel_size_nm > 0)) {
    throw ConfigError("kernel_dims: all inputs must be positive");
  }
  const std::size_t m = 2 * half_extent(width_px, pixel_size_nm, numerical_aperture, wavelength_nm) + 1;
  const std::size_t n = 2 * half_extent(height_px, pixel_size_nm, numerical_aperture, wavelength_nm) + 1;
  return {n, m};
}

std::size_t odd_at_least(std::size_t x) { return x % 2 == 1 ? x : x + 1; }

}  // namespace lithofield
