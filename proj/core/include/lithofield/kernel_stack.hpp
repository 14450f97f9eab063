#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lithofield/grid.hpp"

namespace lithofield {

enum class Provenance { oracle, learned };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct KernelMetadata {
  double wavelength_nm = 193.0;
  double numerical_aperture = 1.35;
  double pixel_size_nm = 1.0;
  Provenance provenance = Provenance::oracle;

  friend bool operator==(const KernelMetadata&, const KernelMetadata&) = default;
};

/// r complex kernels of odd shape n x m, eigenvalue weight absorbed, ordered by
/// decreasing energy for oracle stacks.
struct KernelStack {
  std::size_t rows = 1;  // n
  std::size_t cols = 1;  // m
  std::vector<ComplexGrid> kernels;
  KernelMetadata meta;

  std::size_t order() const noexcept { return kernels.size(); }

  /// Throws DimensionError unless r >= 1, n and m odd, and every kernel is n x m.
  void validate() const;

  /// Keeps the first r kernels.
  KernelStack truncated(std::size_t r) const;

  friend bool operator==(const KernelStack&, const KernelStack&) = default;
};

// "NKRN" binary format: magic, u32 version, u32 r, u32 n, u32 m, r*n*m (re, im)
// f64 pairs, u32 trailer length, UTF-8 JSON trailer. All little-endian.
void write_nkrn(std::ostream& out, const KernelStack& stack);
KernelStack read_nkrn(std::istream& in);
void save_nkrn(const std::filesystem::path& path, const KernelStack& stack);
KernelStack load_nkrn(const std::filesystem::path& path);

}  // namespace lithofield
