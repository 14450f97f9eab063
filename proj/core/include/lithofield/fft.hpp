#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "lithofield/grid.hpp"

namespace lithofield {

/// 2D DFT with the DC bin moved to (rows/2, cols/2). Forward is unnormalized.
ComplexGrid fft2_centered(const ComplexGrid& g);
ComplexGrid fft2_centered(const RealGrid& g);

/// Exact inverse of fft2_centered, carrying the 1/(rows*cols) factor.
ComplexGrid ifft2_centered(const ComplexGrid& g);

/// n x m window (both odd) whose center bin is the DC bin of g.
ComplexGrid center_crop(const ComplexGrid& g, std::size_t n, std::size_t m);

/// Zero-pads g to n x m keeping its center bin on the new DC bin.
ComplexGrid center_embed(const ComplexGrid& g, std::size_t n, std::size_t m);

RealGrid magnitude_sq(const ComplexGrid& g);

enum class FftDirection { forward, inverse };

/// Unnormalized, unshifted in-place 2D transform over a row-major buffer.
/// Safe to call concurrently on distinct buffers.
void fft2_inplace(std::span<cplx> data, std::size_t rows, std::size_t cols, FftDirection dir);

/// Maps the bins of a centered n x m spectral support onto native (unshifted)
/// FFT indices of a rows x cols grid. Lets hot loops skip explicit shifts and
/// zero-embedding copies.
class SpectrumWindow {
 public:
  SpectrumWindow(std::size_t rows, std::size_t cols, std::size_t n, std::size_t m);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t support_rows() const noexcept { return n_; }
  std::size_t support_cols() const noexcept { return m_; }
  std::size_t support_size() const noexcept { return index_.size(); }

  /// Native flat index of support bin k (row-major over n x m).
  std::span<const std::size_t> native_index() const noexcept { return index_; }

  /// Gathers the support bins out of a native-layout spectrum.
  void gather(std::span<const cplx> native, std::span<cplx> support) const;

 private:
  std::size_t rows_, cols_, n_, m_;
  std::vector<std::size_t> index_;
};

}  // namespace lithofield
