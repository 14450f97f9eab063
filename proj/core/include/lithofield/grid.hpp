#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lithofield/error.hpp"

namespace lithofield {

using cplx = std::complex<double>;

/// Dense row-major 2D array. Both dimensions are at least 1.
template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() : Grid(1, 1) {}

  Grid(std::size_t rows, std::size_t cols, T fill = T{}) : rows_(rows), cols_(cols) {
    check_dims(rows, cols);
    data_.assign(rows * cols, fill);
  }

  Grid(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    check_dims(rows, cols);
    if (data_.size() != rows * cols) {
      throw DimensionError("grid data length " + std::to_string(data_.size()) + " != " +
                           std::to_string(rows) + "x" + std::to_string(cols));
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }

  T& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
  T& operator[](std::size_t i) noexcept { return data_[i]; }
  const T& operator[](std::size_t i) const noexcept { return data_[i]; }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  T* data() noexcept { return data_.data(); }
  const T* data() const noexcept { return data_.data(); }

  auto begin() noexcept { return data_.begin(); }
  auto end() noexcept { return data_.end(); }
  auto begin() const noexcept { return data_.begin(); }
  auto end() const noexcept { return data_.end(); }

  bool same_shape(const Grid& other) const noexcept {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  static void check_dims(std::size_t rows, std::size_t cols) {
    if (rows == 0 || cols == 0) throw DimensionError("grid dimensions must be >= 1");
  }

  std::size_t rows_;
  std::size_t cols_;
  std::vector<T> data_;
};

using ComplexGrid = Grid<cplx>;
using RealGrid = Grid<double>;

template <class A, class B>
void require_same_shape(const Grid<A>& a, const Grid<B>& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" +
                         std::to_string(b.cols()));
  }
}

}  // namespace lithofield
