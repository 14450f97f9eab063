#include "lithofield/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <string>
#include <tuple>

namespace lithofield {
namespace {

// FFTW planning is not thread-safe; execution with the new-array interface is.
class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t rows, std::size_t cols, FftDirection dir) {
    std::lock_guard lock(mutex_);
    auto key = std::make_tuple(rows, cols, dir);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    std::vector<cplx> scratch(rows * cols);
    auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
    fftw_plan plan = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), buf, buf,
                                      dir == FftDirection::forward ? FFTW_FORWARD : FFTW_BACKWARD,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(key, plan);
    return plan;
  }

  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

 private:
  std::mutex mutex_;
  std::map<std::tuple<std::size_t, std::size_t, FftDirection>, fftw_plan> plans_;
};

// out[(r + sr) % R][(c + sc) % C] = in[r][c]
ComplexGrid circular_shift(const ComplexGrid& in, std::size_t sr, std::size_t sc) {
  const std::size_t R = in.rows(), C = in.cols();
  ComplexGrid out(R, C);
  for (std::size_t r = 0; r < R; ++r) {
    const std::size_t rr = (r + sr) % R;
    for (std::size_t c = 0; c < C; ++c) out(rr, (c + sc) % C) = in(r, c);
  }
  return out;
}

}  // namespace

void fft2_inplace(std::span<cplx> data, std::size_t rows, std::size_t cols, FftDirection dir) {
  if (data.size() != rows * cols) throw DimensionError("fft2_inplace: buffer size mismatch");
  fftw_plan plan = PlanCache::instance().get(rows, cols, dir);
  auto* buf = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, buf, buf);
}

ComplexGrid fft2_centered(const ComplexGrid& g) {
  ComplexGrid work = g;
  fft2_inplace(work.values(), work.rows(), work.cols(), FftDirection::forward);
  return circular_shift(work, work.rows() / 2, work.cols() / 2);
}

ComplexGrid fft2_centered(const RealGrid& g) {
  ComplexGrid work(g.rows(), g.cols());
  for (std::size_t i = 0; i < g.size(); ++i) work[i] = g[i];
  fft2_inplace(work.values(), work.rows(), work.cols(), FftDirection::forward);
  return circular_shift(work, work.rows() / 2, work.cols() / 2);
}

ComplexGrid ifft2_centered(const ComplexGrid& g) {
  const std::size_t R = g.rows(), C = g.cols();
  ComplexGrid work = circular_shift(g, R - R / 2, C - C / 2);
  fft2_inplace(work.values(), R, C, FftDirection::inverse);
  const double scale = 1.0 / static_cast<double>(R * C);
  for (auto& v : work) v *= scale;
  return work;
}

ComplexGrid center_crop(const ComplexGrid& g, std::size_t n, std::size_t m) {
  if (n % 2 == 0 || m % 2 == 0) {
    throw DimensionError("center_crop: target dims must be odd, got " + std::to_string(n) + "x" +
                         std::to_string(m));
  }
  if (n > g.rows() || m > g.cols()) {
    throw DimensionError("center_crop: target exceeds source dims");
  }
  const std::size_t r0 = g.rows() / 2 - n / 2;
  const std::size_t c0 = g.cols() / 2 - m / 2;
  ComplexGrid out(n, m);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < m; ++c) out(r, c) = g(r0 + r, c0 + c);
  return out;
}

ComplexGrid center_embed(const ComplexGrid& g, std::size_t n, std::size_t m) {
  if (n < g.rows() || m < g.cols()) {
    throw DimensionError("center_embed: target smaller than source");
  }
  const std::size_t r0 = n / 2 - g.rows() / 2;
  const std::size_t c0 = m / 2 - g.cols() / 2;
  ComplexGrid out(n, m);
  for (std::size_t r = 0; r < g.rows(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) out(r0 + r, c0 + c) = g(r, c);
  return out;
}

RealGrid magnitude_sq(const ComplexGrid& g) {
  RealGrid out(g.rows(), g.cols());
  for (std::size_t i = 0; i < g.size(); ++i) out[i] = std::norm(g[i]);
  return out;
}

SpectrumWindow::SpectrumWindow(std::size_t rows, std::size_t cols, std::size_t n, std::size_t m)
    : rows_(rows), cols_(cols), n_(n), m_(m) {
  if (n % 2 == 0 || m % 2 == 0) throw DimensionError("spectral support dims must be odd");
  if (n > rows || m > cols) {
    throw DimensionError("spectral support " + std::to_string(n) + "x" + std::to_string(m) +
                         " exceeds grid " + std::to_string(rows) + "x" + std::to_string(cols));
  }
  index_.reserve(n * m);
  for (std::size_t a = 0; a < n; ++a) {
    const std::size_t r = (a + rows - n / 2) % rows;
    for (std::size_t b = 0; b < m; ++b) {
      const std::size_t c = (b + cols - m / 2) % cols;
      index_.push_back(r * cols + c);
    }
  }
}

void SpectrumWindow::gather(std::span<const cplx> native, std::span<cplx> support) const {
  if (native.size() != rows_ * cols_ || support.size() != index_.size()) {
    throw DimensionError("SpectrumWindow::gather: buffer size mismatch");
  }
  for (std::size_t k = 0; k < index_.size(); ++k) support[k] = native[index_[k]];
}

}  // namespace lithofield
