#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <vector>

#include "lithofield/grid.hpp"
#include "lithofield/kernel_stack.hpp"

namespace lithofield {

enum class SourceKind { point, circular, annular };

struct SourceShape {
  SourceKind kind = SourceKind::annular;
  double sigma_inner = 0.5;  // annular only
  double sigma_outer = 0.8;  // circular fill or annular outer radius

  static SourceShape point() { return {SourceKind::point, 0.0, 0.0}; }
  static SourceShape circular(double sigma) { return {SourceKind::circular, 0.0, sigma}; }
  static SourceShape annular(double inner, double outer) {
    return {SourceKind::annular, inner, outer};
  }
};

/// Scalar thin-mask projection settings. Lengths in nm.
struct ImagingConfig {
  double wavelength_nm = 193.0;
  double numerical_aperture = 1.35;
  double pixel_size_nm = 1.0;
  SourceShape source;
  std::size_t source_grid = 21;  // samples per axis across the unit sigma square

  /// Throws ConfigError on out-of-range values.
  void validate() const;

  KernelMetadata kernel_metadata(Provenance p = Provenance::oracle) const {
    return {wavelength_nm, numerical_aperture, pixel_size_nm, p};
  }
};

/// Ideal circular low-pass pupil: 1 inside |f| <= NA/lambda, 0 outside.
class PupilFunction {
 public:
  explicit PupilFunction(double cutoff_frequency) : cutoff_(cutoff_frequency) {}
  double cutoff_frequency() const noexcept { return cutoff_; }
  cplx operator()(double f, double g) const noexcept {
    return f * f + g * g <= cutoff_ * cutoff_ ? cplx{1.0, 0.0} : cplx{0.0, 0.0};
  }

 private:
  double cutoff_;
};

struct SourcePoint {
  double f;  // 1/nm
  double g;  // 1/nm
  double weight;
};

/// Discrete illumination; weights sum to 1.
struct SourceMap {
  std::vector<SourcePoint> points;
};

/// TCC restricted to an n x m centered frequency support; entry (p, q) pairs
/// flattened support bins.
struct TccMatrix {
  std::size_t rows = 0;  // n
  std::size_t cols = 0;  // m
  Eigen::MatrixXcd entries;

  std::size_t dim() const noexcept { return rows * cols; }
};

/// Full Hermitian eigendecomposition of a TCC, descending eigenvalues.
struct TccSpectrum {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Eigen::VectorXd eigenvalues;   // clamped at 0 for round-off negatives
  Eigen::MatrixXcd eigenvectors; // column i pairs with eigenvalues(i)

  /// Smallest r with sum_{i<r} alpha_i >= fraction * sum alpha.
  std::size_t rank_for_coverage(double fraction) const;

  /// Kernel stack of the leading r eigenpairs with sqrt(alpha) absorbed.
  KernelStack kernels(std::size_t r, const KernelMetadata& meta = {}) const;
};

PupilFunction build_pupil(const ImagingConfig& cfg);
SourceMap build_source(const ImagingConfig& cfg);

/// One DFT bin of a width_px-wide image, in 1/nm.
inline double frequency_step(std::size_t width_px, double pixel_size_nm) {
  return 1.0 / (static_cast<double>(width_px) * pixel_size_nm);
}

TccMatrix assemble_tcc(const SourceMap& src, const PupilFunction& pupil, std::size_t n,
                       std::size_t m, double freq_step);

TccSpectrum eigendecompose_tcc(const TccMatrix& tcc);

/// Same spectrum as eigendecompose_tcc(assemble_tcc(...)) without forming the
/// n*m x n*m matrix: thin SVD of the source-pupil factor. Returns
/// min(n*m, source points) eigenpairs; the rest of the spectrum is zero.
TccSpectrum factor_tcc(const SourceMap& src, const PupilFunction& pupil, std::size_t n,
                       std::size_t m, double freq_step);

/// Leading r eigen-kernels of tcc. Throws DimensionError if r > dim.
KernelStack decompose_tcc(const TccMatrix& tcc, std::size_t r, const KernelMetadata& meta = {});

/// Sum of coherent systems: I = sum_i |IFFT(embed(K_i * crop(FFT(M))))|^2.
/// Per-kernel terms are split across threads; partials are reduced in chunk order.
RealGrid socs_image(const KernelStack& kernels, const RealGrid& mask, std::size_t threads = 1);

/// Same as socs_image with a precomputed centered mask spectrum.
RealGrid socs_image_from_spectrum(const KernelStack& kernels, const ComplexGrid& mask_spectrum,
                                  std::size_t threads = 1);

/// Abbe source-point summation: I = sum_s w_s |IFFT(H(f + f_s) * FFT(M))|^2.
RealGrid abbe_image(const SourceMap& src, const PupilFunction& pupil, const RealGrid& mask,
                    double pixel_size_nm, std::size_t threads = 1);

/// 1 where aerial >= threshold, else 0.
RealGrid resist_image(const RealGrid& aerial, double threshold);

inline constexpr double kDefaultResistThreshold = 0.225;

/// Everything needed to render ground truth for one image size.
struct OracleModel {
  ImagingConfig imaging;
  std::size_t image_rows = 0;
  std::size_t image_cols = 0;
  SourceMap source;
  TccSpectrum spectrum;

  static OracleModel build(const ImagingConfig& cfg, std::size_t image_rows,
                           std::size_t image_cols);
};

}  // namespace lithofield
