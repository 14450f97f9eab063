#include "lithofield/optics.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <cmath>
#include <string>

#include "lithofield/fft.hpp"
#include "lithofield/kernel_dims.hpp"
#include "lithofield/parallel.hpp"

namespace lithofield {

namespace {

constexpr double kNegativeEigenTolerance = 1e-10;
constexpr double kSourceEdgeTolerance = 1e-9;

// Signed frequency-bin offset of native FFT index k on an axis of length len.
inline double native_bin_offset(std::size_t k, std::size_t len) {
  const std::size_t centered = (k + len / 2) % len;
  return static_cast<double>(centered) - static_cast<double>(len / 2);
}

ComplexGrid native_spectrum(const RealGrid& mask) {
  ComplexGrid spec(mask.rows(), mask.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) spec[i] = mask[i];
  fft2_inplace(spec.values(), spec.rows(), spec.cols(), FftDirection::forward);
  return spec;
}

// Accumulates sum_i |IFFT(native_i)|^2 where native_i is produced by fill(i, buf).
template <class Fill>
RealGrid coherent_sum(std::size_t terms, std::size_t rows, std::size_t cols, std::size_t threads,
                      Fill&& fill) {
  const std::size_t chunks = chunk_count(terms, threads);
  std::vector<RealGrid> partial(chunks, RealGrid(rows, cols));
  const double scale = 1.0 / static_cast<double>(rows * cols);
  const double scale2 = scale * scale;
  parallel_chunks(terms, threads, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
    std::vector<cplx> buf(rows * cols);
    RealGrid& acc = partial[chunk];
    for (std::size_t i = begin; i < end; ++i) {
      std::fill(buf.begin(), buf.end(), cplx{});
      fill(i, std::span<cplx>(buf));
      fft2_inplace(buf, rows, cols, FftDirection::inverse);
      for (std::size_t k = 0; k < buf.size(); ++k) acc[k] += std::norm(buf[k]) * scale2;
    }
  });
  RealGrid out = std::move(partial[0]);
  for (std::size_t c = 1; c < chunks; ++c)
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += partial[c][k];
  return out;
}

RealGrid socs_from_native(const KernelStack& kernels, const ComplexGrid& native,
                          std::size_t threads) {
  kernels.validate();
  const SpectrumWindow window(native.rows(), native.cols(), kernels.rows, kernels.cols);
  std::vector<cplx> support(window.support_size());
  window.gather(native.values(), support);
  const auto idx = window.native_index();
  return coherent_sum(kernels.order(), native.rows(), native.cols(), threads,
                      [&](std::size_t i, std::span<cplx> buf) {
                        const ComplexGrid& k = kernels.kernels[i];
                        for (std::size_t p = 0; p < idx.size(); ++p) buf[idx[p]] = k[p] * support[p];
                      });
}

}  // namespace

void ImagingConfig::validate() const {
  if (!(wavelength_nm > 0)) throw ConfigError("wavelength_nm must be > 0");
  if (!(numerical_aperture > 0) || numerical_aperture > 1.44) {
    throw ConfigError("numerical_aperture must lie in (0, 1.44]");
  }
  if (!(pixel_size_nm > 0)) throw ConfigError("pixel_size_nm must be > 0");
  switch (source.kind) {
    case SourceKind::point:
      break;
    case SourceKind::circular:
      if (!(source.sigma_outer > 0) || source.sigma_outer > 1) {
        throw ConfigError("circular source sigma must lie in (0, 1]");
      }
      break;
    case SourceKind::annular:
      if (!(source.sigma_inner >= 0) || !(source.sigma_inner < source.sigma_outer) ||
          source.sigma_outer > 1) {
        throw ConfigError("annular source needs 0 <= sigma_inner < sigma_outer <= 1");
      }
      break;
  }
  if (source.kind != SourceKind::point && source_grid < 2) {
    throw ConfigError("source_grid must be >= 2");
  }
}

PupilFunction build_pupil(const ImagingConfig& cfg) {
  cfg.validate();
  return PupilFunction(cfg.numerical_aperture / cfg.wavelength_nm);
}

SourceMap build_source(const ImagingConfig& cfg) {
  cfg.validate();
  SourceMap src;
  if (cfg.source.kind == SourceKind::point) {
    src.points.push_back({0.0, 0.0, 1.0});
    return src;
  }
  const double inner = cfg.source.kind == SourceKind::annular ? cfg.source.sigma_inner : 0.0;
  const double outer = cfg.source.sigma_outer;
  const double scale = cfg.numerical_aperture / cfg.wavelength_nm;
  const std::size_t g = cfg.source_grid;
  for (std::size_t i = 0; i < g; ++i) {
    const double sx = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(g - 1);
    for (std::size_t j = 0; j < g; ++j) {
      const double sy = -1.0 + 2.0 * static_cast<double>(j) / static_cast<double>(g - 1);
      const double rho = std::hypot(sx, sy);
      if (rho >= inner - kSourceEdgeTolerance && rho <= outer + kSourceEdgeTolerance) {
        src.points.push_back({sx * scale, sy * scale, 1.0});
      }
    }
  }
  if (src.points.empty()) {
    throw ConfigError("source grid of " + std::to_string(g) +
                      " samples places no points inside the source region");
  }
  const double w = 1.0 / static_cast<double>(src.points.size());
  for (auto& p : src.points) p.weight = w;
  return src;
}

namespace {

// A(s, p) = sqrt(w_s) H(f_s + f_p) over the n x m support; T = A^T conj(A).
Eigen::MatrixXcd source_pupil_matrix(const SourceMap& src, const PupilFunction& pupil,
                                     std::size_t n, std::size_t m, double freq_step) {
  if (n % 2 == 0 || m % 2 == 0) throw DimensionError("TCC support n, m must be odd");
  if (!(freq_step > 0)) throw DimensionError("TCC freq_step must be > 0");
  if (src.points.empty()) throw ConfigError("TCC needs a nonempty source");
  const std::size_t dim = n * m;
  const auto S = static_cast<Eigen::Index>(src.points.size());

  Eigen::MatrixXcd A(S, static_cast<Eigen::Index>(dim));
  for (Eigen::Index s = 0; s < S; ++s) {
    const auto& pt = src.points[static_cast<std::size_t>(s)];
    const double sw = std::sqrt(pt.weight);
    for (std::size_t a = 0; a < n; ++a) {
      const double f = (static_cast<double>(a) - static_cast<double>(n / 2)) * freq_step;
      for (std::size_t b = 0; b < m; ++b) {
        const double g = (static_cast<double>(b) - static_cast<double>(m / 2)) * freq_step;
        A(s, static_cast<Eigen::Index>(a * m + b)) = sw * pupil(pt.f + f, pt.g + g);
      }
    }
  }
  return A;
}

// Descending, clamped eigenpairs with the phase convention shared by both routes.
void store_eigenpair(TccSpectrum& out, Eigen::Index i, double alpha, Eigen::VectorXcd v) {
  out.eigenvalues(i) = alpha;
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  const cplx pivot = v(arg);
  if (std::abs(pivot) > 0) v *= std::conj(pivot) / std::abs(pivot);
  v(arg) = cplx{v(arg).real(), 0.0};
  out.eigenvectors.col(i) = v;
}

}  // namespace

TccMatrix assemble_tcc(const SourceMap& src, const PupilFunction& pupil, std::size_t n,
                       std::size_t m, double freq_step) {
  const Eigen::MatrixXcd A = source_pupil_matrix(src, pupil, n, m, freq_step);
  TccMatrix tcc{n, m, Eigen::MatrixXcd(A.transpose() * A.conjugate())};
  // Mirror the upper triangle so the matrix is exactly Hermitian.
  auto& T = tcc.entries;
  for (Eigen::Index p = 0; p < T.rows(); ++p) {
    T(p, p) = T(p, p).real();
    for (Eigen::Index q = p + 1; q < T.cols(); ++q) T(q, p) = std::conj(T(p, q));
  }
  return tcc;
}

TccSpectrum eigendecompose_tcc(const TccMatrix& tcc) {
  if (tcc.entries.rows() != static_cast<Eigen::Index>(tcc.dim()) ||
      tcc.entries.cols() != static_cast<Eigen::Index>(tcc.dim())) {
    throw DimensionError("TCC matrix shape does not match n*m");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(tcc.entries);
  if (solver.info() != Eigen::Success) throw NumericError("Hermitian eigensolver failed on TCC");

  const Eigen::Index d = tcc.entries.rows();
  TccSpectrum out;
  out.rows = tcc.rows;
  out.cols = tcc.cols;
  out.eigenvalues.resize(d);
  out.eigenvectors.resize(d, d);
  const double lmax = solver.eigenvalues()(d - 1);
  for (Eigen::Index i = 0; i < d; ++i) {
    const Eigen::Index src = d - 1 - i;  // ascending -> descending
    double alpha = solver.eigenvalues()(src);
    if (alpha < 0) {
      if (alpha < -kNegativeEigenTolerance * std::max(lmax, 0.0)) {
        throw NumericError("TCC has eigenvalue " + std::to_string(alpha) +
                           " below the PSD tolerance");
      }
      alpha = 0.0;
    }
    store_eigenpair(out, i, alpha, solver.eigenvectors().col(src));
  }
  return out;
}

TccSpectrum factor_tcc(const SourceMap& src, const PupilFunction& pupil, std::size_t n,
                       std::size_t m, double freq_step) {
  // T = B B^H with B = A^T, so the left singular vectors of B are the
  // eigenvectors of T and the squared singular values its eigenvalues.
  const Eigen::MatrixXcd B = source_pupil_matrix(src, pupil, n, m, freq_step).transpose();
  const Eigen::Index d = B.rows(), S = B.cols();
  Eigen::MatrixXcd U;
  Eigen::VectorXd sigma;
  if (d > S) {
    // Tall factor: B = Q R, then the small SVD R = U_R Sigma V^H gives U = Q U_R.
    const Eigen::HouseholderQR<Eigen::MatrixXcd> qr(B);
    const Eigen::MatrixXcd R = qr.matrixQR().topRows(S).triangularView<Eigen::Upper>();
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(R, Eigen::ComputeFullU);
    sigma = svd.singularValues();
    U = qr.householderQ() * (Eigen::MatrixXcd::Identity(d, S) * svd.matrixU());
  } else {
    const Eigen::JacobiSVD<Eigen::MatrixXcd, Eigen::ColPivHouseholderQRPreconditioner> svd(
        B, Eigen::ComputeThinU);
    sigma = svd.singularValues();
    U = svd.matrixU();
  }
  const Eigen::Index k = sigma.size();
  TccSpectrum out;
  out.rows = n;
  out.cols = m;
  out.eigenvalues.resize(k);
  out.eigenvectors.resize(d, k);
  for (Eigen::Index i = 0; i < k; ++i) store_eigenpair(out, i, sigma(i) * sigma(i), U.col(i));
  return out;
}

std::size_t TccSpectrum::rank_for_coverage(double fraction) const {
  const double total = eigenvalues.sum();
  if (total <= 0) return 1;
  double acc = 0;
  for (Eigen::Index i = 0; i < eigenvalues.size(); ++i) {
    acc += eigenvalues(i);
    if (acc >= fraction * total) return static_cast<std::size_t>(i + 1);
  }
  return static_cast<std::size_t>(eigenvalues.size());
}

KernelStack TccSpectrum::kernels(std::size_t r, const KernelMetadata& meta) const {
  const auto d = static_cast<std::size_t>(eigenvalues.size());
  if (r == 0 || r > d) {
    throw DimensionError("kernel order " + std::to_string(r) + " outside [1, " + std::to_string(d) +
                         "]");
  }
  KernelStack stack;
  stack.rows = rows;
  stack.cols = cols;
  stack.meta = meta;
  stack.meta.provenance = Provenance::oracle;
  stack.kernels.reserve(r);
  for (std::size_t i = 0; i < r; ++i) {
    const double w = std::sqrt(eigenvalues(static_cast<Eigen::Index>(i)));
    ComplexGrid k(rows, cols);
    for (std::size_t p = 0; p < rows * cols; ++p) {
      k[p] = w * eigenvectors(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i));
    }
    stack.kernels.push_back(std::move(k));
  }
  return stack;
}

KernelStack decompose_tcc(const TccMatrix& tcc, std::size_t r, const KernelMetadata& meta) {
  if (r == 0 || r > tcc.dim()) {
    throw DimensionError("decompose_tcc: r must lie in [1, " + std::to_string(tcc.dim()) + "]");
  }
  return eigendecompose_tcc(tcc).kernels(r, meta);
}

RealGrid socs_image(const KernelStack& kernels, const RealGrid& mask, std::size_t threads) {
  return socs_from_native(kernels, native_spectrum(mask), threads);
}

RealGrid socs_image_from_spectrum(const KernelStack& kernels, const ComplexGrid& mask_spectrum,
                                  std::size_t threads) {
  // Undo the centering to reach native layout.
  const std::size_t R = mask_spectrum.rows(), C = mask_spectrum.cols();
  ComplexGrid native(R, C);
  for (std::size_t r = 0; r < R; ++r)
    for (std::size_t c = 0; c < C; ++c)
      native((r + R - R / 2) % R, (c + C - C / 2) % C) = mask_spectrum(r, c);
  return socs_from_native(kernels, native, threads);
}

RealGrid abbe_image(const SourceMap& src, const PupilFunction& pupil, const RealGrid& mask,
                    double pixel_size_nm, std::size_t threads) {
  if (src.points.empty()) throw ConfigError("abbe_image: empty source");
  if (!(pixel_size_nm > 0)) throw ConfigError("abbe_image: pixel size must be > 0");
  const std::size_t R = mask.rows(), C = mask.cols();
  const ComplexGrid native = native_spectrum(mask);
  const double df_row = frequency_step(R, pixel_size_nm);
  const double df_col = frequency_step(C, pixel_size_nm);
  std::vector<double> fr(R), fc(C);
  for (std::size_t r = 0; r < R; ++r) fr[r] = native_bin_offset(r, R) * df_row;
  for (std::size_t c = 0; c < C; ++c) fc[c] = native_bin_offset(c, C) * df_col;

  return coherent_sum(src.points.size(), R, C, threads, [&](std::size_t s, std::span<cplx> buf) {
    const auto& pt = src.points[s];
    const double amp = std::sqrt(pt.weight);
    for (std::size_t r = 0; r < R; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        const cplx h = pupil(fr[r] + pt.f, fc[c] + pt.g);
        if (h != cplx{}) buf[r * C + c] = amp * h * native[r * C + c];
      }
  });
}

RealGrid resist_image(const RealGrid& aerial, double threshold) {
  RealGrid out(aerial.rows(), aerial.cols());
  for (std::size_t i = 0; i < aerial.size(); ++i) out[i] = aerial[i] >= threshold ? 1.0 : 0.0;
  return out;
}

OracleModel OracleModel::build(const ImagingConfig& cfg, std::size_t image_rows,
                               std::size_t image_cols) {
  cfg.validate();
  if (image_rows != image_cols) {
    throw DimensionError("oracle model requires square images (one frequency step per axis)");
  }
  OracleModel model;
  model.imaging = cfg;
  model.image_rows = image_rows;
  model.image_cols = image_cols;
  model.source = build_source(cfg);
  const KernelDims dims = kernel_dims(image_cols, image_rows, cfg.wavelength_nm,
                                      cfg.numerical_aperture, cfg.pixel_size_nm);
  if (dims.rows > image_rows || dims.cols > image_cols) {
    throw DimensionError("image too small for the pupil passband");
  }
  model.spectrum = factor_tcc(model.source, build_pupil(cfg), dims.rows, dims.cols,
                              frequency_step(image_cols, cfg.pixel_size_nm));
  return model;
}

}  // namespace lithofield
