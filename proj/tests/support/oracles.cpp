#include "oracles.hpp"

#include <cmath>
#include <numbers>

namespace lithofield::testing {

namespace {

// 1D centered DFT along one axis of a row-major buffer.
void dft_axis(std::vector<cplx>& data, std::size_t rows, std::size_t cols, bool along_rows,
              bool inverse) {
  const std::size_t len = along_rows ? cols : rows;
  const std::size_t lines = along_rows ? rows : cols;
  const double sign = inverse ? 1.0 : -1.0;
  const auto c = static_cast<std::ptrdiff_t>(len / 2);
  std::vector<cplx> in(len), out(len);
  for (std::size_t line = 0; line < lines; ++line) {
    for (std::size_t k = 0; k < len; ++k) in[k] = along_rows ? data[line * cols + k] : data[k * cols + line];
    for (std::size_t u = 0; u < len; ++u) {
      // Output bin u holds frequency u - c; input samples keep native order.
      cplx acc{};
      for (std::size_t x = 0; x < len; ++x) {
        const double phase = sign * 2.0 * std::numbers::pi *
                             static_cast<double>((static_cast<std::ptrdiff_t>(u) - c) * static_cast<std::ptrdiff_t>(x)) /
                             static_cast<double>(len);
        acc += in[x] * cplx(std::cos(phase), std::sin(phase));
      }
      out[u] = acc;
    }
    for (std::size_t k = 0; k < len; ++k) {
      (along_rows ? data[line * cols + k] : data[k * cols + line]) = out[k];
    }
  }
}

}  // namespace

ComplexGrid naive_dft2_centered(const ComplexGrid& g, bool inverse) {
  const std::size_t R = g.rows(), C = g.cols();
  if (!inverse) {
    // Forward: spatial index x (unshifted) to centered frequency bins.
    std::vector<cplx> d(g.begin(), g.end());
    dft_axis(d, R, C, true, false);
    dft_axis(d, R, C, false, false);
    return ComplexGrid(R, C, std::move(d));
  }
  // Inverse: centered frequency bin u carries frequency u - c.
  std::vector<cplx> out(R * C);
  const auto cr = static_cast<std::ptrdiff_t>(R / 2), cc = static_cast<std::ptrdiff_t>(C / 2);
  for (std::size_t x = 0; x < R; ++x) {
    for (std::size_t y = 0; y < C; ++y) {
      cplx acc{};
      for (std::size_t u = 0; u < R; ++u) {
        for (std::size_t v = 0; v < C; ++v) {
          const double phase = 2.0 * std::numbers::pi *
                               (static_cast<double>((static_cast<std::ptrdiff_t>(u) - cr) * static_cast<std::ptrdiff_t>(x)) / static_cast<double>(R) +
                                static_cast<double>((static_cast<std::ptrdiff_t>(v) - cc) * static_cast<std::ptrdiff_t>(y)) / static_cast<double>(C));
          acc += g(u, v) * cplx(std::cos(phase), std::sin(phase));
        }
      }
      out[x * C + y] = acc / static_cast<double>(R * C);
    }
  }
  return ComplexGrid(R, C, std::move(out));
}

std::vector<std::vector<cplx>> brute_force_tcc(const std::vector<SourcePoint>& source,
                                               double cutoff, std::size_t n, std::size_t m,
                                               double freq_step) {
  const std::size_t d = n * m;
  auto pupil = [&](double f, double g) {
    return f * f + g * g <= cutoff * cutoff ? cplx(1.0, 0.0) : cplx(0.0, 0.0);
  };
  auto freq = [&](std::size_t p, bool row) {
    const std::size_t a = p / m, b = p % m;
    return row ? (static_cast<double>(a) - static_cast<double>(n / 2)) * freq_step
               : (static_cast<double>(b) - static_cast<double>(m / 2)) * freq_step;
  };
  std::vector<std::vector<cplx>> T(d, std::vector<cplx>(d));
  for (std::size_t p = 0; p < d; ++p) {
    for (std::size_t q = 0; q < d; ++q) {
      cplx acc{};
      for (const auto& s : source) {
        const cplx hp = pupil(s.f + freq(p, true), s.g + freq(p, false));
        const cplx hq = pupil(s.f + freq(q, true), s.g + freq(q, false));
        acc += s.weight * hp * std::conj(hq);
      }
      T[p][q] = acc;
    }
  }
  return T;
}

std::size_t count_annular_points(std::size_t grid, double inner, double outer) {
  // Sample i sits at -1 + 2 i / (g - 1) = (2 i - (g - 1)) / (g - 1).
  const auto den = static_cast<long long>(grid - 1);
  std::size_t count = 0;
  for (std::size_t i = 0; i < grid; ++i) {
    for (std::size_t j = 0; j < grid; ++j) {
      const long long x = 2 * static_cast<long long>(i) - den;
      const long long y = 2 * static_cast<long long>(j) - den;
      const double rho2 = static_cast<double>(x * x + y * y) / static_cast<double>(den * den);
      if (rho2 + 1e-12 >= inner * inner && rho2 - 1e-12 <= outer * outer) ++count;
    }
  }
  return count;
}

RealGrid straight_line_forward(const CMlpParams& params, const CMatrix& features,
                               const RealGrid& mask, std::size_t n, std::size_t m) {
  const std::size_t P = static_cast<std::size_t>(features.rows());
  const std::size_t L = params.layers.size();
  // Network, one coordinate at a time.
  std::vector<std::vector<cplx>> out(P);
  for (std::size_t p = 0; p < P; ++p) {
    std::vector<cplx> x(static_cast<std::size_t>(features.cols()));
    for (std::size_t k = 0; k < x.size(); ++k) x[k] = features(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k));
    for (std::size_t l = 0; l < L; ++l) {
      const auto& W = params.layers[l].weight;
      std::vector<cplx> z(static_cast<std::size_t>(W.rows()));
      for (std::size_t o = 0; o < z.size(); ++o) {
        cplx acc = params.layers[l].bias(static_cast<Eigen::Index>(o));
        for (std::size_t i = 0; i < x.size(); ++i) acc += W(static_cast<Eigen::Index>(o), static_cast<Eigen::Index>(i)) * x[i];
        const bool act = l > 0 && l + 1 < L;
        z[o] = act ? cplx(std::max(acc.real(), 0.0), std::max(acc.imag(), 0.0)) : acc;
      }
      x = std::move(z);
    }
    out[p] = std::move(x);
  }
  const std::size_t R = mask.rows(), C = mask.cols();
  ComplexGrid mc(R, C);
  for (std::size_t i = 0; i < mask.size(); ++i) mc[i] = mask[i];
  const ComplexGrid spec = naive_dft2_centered(mc);
  const std::size_t r = params.layers.back().out_features();
  RealGrid image(R, C);
  for (std::size_t k = 0; k < r; ++k) {
    ComplexGrid field(R, C);
    for (std::size_t a = 0; a < n; ++a) {
      for (std::size_t b = 0; b < m; ++b) {
        const std::size_t u = R / 2 - n / 2 + a, v = C / 2 - m / 2 + b;
        field(u, v) = out[a * m + b][k] * spec(u, v);
      }
    }
    const ComplexGrid e = naive_dft2_centered(field, true);
    for (std::size_t i = 0; i < image.size(); ++i) image[i] += std::norm(e[i]);
  }
  return image;
}

RealGrid coherent_image(const RealGrid& mask, double cutoff, double pixel_size_nm) {
  const std::size_t R = mask.rows(), C = mask.cols();
  ComplexGrid mc(R, C);
  for (std::size_t i = 0; i < mask.size(); ++i) mc[i] = mask[i];
  ComplexGrid spec = naive_dft2_centered(mc);
  for (std::size_t u = 0; u < R; ++u) {
    for (std::size_t v = 0; v < C; ++v) {
      const double f = (static_cast<double>(u) - static_cast<double>(R / 2)) / (static_cast<double>(R) * pixel_size_nm);
      const double g = (static_cast<double>(v) - static_cast<double>(C / 2)) / (static_cast<double>(C) * pixel_size_nm);
      if (f * f + g * g > cutoff * cutoff) spec(u, v) = 0;
    }
  }
  const ComplexGrid e = naive_dft2_centered(spec, true);
  RealGrid out(R, C);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::norm(e[i]);
  return out;
}

}  // namespace lithofield::testing
