#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lithofield/grid.hpp"
#include "lithofield/kernel_stack.hpp"

namespace lithofield {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

/// Normalized kernel-bin coordinates. Row k is bin (k / cols, k % cols) mapped
/// to (i / (rows - 1), j / (cols - 1)).
struct CoordGrid {
  std::size_t rows = 0;  // n
  std::size_t cols = 0;  // m
  Eigen::Matrix<double, Eigen::Dynamic, 2> coords;

  std::size_t size() const noexcept { return rows * cols; }
};

CoordGrid make_coord_grid(std::size_t n, std::size_t m);

/// Gaussian random Fourier features: B is l x 2 with N(0, sigma^2) entries.
struct RffEncoder {
  Eigen::Matrix<double, Eigen::Dynamic, 2> B;
  double sigma = 2.0;
  std::uint64_t seed = 0;

  static RffEncoder sample(std::size_t features, double sigma, std::uint64_t seed);
};

/// Axis-aligned sinusoidal encoding with L octaves per coordinate.
struct NerfEncoder {
  std::size_t octaves = 10;
};

/// [cos(2 pi B v), sin(2 pi B v)] * (1 + j); output (n*m) x 2l.
CMatrix rff_encode(const CoordGrid& coords, const RffEncoder& enc);

/// Per coordinate c: [sin(2^k pi c), cos(2^k pi c)]_{k<L} * (1 + j); output (n*m) x 4L.
CMatrix nerf_encode(const CoordGrid& coords, const NerfEncoder& enc);

/// Encoding-free baseline: the same Gaussian matrix without sinusoids,
/// (B v) * (1 + j); output (n*m) x l.
CMatrix gaussian_encode(const CoordGrid& coords, const RffEncoder& enc);

enum class EncodingKind { none, nerf, rff };

std::string to_string(EncodingKind k);
EncodingKind encoding_from_string(const std::string& s);

/// Serializable description of a positional encoder.
struct EncoderSpec {
  EncodingKind kind = EncodingKind::rff;
  std::size_t rff_features = 64;  // l
  double sigma = 2.0;
  std::uint64_t seed = 0;
  std::size_t nerf_octaves = 10;  // L

  /// Complex feature width fed to the first layer.
  std::size_t width() const;
  CMatrix encode(const CoordGrid& coords) const;

  friend bool operator==(const EncoderSpec&, const EncoderSpec&) = default;
};

inline cplx crelu(cplx z) noexcept {
  return {z.real() > 0 ? z.real() : 0.0, z.imag() > 0 ? z.imag() : 0.0};
}

struct ComplexLinear {
  CMatrix weight;  // out x in
  CVector bias;    // out

  std::size_t in_features() const noexcept { return static_cast<std::size_t>(weight.cols()); }
  std::size_t out_features() const noexcept { return static_cast<std::size_t>(weight.rows()); }

  friend bool operator==(const ComplexLinear& a, const ComplexLinear& b) {
    return a.weight == b.weight && a.bias == b.bias;
  }
};

/// Input CLinear, then (CLinear -> CReLU) hidden blocks, then an output
/// CLinear with no activation. widths = [d_in, h, ..., h, r].
struct CMlpParams {
  std::vector<ComplexLinear> layers;

  std::vector<std::size_t> widths() const;
  std::size_t input_width() const;
  std::size_t output_width() const;
  std::size_t parameter_count() const;  // complex scalars

  /// Throws DimensionError if adjacent layers do not chain.
  void validate() const;

  friend bool operator==(const CMlpParams&, const CMlpParams&) = default;
};

/// Architecture shorthand: widths = [d_in, h x (blocks + 1), r].
std::vector<std::size_t> mlp_widths(std::size_t input_width, std::size_t hidden_width,
                                    std::size_t hidden_blocks, std::size_t outputs);

/// Complex Glorot init: |w| ~ Rayleigh(1/sqrt(fan_in + fan_out)), phase
/// uniform; zero biases. `output_gain` rescales the final layer's weights.
CMlpParams init_params(const std::vector<std::size_t>& widths, std::uint64_t seed,
                       double output_gain = 1.0);

/// Evaluates the network on every feature row; returns (n*m) x r.
CMatrix cmlp_evaluate(const CMlpParams& params, const CMatrix& features);

/// Evaluates and reshapes column i into kernel i (n x m, row-major bins).
KernelStack cmlp_forward(const CMlpParams& params, const CMatrix& features, std::size_t n,
                         std::size_t m, const KernelMetadata& meta = {});

/// Reshapes an (n*m) x r output matrix into a learned kernel stack.
KernelStack kernels_from_output(const CMatrix& output, std::size_t n, std::size_t m,
                                const KernelMetadata& meta = {});

// "NMLP" checkpoint: magic, u32 version, u32 layer count, per layer (u32 out,
// u32 in), then per layer interleaved f64 (re, im) weights row-major followed by
// biases, then u32-length JSON trailer with the encoder spec.
struct Checkpoint {
  CMlpParams params;
  EncoderSpec encoder;
  std::size_t kernel_rows = 0;
  std::size_t kernel_cols = 0;
};

void write_nmlp(std::ostream& out, const Checkpoint& ckpt);
Checkpoint read_nmlp(std::istream& in);
void save_nmlp(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_nmlp(const std::filesystem::path& path);

}  // namespace lithofield
