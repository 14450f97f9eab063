#include "lithofield/neural_field.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <random>

#include "lithofield/binary_io.hpp"

namespace lithofield {

namespace {
constexpr std::uint32_t kNmlpVersion = 1;
const cplx kLift{1.0, 1.0};
}  // namespace

CoordGrid make_coord_grid(std::size_t n, std::size_t m) {
  if (n < 2 || m < 2) throw DimensionError("coordinate grid needs n, m >= 2");
  CoordGrid g;
  g.rows = n;
  g.cols = m;
  g.coords.resize(static_cast<Eigen::Index>(n * m), 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) {
      const auto k = static_cast<Eigen::Index>(i * m + j);
      g.coords(k, 0) = static_cast<double>(i) / static_cast<double>(n - 1);
      g.coords(k, 1) = static_cast<double>(j) / static_cast<double>(m - 1);
    }
  return g;
}

RffEncoder RffEncoder::sample(std::size_t features, double sigma, std::uint64_t seed) {
  if (features == 0) throw ConfigError("RFF feature count must be >= 1");
  if (!(sigma > 0)) throw ConfigError("RFF sigma must be > 0");
  RffEncoder enc;
  enc.sigma = sigma;
  enc.seed = seed;
  enc.B.resize(static_cast<Eigen::Index>(features), 2);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (Eigen::Index i = 0; i < enc.B.rows(); ++i) {
    enc.B(i, 0) = normal(rng);
    enc.B(i, 1) = normal(rng);
  }
  return enc;
}

CMatrix rff_encode(const CoordGrid& coords, const RffEncoder& enc) {
  if (enc.B.rows() == 0) throw DimensionError("RFF encoder has no frequencies");
  const Eigen::Index P = coords.coords.rows(), l = enc.B.rows();
  const Eigen::MatrixXd phase = 2.0 * std::numbers::pi * coords.coords * enc.B.transpose();
  CMatrix out(P, 2 * l);
  for (Eigen::Index p = 0; p < P; ++p)
    for (Eigen::Index k = 0; k < l; ++k) {
      out(p, k) = std::cos(phase(p, k)) * kLift;
      out(p, l + k) = std::sin(phase(p, k)) * kLift;
    }
  return out;
}

CMatrix nerf_encode(const CoordGrid& coords, const NerfEncoder& enc) {
  if (enc.octaves == 0) throw ConfigError("NeRF encoding needs at least one octave");
  const Eigen::Index P = coords.coords.rows();
  const auto L = static_cast<Eigen::Index>(enc.octaves);
  CMatrix out(P, 4 * L);
  for (Eigen::Index p = 0; p < P; ++p)
    for (Eigen::Index axis = 0; axis < 2; ++axis) {
      const double c = coords.coords(p, axis);
      for (Eigen::Index k = 0; k < L; ++k) {
        const double arg = std::ldexp(1.0, static_cast<int>(k)) * std::numbers::pi * c;
        out(p, axis * 2 * L + 2 * k) = std::sin(arg) * kLift;
        out(p, axis * 2 * L + 2 * k + 1) = std::cos(arg) * kLift;
      }
    }
  return out;
}

CMatrix gaussian_encode(const CoordGrid& coords, const RffEncoder& enc) {
  return (coords.coords * enc.B.transpose()).cast<cplx>() * kLift;
}

std::string to_string(EncodingKind k) {
  switch (k) {
    case EncodingKind::none: return "none";
    case EncodingKind::nerf: return "nerf";
    case EncodingKind::rff: return "rff";
  }
  return "unknown";
}

EncodingKind encoding_from_string(const std::string& s) {
  if (s == "none") return EncodingKind::none;
  if (s == "nerf") return EncodingKind::nerf;
  if (s == "rff") return EncodingKind::rff;
  throw ConfigError("unknown positional encoding '" + s + "' (expected none, nerf or rff)");
}

std::size_t EncoderSpec::width() const {
  switch (kind) {
    case EncodingKind::none: return rff_features;
    case EncodingKind::nerf: return 4 * nerf_octaves;
    case EncodingKind::rff: return 2 * rff_features;
  }
  return 0;
}

CMatrix EncoderSpec::encode(const CoordGrid& coords) const {
  switch (kind) {
    case EncodingKind::none: return gaussian_encode(coords, RffEncoder::sample(rff_features, sigma, seed));
    case EncodingKind::nerf: return nerf_encode(coords, NerfEncoder{nerf_octaves});
    case EncodingKind::rff: return rff_encode(coords, RffEncoder::sample(rff_features, sigma, seed));
  }
  throw ConfigError("unknown encoder kind");
}

std::vector<std::size_t> CMlpParams::widths() const {
  std::vector<std::size_t> w;
  if (layers.empty()) return w;
  w.push_back(layers.front().in_features());
  for (const auto& l : layers) w.push_back(l.out_features());
  return w;
}

std::size_t CMlpParams::input_width() const {
  if (layers.empty()) throw DimensionError("empty network");
  return layers.front().in_features();
}

std::size_t CMlpParams::output_width() const {
  if (layers.empty()) throw DimensionError("empty network");
  return layers.back().out_features();
}

std::size_t CMlpParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void CMlpParams::validate() const {
  if (layers.empty()) throw DimensionError("network needs at least one layer");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    if (l.weight.rows() == 0 || l.weight.cols() == 0 || l.bias.size() != l.weight.rows()) {
      throw DimensionError("layer " + std::to_string(i) + " has inconsistent shapes");
    }
    if (i > 0 && layers[i - 1].out_features() != l.in_features()) {
      throw DimensionError("layer " + std::to_string(i) + " input width " +
                           std::to_string(l.in_features()) + " != previous output width " +
                           std::to_string(layers[i - 1].out_features()));
    }
  }
}

std::vector<std::size_t> mlp_widths(std::size_t input_width, std::size_t hidden_width,
                                    std::size_t hidden_blocks, std::size_t outputs) {
  std::vector<std::size_t> w{input_width};
  for (std::size_t i = 0; i <= hidden_blocks; ++i) w.push_back(hidden_width);
  w.push_back(outputs);
  return w;
}

CMlpParams init_params(const std::vector<std::size_t>& widths, std::uint64_t seed,
                       double output_gain) {
  if (widths.size() < 2) throw DimensionError("need at least input and output widths");
  for (auto w : widths)
    if (w == 0) throw DimensionError("layer widths must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  CMlpParams params;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    const auto in = static_cast<Eigen::Index>(widths[i]);
    const auto out = static_cast<Eigen::Index>(widths[i + 1]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(in + out));
    const double gain = i + 2 == widths.size() ? output_gain : 1.0;
    ComplexLinear layer{CMatrix(out, in), CVector::Zero(out)};
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) {
        const double mag = scale * std::sqrt(-2.0 * std::log1p(-unit(rng)));
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        layer.weight(r, c) = gain * std::polar(mag, phase);
      }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

CMatrix cmlp_evaluate(const CMlpParams& params, const CMatrix& features) {
  params.validate();
  if (static_cast<std::size_t>(features.cols()) != params.input_width()) {
    throw DimensionError("feature width " + std::to_string(features.cols()) +
                         " != network input width " + std::to_string(params.input_width()));
  }
  CMatrix x = features;
  const std::size_t L = params.layers.size();
  for (std::size_t i = 0; i < L; ++i) {
    const auto& layer = params.layers[i];
    CMatrix z = x * layer.weight.transpose();
    z.rowwise() += layer.bias.transpose();
    if (i > 0 && i + 1 < L) z = z.unaryExpr([](cplx v) { return crelu(v); });
    x = std::move(z);
  }
  return x;
}

KernelStack kernels_from_output(const CMatrix& output, std::size_t n, std::size_t m,
                                const KernelMetadata& meta) {
  if (static_cast<std::size_t>(output.rows()) != n * m) {
    throw DimensionError("network output rows " + std::to_string(output.rows()) + " != n*m");
  }
  KernelStack stack;
  stack.rows = n;
  stack.cols = m;
  stack.meta = meta;
  stack.meta.provenance = Provenance::learned;
  for (Eigen::Index i = 0; i < output.cols(); ++i) {
    ComplexGrid k(n, m);
    for (std::size_t p = 0; p < n * m; ++p) k[p] = output(static_cast<Eigen::Index>(p), i);
    stack.kernels.push_back(std::move(k));
  }
  return stack;
}

KernelStack cmlp_forward(const CMlpParams& params, const CMatrix& features, std::size_t n,
                         std::size_t m, const KernelMetadata& meta) {
  return kernels_from_output(cmlp_evaluate(params, features), n, m, meta);
}

void write_nmlp(std::ostream& out, const Checkpoint& ckpt) {
  ckpt.params.validate();
  out.write("NMLP", 4);
  binary::write_u32(out, kNmlpVersion);
  binary::write_u32(out, static_cast<std::uint32_t>(ckpt.params.layers.size()));
  for (const auto& l : ckpt.params.layers) {
    binary::write_u32(out, static_cast<std::uint32_t>(l.out_features()));
    binary::write_u32(out, static_cast<std::uint32_t>(l.in_features()));
  }
  for (const auto& l : ckpt.params.layers) {
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        binary::write_f64(out, l.weight(r, c).real());
        binary::write_f64(out, l.weight(r, c).imag());
      }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      binary::write_f64(out, l.bias(r).real());
      binary::write_f64(out, l.bias(r).imag());
    }
  }
  const auto& e = ckpt.encoder;
  nlohmann::json trailer = {{"encoding", to_string(e.kind)},
                            {"rff_features", e.rff_features},
                            {"sigma", e.sigma},
                            {"seed", e.seed},
                            {"nerf_octaves", e.nerf_octaves},
                            {"kernel_rows", ckpt.kernel_rows},
                            {"kernel_cols", ckpt.kernel_cols}};
  binary::write_trailer(out, trailer.dump());
  if (!out) throw DataError("failed writing NMLP stream");
}

Checkpoint read_nmlp(std::istream& in) {
  binary::expect_magic(in, "NMLP");
  const auto version = binary::read_u32(in, "NMLP version");
  if (version != kNmlpVersion) throw FormatError("unsupported NMLP version " + std::to_string(version));
  const auto count = binary::read_u32(in, "NMLP layer count");
  if (count == 0 || count > 1024) throw FormatError("implausible NMLP layer count");
  std::vector<std::pair<std::uint32_t, std::uint32_t>> dims(count);
  for (auto& [o, i] : dims) {
    o = binary::read_u32(in, "NMLP layer dims");
    i = binary::read_u32(in, "NMLP layer dims");
    if (o == 0 || i == 0) throw FormatError("zero NMLP layer dimension");
  }
  Checkpoint ckpt;
  for (const auto& [o, i] : dims) {
    ComplexLinear l{CMatrix(o, i), CVector(o)};
    for (Eigen::Index r = 0; r < l.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weight.cols(); ++c) {
        const double re = binary::read_f64(in, "NMLP weights");
        const double im = binary::read_f64(in, "NMLP weights");
        l.weight(r, c) = {re, im};
      }
    for (Eigen::Index r = 0; r < l.bias.size(); ++r) {
      const double re = binary::read_f64(in, "NMLP biases");
      const double im = binary::read_f64(in, "NMLP biases");
      l.bias(r) = {re, im};
    }
    ckpt.params.layers.push_back(std::move(l));
  }
  try {
    ckpt.params.validate();
  } catch (const DimensionError& e) {
    throw FormatError(std::string("NMLP layers do not chain: ") + e.what());
  }
  try {
    const auto j = nlohmann::json::parse(binary::read_trailer(in));
    ckpt.encoder.kind = encoding_from_string(j.at("encoding").get<std::string>());
    ckpt.encoder.rff_features = j.at("rff_features").get<std::size_t>();
    ckpt.encoder.sigma = j.at("sigma").get<double>();
    ckpt.encoder.seed = j.at("seed").get<std::uint64_t>();
    ckpt.encoder.nerf_octaves = j.at("nerf_octaves").get<std::size_t>();
    ckpt.kernel_rows = j.at("kernel_rows").get<std::size_t>();
    ckpt.kernel_cols = j.at("kernel_cols").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad NMLP trailer: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("bad NMLP trailer: ") + e.what());
  }
  return ckpt;
}

void save_nmlp(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_nmlp(out, ckpt);
}

Checkpoint load_nmlp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_nmlp(in);
}

}  // namespace lithofield
