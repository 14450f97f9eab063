#include "lithofield/kernel_stack.hpp"

#include <fstream>
#include <nlohmann/json.hpp>

#include "lithofield/binary_io.hpp"

namespace lithofield {

namespace {
constexpr std::uint32_t kNkrnVersion = 1;
}

std::string to_string(Provenance p) { return p == Provenance::oracle ? "oracle" : "learned"; }

Provenance provenance_from_string(const std::string& s) {
  if (s == "oracle") return Provenance::oracle;
  if (s == "learned") return Provenance::learned;
  throw FormatError("unknown kernel provenance '" + s + "'");
}

void KernelStack::validate() const {
  if (kernels.empty()) throw DimensionError("kernel stack order must be >= 1");
  if (rows % 2 == 0 || cols % 2 == 0) throw DimensionError("kernel dims must be odd");
  for (const auto& k : kernels) {
    if (k.rows() != rows || k.cols() != cols) {
      throw DimensionError("kernel shape does not match stack dims");
    }
  }
}

KernelStack KernelStack::truncated(std::size_t r) const {
  if (r == 0 || r > kernels.size()) {
    throw DimensionError("truncation order " + std::to_string(r) + " outside [1, " +
                         std::to_string(kernels.size()) + "]");
  }
  KernelStack out{rows, cols, {kernels.begin(), kernels.begin() + static_cast<long>(r)}, meta};
  return out;
}

void write_nkrn(std::ostream& out, const KernelStack& stack) {
  stack.validate();
  out.write("NKRN", 4);
  binary::write_u32(out, kNkrnVersion);
  binary::write_u32(out, static_cast<std::uint32_t>(stack.order()));
  binary::write_u32(out, static_cast<std::uint32_t>(stack.rows));
  binary::write_u32(out, static_cast<std::uint32_t>(stack.cols));
  for (const auto& k : stack.kernels) {
    for (const cplx& v : k) {
      binary::write_f64(out, v.real());
      binary::write_f64(out, v.imag());
    }
  }
  nlohmann::json trailer = {{"wavelength_nm", stack.meta.wavelength_nm},
                            {"numerical_aperture", stack.meta.numerical_aperture},
                            {"pixel_size_nm", stack.meta.pixel_size_nm},
                            {"provenance", to_string(stack.meta.provenance)}};
  binary::write_trailer(out, trailer.dump());
  if (!out) throw DataError("failed writing NKRN stream");
}

KernelStack read_nkrn(std::istream& in) {
  binary::expect_magic(in, "NKRN");
  const auto version = binary::read_u32(in, "NKRN version");
  if (version != kNkrnVersion) {
    throw FormatError("unsupported NKRN version " + std::to_string(version));
  }
  const auto r = binary::read_u32(in, "NKRN order");
  const auto n = binary::read_u32(in, "NKRN rows");
  const auto m = binary::read_u32(in, "NKRN cols");
  if (r == 0 || n == 0 || m == 0 || n % 2 == 0 || m % 2 == 0) {
    throw FormatError("invalid NKRN header dims");
  }
  KernelStack stack;
  stack.rows = n;
  stack.cols = m;
  stack.kernels.reserve(r);
  for (std::uint32_t i = 0; i < r; ++i) {
    ComplexGrid k(n, m);
    for (auto& v : k) {
      const double re = binary::read_f64(in, "NKRN kernel data");
      const double im = binary::read_f64(in, "NKRN kernel data");
      v = {re, im};
    }
    stack.kernels.push_back(std::move(k));
  }
  try {
    const auto j = nlohmann::json::parse(binary::read_trailer(in));
    stack.meta.wavelength_nm = j.at("wavelength_nm").get<double>();
    stack.meta.numerical_aperture = j.at("numerical_aperture").get<double>();
    stack.meta.pixel_size_nm = j.at("pixel_size_nm").get<double>();
    stack.meta.provenance = provenance_from_string(j.at("provenance").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad NKRN trailer: ") + e.what());
  }
  return stack;
}

void save_nkrn(const std::filesystem::path& path, const KernelStack& stack) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_nkrn(out, stack);
}

KernelStack load_nkrn(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_nkrn(in);
}

}  // namespace lithofield
