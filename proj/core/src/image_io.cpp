#include "lithofield/image_io.hpp"

#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace lithofield {

namespace {

// Reads the next whitespace-delimited header token, skipping '#' comments.
std::string header_token(std::istream& in) {
  std::string tok;
  while (true) {
    int c = in.peek();
    if (c == EOF) throw FormatError("unexpected end of image header");
    if (std::isspace(c)) {
      in.get();
    } else if (c == '#') {
      std::string comment;
      std::getline(in, comment);
    } else {
      break;
    }
  }
  in >> tok;
  if (!in) throw FormatError("bad image header");
  return tok;
}

std::size_t header_size(std::istream& in, const char* what) {
  const std::string tok = header_token(in);
  try {
    const long v = std::stol(tok);
    if (v <= 0) throw FormatError(std::string("non-positive ") + what);
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw FormatError(std::string("bad ") + what + " '" + tok + "'");
  }
}

template <class Stream>
Stream open_or_throw(const std::filesystem::path& path, std::ios::openmode mode) {
  Stream s(path, mode | std::ios::binary);
  if (!s) throw DataError("cannot open " + path.string());
  return s;
}

}  // namespace

RealGrid read_pgm_mask(std::istream& in) {
  if (header_token(in) != "P5") throw FormatError("not a binary PGM (P5) file");
  const std::size_t w = header_size(in, "width");
  const std::size_t h = header_size(in, "height");
  const std::size_t maxval = header_size(in, "maxval");
  if (maxval > 255) throw FormatError("only 8-bit PGM supported");
  in.get();  // single whitespace before raster
  std::vector<unsigned char> raster(w * h);
  if (!in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()))) {
    throw FormatError("truncated PGM raster");
  }
  RealGrid out(h, w);
  const unsigned half = (maxval + 1) / 2;
  for (std::size_t i = 0; i < raster.size(); ++i) out[i] = raster[i] >= half ? 1.0 : 0.0;
  return out;
}

RealGrid load_pgm_mask(const std::filesystem::path& path) {
  auto in = open_or_throw<std::ifstream>(path, std::ios::in);
  return read_pgm_mask(in);
}

void write_pgm_mask(std::ostream& out, const RealGrid& mask) {
  out << "P5\n" << mask.cols() << ' ' << mask.rows() << "\n255\n";
  std::vector<unsigned char> raster(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) raster[i] = mask[i] >= 0.5 ? 255 : 0;
  out.write(reinterpret_cast<const char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (!out) throw DataError("failed writing PGM");
}

void save_pgm_mask(const std::filesystem::path& path, const RealGrid& mask) {
  auto out = open_or_throw<std::ofstream>(path, std::ios::out);
  write_pgm_mask(out, mask);
}

RealGrid read_pfm(std::istream& in) {
  if (header_token(in) != "Pf") throw FormatError("not a greyscale PFM (Pf) file");
  const std::size_t w = header_size(in, "width");
  const std::size_t h = header_size(in, "height");
  const std::string scale_tok = header_token(in);
  double scale = 0;
  try {
    scale = std::stod(scale_tok);
  } catch (const std::logic_error&) {
    throw FormatError("bad PFM scale '" + scale_tok + "'");
  }
  if (scale >= 0) throw FormatError("big-endian PFM not supported");
  in.get();
  std::vector<float> raster(w * h);
  if (!in.read(reinterpret_cast<char*>(raster.data()),
               static_cast<std::streamsize>(raster.size() * sizeof(float)))) {
    throw FormatError("truncated PFM raster");
  }
  RealGrid out(h, w);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) out(r, c) = raster[(h - 1 - r) * w + c];
  return out;
}

RealGrid load_pfm(const std::filesystem::path& path) {
  auto in = open_or_throw<std::ifstream>(path, std::ios::in);
  return read_pfm(in);
}

void write_pfm(std::ostream& out, const RealGrid& image) {
  const std::size_t w = image.cols(), h = image.rows();
  out << "Pf\n" << w << ' ' << h << "\n-1.0\n";
  std::vector<float> raster(w * h);
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) raster[(h - 1 - r) * w + c] = static_cast<float>(image(r, c));
  out.write(reinterpret_cast<const char*>(raster.data()),
            static_cast<std::streamsize>(raster.size() * sizeof(float)));
  if (!out) throw DataError("failed writing PFM");
}

void save_pfm(const std::filesystem::path& path, const RealGrid& image) {
  auto out = open_or_throw<std::ofstream>(path, std::ios::out);
  write_pfm(out, image);
}

}  // namespace lithofield
