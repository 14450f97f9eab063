#include "lithofield/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>

#include "lithofield/error.hpp"
#include "lithofield/image_io.hpp"
#include "lithofield/json_config.hpp"
#include "lithofield/parallel.hpp"

namespace lithofield {

namespace {

constexpr std::size_t kMaxFailures = 2000;

using Rng = std::mt19937_64;

std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Empty pixels between two rects along each axis; negative if projections overlap.
std::ptrdiff_t axis_gap(std::size_t a0, std::size_t a1, std::size_t b0, std::size_t b1) {
  const auto d1 = static_cast<std::ptrdiff_t>(b0) - static_cast<std::ptrdiff_t>(a1);
  const auto d2 = static_cast<std::ptrdiff_t>(a0) - static_cast<std::ptrdiff_t>(b1);
  return std::max(d1, d2);
}

bool separated(const Rect& a, const Rect& b, std::size_t space) {
  const auto s = static_cast<std::ptrdiff_t>(space);
  return axis_gap(a.r0, a.r1, b.r0, b.r1) >= s || axis_gap(a.c0, a.c1, b.c0, b.c1) >= s;
}

// Candidate feature as a set of touching rects (1 for vias, 1 or 3 for wires).
using Feature = std::vector<Rect>;

Feature random_via(Rng& rng, std::size_t lo, std::size_t hi, std::size_t f, std::size_t fmax) {
  const std::size_t side = uniform(rng, f, fmax);
  if (lo + side > hi) return {};
  const std::size_t r0 = uniform(rng, lo, hi - side);
  const std::size_t c0 = uniform(rng, lo, hi - side);
  return {Rect{r0, c0, r0 + side, c0 + side}};
}

// Straight or Z-jogged wire; built horizontally then transposed half the time.
Feature random_wire(Rng& rng, std::size_t lo, std::size_t hi, std::size_t f, std::size_t space) {
  const std::size_t span = hi - lo;
  const std::size_t width = uniform(rng, f, f + f / 2);
  if (span < 3 * f || width > span) return {};
  const std::size_t length = uniform(rng, 3 * f, span);
  const std::size_t c0 = uniform(rng, lo, hi - length);
  const std::size_t c1 = c0 + length;
  Feature wire;
  const bool jog = length >= 4 * f && span >= 2 * width + space && uniform(rng, 0, 1) == 1;
  if (!jog) {
    const std::size_t r0 = uniform(rng, lo, hi - width);
    wire.push_back({r0, c0, r0 + width, c1});
  } else {
    // Two horizontal runs offset by at least width + space, joined by a vertical jog.
    const std::size_t offset_min = width + space;
    const std::size_t offset = uniform(rng, offset_min, std::max(offset_min, span - width));
    if (offset + width > span) return {};
    const std::size_t ra = uniform(rng, lo, hi - width - offset);
    const std::size_t rb = ra + offset;
    const std::size_t cj = uniform(rng, c0 + f, c1 - f - width);
    wire.push_back({ra, c0, ra + width, cj + width});
    wire.push_back({ra, cj, rb + width, cj + width});
    wire.push_back({rb, cj, rb + width, c1});
  }
  if (uniform(rng, 0, 1) == 1) {
    for (Rect& r : wire) r = {r.c0, r.r0, r.c1, r.r1};
  }
  return wire;
}

std::string sample_name(const std::string& split, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%04zu", split.c_str(), i);
  return buf;
}

}  // namespace

std::string to_string(MaskStyle s) { return s == MaskStyle::via ? "via" : "metal"; }

MaskStyle mask_style_from_string(const std::string& s) {
  if (s == "via") return MaskStyle::via;
  if (s == "metal") return MaskStyle::metal;
  throw ConfigError("unknown mask style '" + s + "'");
}

std::size_t MaskSpec::feature_px() const {
  return static_cast<std::size_t>(std::ceil(min_feature_nm / pixel_size_nm - 1e-9));
}

std::size_t MaskSpec::space_px() const {
  return static_cast<std::size_t>(std::ceil(min_space_nm / pixel_size_nm - 1e-9));
}

void MaskSpec::validate(double wavelength_nm, double numerical_aperture) const {
  if (image_px < 8) throw ConfigError("mask image_px must be at least 8");
  if (!(pixel_size_nm > 0) || !(min_feature_nm > 0) || !(min_space_nm > 0)) {
    throw ConfigError("mask lengths must be positive");
  }
  if (!(density >= 0 && density < 1)) throw ConfigError("mask density must lie in [0, 1)");
  const double two_r = wavelength_nm / numerical_aperture;
  if (min_feature_nm < two_r) {
    throw ConfigError("min_feature_nm " + std::to_string(min_feature_nm) +
                      " below the printable limit " + std::to_string(two_r));
  }
  const std::size_t margin = (space_px() + 1) / 2;
  if (2 * margin + feature_px() > image_px) throw ConfigError("features do not fit in the image");
}

MaskLayout gen_layout(const MaskSpec& spec) {
  if (!(spec.density >= 0 && spec.density < 1)) throw ConfigError("mask density must lie in [0, 1)");
  const std::size_t n = spec.image_px;
  const std::size_t f = std::max<std::size_t>(1, spec.feature_px());
  const std::size_t space = std::max<std::size_t>(1, spec.space_px());
  // Half the spacing on each border keeps periodic neighbours apart too.
  const std::size_t lo = (space + 1) / 2;
  const std::size_t hi = n > lo ? n - lo : 0;
  if (hi <= lo || hi - lo < f) throw ConfigError("features do not fit in the image");

  MaskLayout layout;
  layout.mask = RealGrid(n, n);
  const double target = spec.density * static_cast<double>(n * n);
  Rng rng(spec.seed);
  std::size_t open = 0;
  std::size_t failures = 0;
  std::size_t features = 0;
  while (static_cast<double>(open) < target) {
    Feature cand = spec.style == MaskStyle::via ? random_via(rng, lo, hi, f, 2 * f)
                                                : random_wire(rng, lo, hi, f, space);
    bool ok = !cand.empty();
    for (std::size_t i = 0; ok && i < layout.rects.size(); ++i) {
      for (const Rect& c : cand) {
        if (!separated(layout.rects[i], c, space)) {
          ok = false;
          break;
        }
      }
    }
    if (!ok) {
      if (++failures >= kMaxFailures) {
        throw DataError("could not reach density " + std::to_string(spec.density) + " within " +
                        std::to_string(kMaxFailures) + " placement attempts");
      }
      continue;
    }
    for (const Rect& c : cand) {
      for (std::size_t r = c.r0; r < c.r1; ++r)
        for (std::size_t col = c.c0; col < c.c1; ++col) layout.mask(r, col) = 1.0;
      layout.rects.push_back(c);
      layout.feature_of_rect.push_back(features);
    }
    ++features;
    open = 0;
    for (double v : layout.mask.values()) open += v > 0.5 ? 1 : 0;
  }
  return layout;
}

RealGrid gen_mask(const MaskSpec& spec) { return gen_layout(spec).mask; }

TruthRenderer::TruthRenderer(const ImagingConfig& imaging, std::size_t image_px, double threshold,
                             double coverage)
    : model_(OracleModel::build(imaging, image_px, image_px)), threshold_(threshold) {
  if (!(coverage > 0 && coverage <= 1)) throw ConfigError("coverage must lie in (0, 1]");
  const std::size_t r = model_.spectrum.rank_for_coverage(coverage);
  kernels_ = model_.spectrum.kernels(r, imaging.kernel_metadata(Provenance::oracle));
  const double total = model_.spectrum.eigenvalues.sum();
  const double kept = model_.spectrum.eigenvalues.head(static_cast<Eigen::Index>(r)).sum();
  residual_ = total > 0 ? std::max(0.0, 1.0 - kept / total) : 0.0;
}

RenderedTruth TruthRenderer::render(const RealGrid& mask, std::size_t threads) const {
  if (mask.rows() != model_.image_rows || mask.cols() != model_.image_cols) {
    throw DimensionError("mask shape does not match the oracle image size");
  }
  RenderedTruth out;
  out.aerial = socs_image(kernels_, mask, threads);
  out.resist = resist_image(out.aerial, threshold_);
  return out;
}

std::vector<const DatasetRecord*> DatasetManifest::split(const std::string& name) const {
  std::vector<const DatasetRecord*> out;
  for (const auto& r : records)
    if (r.split == name) out.push_back(&r);
  return out;
}

std::string manifest_json(const DatasetManifest& m) {
  nlohmann::json j;
  j["imaging"] = to_json(m.imaging);
  j["threshold"] = m.threshold;
  j["image_px"] = m.image_px;
  j["oracle_rank"] = m.oracle_rank;
  j["records"] = nlohmann::json::array();
  for (const auto& r : m.records) {
    j["records"].push_back({{"mask", r.mask},
                            {"aerial", r.aerial},
                            {"resist", r.resist},
                            {"split", r.split},
                            {"seed", r.seed},
                            {"style", r.style}});
  }
  return j.dump(2) + "\n";
}

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& root) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("manifest is not valid JSON: ") + e.what());
  }
  DatasetManifest m;
  m.root = root;
  try {
    m.imaging = imaging_from_json(j.at("imaging"));
    m.threshold = j.at("threshold").get<double>();
    m.image_px = j.at("image_px").get<std::size_t>();
    m.oracle_rank = j.at("oracle_rank").get<std::size_t>();
    for (const auto& r : j.at("records")) {
      m.records.push_back({r.at("mask").get<std::string>(), r.at("aerial").get<std::string>(),
                           r.at("resist").get<std::string>(), r.at("split").get<std::string>(),
                           r.at("seed").get<std::uint64_t>(), r.at("style").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed manifest: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed manifest imaging block: ") + e.what());
  }
  return m;
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << manifest_json(m);
  if (!out) throw DataError("write failed for " + path.string());
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  DatasetManifest m = parse_manifest(ss.str(), path.parent_path());
  for (const auto& r : m.records) {
    for (const std::string* p : {&r.mask, &r.aerial, &r.resist}) {
      if (!std::filesystem::exists(m.root / *p)) {
        throw DataError("manifest references missing file " + (m.root / *p).string());
      }
    }
  }
  return m;
}

std::uint64_t train_seed(std::uint64_t base, std::size_t i) { return base + i; }

std::uint64_t test_seed(std::uint64_t base, std::size_t i) {
  return base + (std::uint64_t{1} << 32) + i;
}

DatasetManifest build_dataset(const DatasetRequest& req, const ImagingConfig& imaging,
                              double threshold, const std::filesystem::path& dir,
                              std::size_t threads) {
  imaging.validate();
  if (req.n_train >= (std::size_t{1} << 32) || req.n_test >= (std::size_t{1} << 32)) {
    throw ConfigError("split sizes must stay below 2^32");
  }
  for (const MaskSpec* s : {&req.train_spec, &req.test_spec}) {
    s->validate(imaging.wavelength_nm, imaging.numerical_aperture);
    if (s->pixel_size_nm != imaging.pixel_size_nm) {
      throw ConfigError("mask pixel size must match the imaging pixel size");
    }
  }
  if (req.train_spec.image_px != req.test_spec.image_px) {
    throw ConfigError("train and test masks must share image_px");
  }
  const std::size_t px = req.train_spec.image_px;
  const TruthRenderer renderer(imaging, px, threshold);
  std::filesystem::create_directories(dir);

  DatasetManifest m;
  m.imaging = imaging;
  m.threshold = threshold;
  m.image_px = px;
  m.oracle_rank = renderer.rank();
  m.root = dir;
  for (std::size_t i = 0; i < req.n_train; ++i) {
    const std::string base = sample_name("train", i);
    m.records.push_back({base + "_mask.pgm", base + "_aerial.pfm", base + "_resist.pgm", "train",
                         train_seed(req.seed, i), to_string(req.train_spec.style)});
  }
  for (std::size_t i = 0; i < req.n_test; ++i) {
    const std::string base = sample_name("test", i);
    m.records.push_back({base + "_mask.pgm", base + "_aerial.pfm", base + "_resist.pgm", "test",
                         test_seed(req.seed, i), to_string(req.test_spec.style)});
  }

  parallel_chunks(m.records.size(), threads, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      const DatasetRecord& rec = m.records[k];
      MaskSpec spec = rec.split == "train" ? req.train_spec : req.test_spec;
      spec.seed = rec.seed;
      const RealGrid mask = gen_mask(spec);
      const RenderedTruth truth = renderer.render(mask, 1);
      save_pgm_mask(dir / rec.mask, mask);
      save_pfm(dir / rec.aerial, truth.aerial);
      save_pgm_mask(dir / rec.resist, truth.resist);
    }
  });
  save_manifest(dir / "manifest.json", m);
  return m;
}

std::vector<LoadedSample> load_split(const DatasetManifest& m, const std::string& split) {
  std::vector<LoadedSample> out;
  for (const DatasetRecord* r : m.split(split)) {
    LoadedSample s;
    s.mask = load_pgm_mask(m.root / r->mask);
    s.aerial = load_pfm(m.root / r->aerial);
    s.resist = load_pgm_mask(m.root / r->resist);
    s.name = std::filesystem::path(r->mask).stem().string();
    const bool ok = s.mask.rows() == m.image_px && s.mask.cols() == m.image_px &&
                    s.mask.same_shape(s.aerial) && s.mask.same_shape(s.resist);
    if (!ok) throw DataError("sample " + r->mask + " does not match image_px " + std::to_string(m.image_px));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace lithofield
