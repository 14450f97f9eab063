#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lithofield/grid.hpp"
#include "lithofield/optics.hpp"

namespace lithofield {

enum class MaskStyle { via, metal };

std::string to_string(MaskStyle s);
MaskStyle mask_style_from_string(const std::string& s);

struct MaskSpec {
  MaskStyle style = MaskStyle::via;
  std::size_t image_px = 256;
  double pixel_size_nm = 4.0;
  double min_feature_nm = 144.0;
  double min_space_nm = 144.0;
  double density = 0.12;  // target open-area fraction
  std::uint64_t seed = 0;

  std::size_t feature_px() const;
  std::size_t space_px() const;

  /// Throws ConfigError if features are below 2R = lambda/NA or do not fit.
  void validate(double wavelength_nm, double numerical_aperture) const;
};

/// Axis-aligned rectangle, half-open pixel ranges [r0, r1) x [c0, c1).
struct Rect {
  std::size_t r0, c0, r1, c1;
};

/// Generated layout: rectangles grouped into features (connected polygons).
struct MaskLayout {
  std::vector<Rect> rects;
  std::vector<std::size_t> feature_of_rect;
  RealGrid mask;
};

/// Random Manhattan layout. Via style places squares with side in
/// [min_feature, 2 min_feature]; metal style places straight or jogged wires.
/// Every pair of features keeps at least min_space empty pixels between them,
/// also across the periodic image boundary. Throws DataError if the density
/// target cannot be met within the retry budget.
MaskLayout gen_layout(const MaskSpec& spec);
RealGrid gen_mask(const MaskSpec& spec);

struct RenderedTruth {
  RealGrid aerial;
  RealGrid resist;
};

/// Ground truth through the near-full-rank SOCS oracle (coverage >= 0.99999).
class TruthRenderer {
 public:
  TruthRenderer(const ImagingConfig& imaging, std::size_t image_px, double threshold,
                double coverage = 0.99999);

  RenderedTruth render(const RealGrid& mask, std::size_t threads = 1) const;

  const OracleModel& model() const noexcept { return model_; }
  const KernelStack& kernels() const noexcept { return kernels_; }
  std::size_t rank() const noexcept { return kernels_.order(); }
  double threshold() const noexcept { return threshold_; }
  /// Fraction of the TCC trace left out by truncation.
  double residual_fraction() const noexcept { return residual_; }

 private:
  OracleModel model_;
  KernelStack kernels_;
  double threshold_;
  double residual_;
};

struct DatasetRecord {
  std::string mask;    // paths relative to the manifest directory
  std::string aerial;
  std::string resist;
  std::string split;   // "train" or "test"
  std::uint64_t seed;
  std::string style;
};

struct DatasetManifest {
  ImagingConfig imaging;
  double threshold = kDefaultResistThreshold;
  std::size_t image_px = 0;
  std::size_t oracle_rank = 0;
  std::vector<DatasetRecord> records;
  std::filesystem::path root;  // directory holding the manifest; not serialized

  std::vector<const DatasetRecord*> split(const std::string& name) const;
};

std::string manifest_json(const DatasetManifest& m);
DatasetManifest parse_manifest(const std::string& json, const std::filesystem::path& root);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& m);
DatasetManifest load_manifest(const std::filesystem::path& path);

struct DatasetRequest {
  std::size_t n_train = 0;
  std::size_t n_test = 0;
  MaskSpec train_spec;
  MaskSpec test_spec;     // style may differ for out-of-distribution splits
  std::uint64_t seed = 0; // train seeds seed, seed+1, ...; test seeds start at seed + 2^32
};

/// Test seeds live in a disjoint range from train seeds.
std::uint64_t train_seed(std::uint64_t base, std::size_t i);
std::uint64_t test_seed(std::uint64_t base, std::size_t i);

/// Generates masks, renders truth, writes PGM/PFM files plus manifest.json into dir.
DatasetManifest build_dataset(const DatasetRequest& req, const ImagingConfig& imaging,
                              double threshold, const std::filesystem::path& dir,
                              std::size_t threads = 1);

struct LoadedSample {
  RealGrid mask;
  RealGrid aerial;
  RealGrid resist;
  std::string name;
};

std::vector<LoadedSample> load_split(const DatasetManifest& m, const std::string& split);

}  // namespace lithofield
