#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lithofield/datagen.hpp"
#include "lithofield/optics.hpp"
#include "lithofield/trainer.hpp"

namespace lithofield::cli {

enum class Engine { socs, abbe };

struct DatasetSection {
  std::size_t n_train = 64;
  std::size_t n_test = 16;
  MaskSpec train_mask;
  MaskSpec test_mask;
  std::uint64_t seed = 0;
};

struct BenchSection {
  std::vector<std::size_t> threads{1, 2, 4};
  std::size_t repeats = 3;
  std::size_t max_masks = 16;
};

struct AblateSection {
  std::vector<std::size_t> kernel_dims;  // empty: derived from the passband rule
  std::vector<EncodingKind> encodings{EncodingKind::none, EncodingKind::nerf, EncodingKind::rff};
  std::size_t epochs = 0;                // 0: use train.epochs
};

/// Everything a subcommand may need. Built from defaults, then the JSON
/// file, then command-line flags.
struct RunConfig {
  ImagingConfig imaging;
  double threshold = kDefaultResistThreshold;
  DatasetSection dataset;
  TrainConfig train;
  NetworkConfig network;
  BenchSection bench;
  AblateSection ablate;
  std::size_t threads = 1;
  std::size_t checkpoint_every = 0;  // train: extra NMLP snapshot every k epochs; 0 disables
  Engine engine = Engine::socs;
  std::filesystem::path manifest;
  std::filesystem::path kernels;
  std::filesystem::path mask;
  std::filesystem::path out = "out";

  RunConfig();
  void validate() const;
};

RunConfig run_config_from_json(const nlohmann::json& j, RunConfig base = {});
nlohmann::json to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

std::string to_string(Engine e);
Engine engine_from_string(const std::string& s);

}  // namespace lithofield::cli
