#include "run_config.hpp"

#include <fstream>

#include "lithofield/error.hpp"
#include "lithofield/json_config.hpp"

namespace lithofield::cli {

using nlohmann::json;

namespace {

template <class T>
void read_key(const json& j, const char* key, T& out, const std::string& ctx) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(ctx + "." + key + ": " + e.what());
  }
}

// Desk-scale defaults: 2048 nm tiles of via patterns, 21x21 source sampling.
ImagingConfig default_imaging() {
  ImagingConfig cfg;
  cfg.pixel_size_nm = 8.0;
  cfg.source_grid = 21;
  return cfg;
}

MaskSpec default_mask(MaskStyle style) {
  MaskSpec spec;
  spec.style = style;
  spec.pixel_size_nm = 8.0;
  return spec;
}

}  // namespace

std::string to_string(Engine e) { return e == Engine::socs ? "socs" : "abbe"; }

Engine engine_from_string(const std::string& s) {
  if (s == "socs") return Engine::socs;
  if (s == "abbe") return Engine::abbe;
  throw ConfigError("unknown engine '" + s + "'");
}

RunConfig::RunConfig() : imaging(default_imaging()) {
  dataset.train_mask = default_mask(MaskStyle::via);
  dataset.test_mask = default_mask(MaskStyle::via);
}

void RunConfig::validate() const {
  imaging.validate();
  if (!(threshold > 0)) throw ConfigError("threshold must be positive");
  if (threads == 0) throw ConfigError("threads must be at least 1");
  train.validate();
  network.validate();
  if (bench.threads.empty() || bench.repeats == 0) throw ConfigError("bench needs threads and repeats");
  for (std::size_t t : bench.threads)
    if (t == 0) throw ConfigError("bench thread counts must be at least 1");
  for (std::size_t k : ablate.kernel_dims)
    if (k % 2 == 0) throw ConfigError("ablate kernel_dims must be odd");
}

RunConfig run_config_from_json(const json& j, RunConfig cfg) {
  reject_unknown_keys(j, {"imaging", "threshold", "dataset", "train", "network", "bench", "ablate", "threads",
                          "checkpoint_every", "engine", "manifest", "kernels", "mask", "out"},
                      "config");
  if (j.contains("imaging")) cfg.imaging = imaging_from_json(j.at("imaging"), cfg.imaging);
  read_key(j, "threshold", cfg.threshold, "config");
  read_key(j, "threads", cfg.threads, "config");
  read_key(j, "checkpoint_every", cfg.checkpoint_every, "config");
  if (j.contains("engine")) {
    std::string e;
    read_key(j, "engine", e, "config");
    cfg.engine = engine_from_string(e);
  }
  for (auto [key, target] : {std::pair{"manifest", &cfg.manifest}, std::pair{"kernels", &cfg.kernels},
                             std::pair{"mask", &cfg.mask}, std::pair{"out", &cfg.out}}) {
    std::string s;
    if (j.contains(key)) {
      read_key(j, key, s, "config");
      *target = s;
    }
  }
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    reject_unknown_keys(d, {"n_train", "n_test", "train_mask", "test_mask", "seed"}, "dataset");
    read_key(d, "n_train", cfg.dataset.n_train, "dataset");
    read_key(d, "n_test", cfg.dataset.n_test, "dataset");
    read_key(d, "seed", cfg.dataset.seed, "dataset");
    if (d.contains("train_mask")) cfg.dataset.train_mask = mask_spec_from_json(d.at("train_mask"), cfg.dataset.train_mask);
    if (d.contains("test_mask")) cfg.dataset.test_mask = mask_spec_from_json(d.at("test_mask"), cfg.dataset.test_mask);
  }
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"), cfg.train);
  if (j.contains("network")) cfg.network = network_config_from_json(j.at("network"), cfg.network);
  if (j.contains("bench")) {
    const json& b = j.at("bench");
    reject_unknown_keys(b, {"threads", "repeats", "max_masks"}, "bench");
    read_key(b, "threads", cfg.bench.threads, "bench");
    read_key(b, "repeats", cfg.bench.repeats, "bench");
    read_key(b, "max_masks", cfg.bench.max_masks, "bench");
  }
  if (j.contains("ablate")) {
    const json& a = j.at("ablate");
    reject_unknown_keys(a, {"kernel_dims", "encodings", "epochs"}, "ablate");
    read_key(a, "kernel_dims", cfg.ablate.kernel_dims, "ablate");
    read_key(a, "epochs", cfg.ablate.epochs, "ablate");
    if (a.contains("encodings")) {
      std::vector<std::string> names;
      read_key(a, "encodings", names, "ablate");
      cfg.ablate.encodings.clear();
      for (const auto& n : names) cfg.ablate.encodings.push_back(encoding_from_string(n));
    }
  }
  return cfg;
}

json to_json(const RunConfig& cfg) {
  json enc = json::array();
  for (EncodingKind k : cfg.ablate.encodings) enc.push_back(lithofield::to_string(k));
  return {{"imaging", lithofield::to_json(cfg.imaging)},
          {"threshold", cfg.threshold},
          {"dataset",
           {{"n_train", cfg.dataset.n_train},
            {"n_test", cfg.dataset.n_test},
            {"train_mask", lithofield::to_json(cfg.dataset.train_mask)},
            {"test_mask", lithofield::to_json(cfg.dataset.test_mask)},
            {"seed", cfg.dataset.seed}}},
          {"train", lithofield::to_json(cfg.train)},
          {"network", lithofield::to_json(cfg.network)},
          {"bench", {{"threads", cfg.bench.threads}, {"repeats", cfg.bench.repeats}, {"max_masks", cfg.bench.max_masks}}},
          {"ablate", {{"kernel_dims", cfg.ablate.kernel_dims}, {"encodings", enc}, {"epochs", cfg.ablate.epochs}}},
          {"threads", cfg.threads},
          {"checkpoint_every", cfg.checkpoint_every},
          {"engine", to_string(cfg.engine)},
          {"manifest", cfg.manifest.string()},
          {"kernels", cfg.kernels.string()},
          {"mask", cfg.mask.string()},
          {"out", cfg.out.string()}};
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

}  // namespace lithofield::cli
