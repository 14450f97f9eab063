#include "lithofield/json_config.hpp"

#include <algorithm>
#include <cstring>

namespace lithofield {

namespace {

using nlohmann::json;

template <class T>
void read_key(const json& j, const char* key, T& out, const std::string& ctx) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(ctx + "." + key + ": " + e.what());
  }
}

void require_object(const json& j, const std::string& ctx) {
  if (!j.is_object()) throw ConfigError(ctx + " must be a JSON object");
}

std::string source_kind_name(SourceKind k) {
  switch (k) {
    case SourceKind::point: return "point";
    case SourceKind::circular: return "circular";
    case SourceKind::annular: return "annular";
  }
  return "unknown";
}

SourceKind source_kind_from(const std::string& s) {
  if (s == "point") return SourceKind::point;
  if (s == "circular") return SourceKind::circular;
  if (s == "annular") return SourceKind::annular;
  throw ConfigError("unknown source shape '" + s + "'");
}

}  // namespace

void reject_unknown_keys(const json& obj, std::initializer_list<const char*> allowed,
                         const std::string& context) {
  require_object(obj, context);
  for (const auto& [key, value] : obj.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* a) { return key == a; });
    if (!known) throw ConfigError("unknown key '" + key + "' in " + context);
  }
}

json to_json(const ImagingConfig& cfg) {
  return {{"wavelength_nm", cfg.wavelength_nm},
          {"numerical_aperture", cfg.numerical_aperture},
          {"pixel_size_nm", cfg.pixel_size_nm},
          {"source",
           {{"shape", source_kind_name(cfg.source.kind)},
            {"sigma_inner", cfg.source.sigma_inner},
            {"sigma_outer", cfg.source.sigma_outer}}},
          {"source_grid", cfg.source_grid}};
}

ImagingConfig imaging_from_json(const json& j, ImagingConfig cfg) {
  reject_unknown_keys(j, {"wavelength_nm", "numerical_aperture", "pixel_size_nm", "source", "source_grid"},
                      "imaging");
  read_key(j, "wavelength_nm", cfg.wavelength_nm, "imaging");
  read_key(j, "numerical_aperture", cfg.numerical_aperture, "imaging");
  read_key(j, "pixel_size_nm", cfg.pixel_size_nm, "imaging");
  read_key(j, "source_grid", cfg.source_grid, "imaging");
  if (j.contains("source")) {
    const json& s = j.at("source");
    reject_unknown_keys(s, {"shape", "sigma_inner", "sigma_outer"}, "imaging.source");
    std::string shape = source_kind_name(cfg.source.kind);
    read_key(s, "shape", shape, "imaging.source");
    cfg.source.kind = source_kind_from(shape);
    read_key(s, "sigma_inner", cfg.source.sigma_inner, "imaging.source");
    read_key(s, "sigma_outer", cfg.source.sigma_outer, "imaging.source");
  }
  cfg.validate();
  return cfg;
}

json to_json(const MaskSpec& spec) {
  return {{"style", to_string(spec.style)},          {"image_px", spec.image_px},
          {"pixel_size_nm", spec.pixel_size_nm},     {"min_feature_nm", spec.min_feature_nm},
          {"min_space_nm", spec.min_space_nm},       {"density", spec.density},
          {"seed", spec.seed}};
}

MaskSpec mask_spec_from_json(const json& j, MaskSpec spec) {
  reject_unknown_keys(j, {"style", "image_px", "pixel_size_nm", "min_feature_nm", "min_space_nm", "density", "seed"},
                      "mask");
  std::string style = to_string(spec.style);
  read_key(j, "style", style, "mask");
  spec.style = mask_style_from_string(style);
  read_key(j, "image_px", spec.image_px, "mask");
  read_key(j, "pixel_size_nm", spec.pixel_size_nm, "mask");
  read_key(j, "min_feature_nm", spec.min_feature_nm, "mask");
  read_key(j, "min_space_nm", spec.min_space_nm, "mask");
  read_key(j, "density", spec.density, "mask");
  read_key(j, "seed", spec.seed, "mask");
  return spec;
}

json to_json(const TrainConfig& cfg) {
  json j = {{"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},
            {"learning_rate", cfg.learning_rate},
            {"final_learning_rate", cfg.final_learning_rate},
            {"optimizer", cfg.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
            {"adam", {{"beta1", cfg.adam.beta1}, {"beta2", cfg.adam.beta2}, {"epsilon", cfg.adam.epsilon}}},
            {"seed", cfg.seed},
            {"r", cfg.r},
            {"precision", cfg.precision == Precision::f64 ? "f64" : "f32"},
            {"threads", cfg.threads}};
  j["kernel_dims"] = cfg.kernel_dims ? json::array({cfg.kernel_dims->rows, cfg.kernel_dims->cols})
                                     : json(nullptr);
  return j;
}

TrainConfig train_config_from_json(const json& j, TrainConfig cfg) {
  reject_unknown_keys(j, {"epochs", "batch_size", "learning_rate", "final_learning_rate", "optimizer", "adam",
                          "seed", "r", "kernel_dims", "precision", "threads"},
                      "train");
  read_key(j, "epochs", cfg.epochs, "train");
  read_key(j, "batch_size", cfg.batch_size, "train");
  read_key(j, "learning_rate", cfg.learning_rate, "train");
  read_key(j, "final_learning_rate", cfg.final_learning_rate, "train");
  read_key(j, "seed", cfg.seed, "train");
  read_key(j, "r", cfg.r, "train");
  read_key(j, "threads", cfg.threads, "train");
  if (j.contains("optimizer")) {
    std::string o;
    read_key(j, "optimizer", o, "train");
    if (o == "adam") cfg.optimizer = OptimizerKind::adam;
    else if (o == "sgd") cfg.optimizer = OptimizerKind::sgd;
    else throw ConfigError("unknown optimizer '" + o + "'");
  }
  if (j.contains("adam")) {
    const json& a = j.at("adam");
    reject_unknown_keys(a, {"beta1", "beta2", "epsilon"}, "train.adam");
    read_key(a, "beta1", cfg.adam.beta1, "train.adam");
    read_key(a, "beta2", cfg.adam.beta2, "train.adam");
    read_key(a, "epsilon", cfg.adam.epsilon, "train.adam");
  }
  if (j.contains("precision")) {
    std::string p;
    read_key(j, "precision", p, "train");
    if (p == "f64") cfg.precision = Precision::f64;
    else if (p == "f32") cfg.precision = Precision::f32;
    else throw ConfigError("unknown precision '" + p + "'");
  }
  if (j.contains("kernel_dims")) {
    const json& k = j.at("kernel_dims");
    if (k.is_null()) {
      cfg.kernel_dims.reset();
    } else if (k.is_number_unsigned()) {
      const auto v = k.get<std::size_t>();
      cfg.kernel_dims = KernelDims{v, v};
    } else if (k.is_array() && k.size() == 2) {
      cfg.kernel_dims = KernelDims{k[0].get<std::size_t>(), k[1].get<std::size_t>()};
    } else {
      throw ConfigError("train.kernel_dims must be null, N, or [n, m]");
    }
  }
  cfg.validate();
  return cfg;
}

json to_json(const NetworkConfig& cfg) {
  return {{"encoding", to_string(cfg.encoder.kind)},
          {"rff_features", cfg.encoder.rff_features},
          {"sigma", cfg.encoder.sigma},
          {"encoder_seed", cfg.encoder.seed},
          {"nerf_octaves", cfg.encoder.nerf_octaves},
          {"hidden_width", cfg.hidden_width},
          {"hidden_blocks", cfg.hidden_blocks},
          {"output_gain", cfg.output_gain}};
}

NetworkConfig network_config_from_json(const json& j, NetworkConfig cfg) {
  reject_unknown_keys(j, {"encoding", "rff_features", "sigma", "encoder_seed", "nerf_octaves", "hidden_width",
                          "hidden_blocks", "output_gain"},
                      "network");
  if (j.contains("encoding")) {
    std::string e;
    read_key(j, "encoding", e, "network");
    cfg.encoder.kind = encoding_from_string(e);
  }
  read_key(j, "rff_features", cfg.encoder.rff_features, "network");
  read_key(j, "sigma", cfg.encoder.sigma, "network");
  read_key(j, "encoder_seed", cfg.encoder.seed, "network");
  read_key(j, "nerf_octaves", cfg.encoder.nerf_octaves, "network");
  read_key(j, "hidden_width", cfg.hidden_width, "network");
  read_key(j, "hidden_blocks", cfg.hidden_blocks, "network");
  read_key(j, "output_gain", cfg.output_gain, "network");
  cfg.validate();
  return cfg;
}

}  // namespace lithofield
