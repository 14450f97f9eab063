#pragma once

#include <initializer_list>
#include <nlohmann/json.hpp>
#include <string>

#include "lithofield/datagen.hpp"
#include "lithofield/optics.hpp"
#include "lithofield/trainer.hpp"

// JSON (de)serialization of configuration structs. Parsers start from the
// defaults in `base`, override the keys present, and reject unknown keys.
namespace lithofield {

/// Throws ConfigError naming the first key of `obj` not in `allowed`.
void reject_unknown_keys(const nlohmann::json& obj, std::initializer_list<const char*> allowed,
                         const std::string& context);

nlohmann::json to_json(const ImagingConfig& cfg);
ImagingConfig imaging_from_json(const nlohmann::json& j, ImagingConfig base = {});

nlohmann::json to_json(const MaskSpec& spec);
MaskSpec mask_spec_from_json(const nlohmann::json& j, MaskSpec base = {});

nlohmann::json to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig base = {});

nlohmann::json to_json(const NetworkConfig& cfg);
NetworkConfig network_config_from_json(const nlohmann::json& j, NetworkConfig base = {});

}  // namespace lithofield
