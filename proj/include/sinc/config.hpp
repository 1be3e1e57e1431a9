#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "sinc/augment.hpp"
#include "sinc/model.hpp"
#include "sinc/spectral.hpp"
#include "sinc/synth.hpp"
#include "sinc/train.hpp"

namespace sinc {

using Json = nlohmann::ordered_json;

// JSON codecs. Readers reject unknown keys (ConfigError names the full key
// path) and leave absent keys at their defaults.
Json to_json(const GenSpec& spec);
Json to_json(const ModelConfig& cfg);
Json to_json(const AugmentConfig& cfg);
Json to_json(const Bandlimits& band);
Json to_json(const SpectralConfig& cfg);
Json to_json(const AdamHyper& adam);
Json to_json(const LossWeights& w);

GenSpec gen_spec_from_json(const Json& j, GenSpec base = {}, const std::string& where = "generator");
ModelConfig model_config_from_json(const Json& j, const std::string& where = "model");
AugmentConfig augment_from_json(const Json& j, AugmentConfig base, const std::string& where);
Bandlimits band_from_json(const Json& j, const std::string& where = "band");
SpectralConfig spectral_from_json(const Json& j, const std::string& where = "spectral");

/// Everything one CLI invocation needs. Child seeds come from the global seed.
struct RunConfig {
  static constexpr const char* kSchema = "sinc.config/1";

  std::uint64_t seed = 0;
  Bandlimits band = pulse_band();
  SpectralConfig spectral;

  GenSpec generator = default_pulse_spec();
  std::size_t n_clips = 32;
  double source_len_factor = 1.5;
  GenSpec eval_generator = default_pulse_spec();  // held-out clips
  std::size_t n_eval = 16;

  ModelConfig model;
  TrainConfig train;

  PersonalizeConfig personalize;
  GenSpec subject = default_pulse_spec();  // the subject clip generator

  TtaConfig tta;
  GenSpec stream = default_pulse_spec();  // the long test stream generator

  SweepConfig sweep;

  std::optional<std::filesystem::path> dataset;     // manifest path
  std::optional<std::filesystem::path> checkpoint;  // model input path

  /// Pushes the global seed and shared sections (band, spectral) into every
  /// component config.
  void resolve();
};

RunConfig run_config_from_json(const Json& j);
RunConfig load_run_config(const std::filesystem::path& path);

}  // namespace sinc
