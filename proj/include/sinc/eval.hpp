#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sinc/clip.hpp"
#include "sinc/model.hpp"
#include "sinc/spectral.hpp"
#include "sinc/synth.hpp"

namespace sinc {

struct Metrics {
  double mae = 0.0;   // bpm
  double rmse = 0.0;  // bpm
  std::optional<double> pearson_r;  // absent when either series is constant
  std::size_t n = 0;
};

/// MAE, RMSE and pooled Pearson r over already paired rates.
Metrics metrics_from_pairs(std::span<const double> pred_bpm, std::span<const double> gt_bpm);

/// Pairs each prediction with the nearest ground-truth time within
/// tolerance_s (default: half the ground-truth hop) and scores the pairs.
Metrics rate_metrics(const RateSeries& pred, const RateSeries& gt,
                     std::optional<double> tolerance_s = std::nullopt);

/// ZCA-whitened components (T x P, row-major) of the column-centered matrix:
/// X W with W = E diag((lambda + ridge)^-1/2) E^T.
std::vector<double> zca_whiten(const MotionMatrix& motion, double ridge = 1e-6);

/// Respiration baseline: whiten, score every component with snr() on `band`,
/// sign-align the top three to the best one and average them.
std::vector<double> zca_baseline(const MotionMatrix& motion, const Bandlimits& band,
                                 const SpectralConfig& spectral);

/// Per-clip rate estimates: the model's waveform over frames [0, frames)
/// (0 = whole clip) against 60 x the mean ground truth over the same frames.
struct ClipRates {
  std::vector<double> pred_bpm;
  std::vector<double> gt_bpm;
};

ClipRates clip_rates(const ModelParams& params, std::span<const Clip> clips, const Bandlimits& band,
                     const SpectralConfig& spectral, std::size_t frames = 0);

Metrics evaluate_clips(const ModelParams& params, std::span<const Clip> clips,
                       const Bandlimits& band, const SpectralConfig& spectral,
                       std::size_t frames = 0);

/// Lays per-clip rates on a synthetic timeline (one clip per `spacing_s`
/// seconds) so they can be written as rate CSVs.
RateSeries as_series(std::span<const double> rates_bpm, double spacing_s);

/// Both parameter sets on both evaluation sets.
struct ForgettingReport {
  Metrics original_on_original;
  Metrics original_on_new;
  Metrics adapted_on_original;
  Metrics adapted_on_new;
};

ForgettingReport forgetting_report(const ModelParams& original, const ModelParams& adapted,
                                   std::span<const Clip> original_set,
                                   std::span<const Clip> new_set, const Bandlimits& band,
                                   const SpectralConfig& spectral, std::size_t frames = 0);

/// Rate CSV: header "time_s,rate_bpm", one row per sample.
std::string rate_csv(const RateSeries& series);
void write_rate_csv(const std::filesystem::path& path, const RateSeries& series);
/// Throws IoError naming the path and line on malformed input.
RateSeries read_rate_csv(const std::filesystem::path& path);

/// Structured text (JSON) rendering of a metrics record.
std::string metrics_json(const Metrics& m);

}  // namespace sinc
