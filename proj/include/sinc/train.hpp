#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sinc/augment.hpp"
#include "sinc/clip.hpp"
#include "sinc/losses.hpp"
#include "sinc/model.hpp"
#include "sinc/spectral.hpp"
#include "sinc/synth.hpp"

namespace sinc {

/// Loss weights used by the training loops. The variance term is a sum over
/// every in-band bin (hundreds at the default nfft), so it is scaled down to
/// sit on the same footing as the two per-sample ratios.
inline LossWeights default_train_weights() { return {1.0, 1.0, 0.03}; }

/// Weights for personalization and test-time adaptation. Every batch there
/// comes from one subject or one clip and so shares a single true frequency;
/// the variance term would reward pulling the views apart, so it is off.
inline LossWeights default_adapt_weights() { return {1.0, 1.0, 0.0}; }

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 8;
  std::size_t clip_len = 120;
  double poison_alpha = 0.0;
  Bandlimits band = pulse_band();
  SpectralConfig spectral;
  AugmentConfig augment;
  AdamHyper adam;
  LossWeights weights = default_train_weights();
  std::uint64_t seed = 0;

  void validate() const;
};

struct StepRecord {
  std::size_t step = 0;
  std::size_t epoch = 0;
  LossBreakdown loss;
  std::vector<double> band_scales;  // c per batch slot; losses used band * c
  std::vector<bool> poisoned;
};

struct TrainHistory {
  std::vector<StepRecord> steps;
  std::vector<double> epoch_seconds;
  std::uint64_t params_checksum = 0;
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
};

/// Line-delimited JSON, one record per step. Wall times are left out so the
/// file is reproducible.
std::string history_jsonl(const TrainHistory& history);

/// Unsupervised training from a fresh init. Each step draws batch_size clips
/// (shuffled order, reshuffled after every pass), swaps each for a poisoned
/// negative with probability poison_alpha, takes a random window, augments it
/// once, and applies one Adam step on the loss. An epoch covers as many
/// samples as there are clip_len windows at clip_len / 2 stride in the
/// dataset (at least one per clip).
/// `negatives` describes the poisoned clips (its frame count is ignored).
TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                  std::span<const Clip> dataset, const GenSpec& negatives);

/// Steps in one training epoch: ceil(samples / batch_size).
std::size_t train_steps_per_epoch(std::span<const Clip> dataset, const TrainConfig& cfg);

/// Same loop, continuing from existing parameters.
TrainResult train_from(ModelParams initial, const TrainConfig& cfg, std::span<const Clip> dataset,
                       const GenSpec& negatives);

struct PersonalizeConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 20;
  std::size_t window = 120;
  std::size_t stride = 60;
  double duration_s = 20.0;
  Bandlimits band = pulse_band();
  SpectralConfig spectral;
  AugmentConfig augment = AugmentConfig::personalization();
  // A short, fixed set of windows: larger steps than from-scratch training.
  AdamHyper adam{3e-3, 0.9, 0.999, 1e-8};
  LossWeights weights = default_adapt_weights();
  std::uint64_t seed = 0;

  void validate() const;
};

/// floor((frames - window) / stride) + 1, or 0 if frames < window.
std::size_t window_count(std::size_t frames, std::size_t window, std::size_t stride);

/// Finetunes a copy of `pretrained` on the windows of the subject's first
/// duration_s seconds. One epoch is ceil(windows / batch_size) steps; batches
/// are drawn with replacement.
TrainResult personalize(const ModelParams& pretrained, const Clip& subject,
                        const PersonalizeConfig& cfg);

/// Windows of the first duration_s seconds, as used by personalize().
std::vector<Clip> personalization_windows(const Clip& subject, const PersonalizeConfig& cfg);

struct TtaConfig {
  // Updates per clip. Values >= 1 are rounded to an integer count of
  // consecutive updates; values in (0, 1) mean one update every
  // round(1 / n_tta) clips; 0 disables adaptation.
  double n_tta = 1.0;
  std::size_t clip_len = 120;
  std::size_t stride = 60;
  std::size_t views = 20;
  AugmentConfig augment = AugmentConfig::test_time();
  AdamHyper adam;
  LossWeights weights = default_adapt_weights();
  std::uint64_t seed = 0;

  void validate() const;
};

/// Updates due on clip `index` (0-based) under the schedule above.
std::size_t tta_updates_for_clip(double n_tta, std::size_t index);

struct TtaResult {
  RateSeries rates;
  ModelParams params;
  TrainHistory history;
  std::size_t updates = 0;
};

/// Walks the stream in clip_len windows at `stride`; adapts when due, then
/// reports the in-band peak rate of the unperturbed window at its center.
TtaResult tta_run(const ModelParams& pretrained, const Clip& stream, const TtaConfig& cfg,
                  const Bandlimits& band, const SpectralConfig& spectral);

/// Ground truth on the same window grid as tta_run.
RateSeries window_gt_rates(const Clip& stream, std::size_t clip_len, std::size_t stride);

struct SweepConfig {
  std::vector<double> alphas{0.0, 0.25, 0.5};
  std::size_t folds = 2;
  std::size_t seeds_per_fold = 2;
  GenSpec dataset_spec;
  std::size_t n_clips = 32;
  double source_len_factor = 1.5;
  GenSpec cross_spec;  // the second, shifted evaluation domain
  std::size_t n_cross = 16;
  ModelConfig model;
  TrainConfig train;
  std::uint64_t seed = 0;
  std::size_t jobs = 1;
};

struct SweepRow {
  double alpha = 0.0;
  std::string eval_set;  // "within" or "cross"
  double mae_mean = 0.0;
  double mae_std = 0.0;  // sample std over folds x seeds; 0 for a single model
  std::size_t models = 0;
};

std::vector<SweepRow> poison_sweep(const SweepConfig& cfg);

/// CSV with header alpha,eval_set,mae_mean,mae_std.
std::string sweep_csv(std::span<const SweepRow> rows);

}  // namespace sinc
