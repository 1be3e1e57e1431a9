#include "sinc/train.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <random>
#include <thread>

#include "sinc/config.hpp"
#include "sinc/error.hpp"
#include "sinc/eval.hpp"
#include "sinc/rng.hpp"

namespace sinc {

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train.batch_size must be at least 1");
  if (clip_len < 2) throw ConfigError("train.clip_len must be at least 2");
  if (!(poison_alpha >= 0.0 && poison_alpha <= 1.0)) {
    throw ConfigError("train.poison_alpha must lie in [0, 1]");
  }
  if (!(adam.lr >= 0.0)) throw ConfigError("train.adam.lr must be non-negative");
  spectral.validate();
  band.validate(spectral.fs);
  augment.validate();
  if (clip_len > spectral.nfft) throw ConfigError("train.clip_len exceeds nfft");
}

void PersonalizeConfig::validate() const {
  if (batch_size < 1) throw ConfigError("personalize.batch_size must be at least 1");
  if (window < 2 || stride < 1) throw ConfigError("personalize window/stride must be positive");
  if (!(duration_s > 0.0)) throw ConfigError("personalize.duration_s must be positive");
  spectral.validate();
  band.validate(spectral.fs);
  augment.validate();
}

void TtaConfig::validate() const {
  if (!(n_tta >= 0.0) || !std::isfinite(n_tta)) throw ConfigError("tta.n_tta must be >= 0");
  if (clip_len < 2 || stride < 1 || stride > clip_len) {
    throw ConfigError("tta needs clip_len >= 2 and 1 <= stride <= clip_len");
  }
  if (views < 1) throw ConfigError("tta.views must be at least 1");
  augment.validate();
}

namespace {

struct Sample {
  Clip clip;
  double band_scale = 1.0;
  bool poisoned = false;
};

// One forward/backward pass over the batch and one Adam update.
LossBreakdown optimize_step(ModelParams& params, AdamState& adam, const std::vector<Sample>& batch,
                            const Bandlimits& band, const SpectralConfig& spectral,
                            const LossWeights& weights, std::size_t step) {
  std::vector<ForwardResult> fwd;
  fwd.reserve(batch.size());
  std::vector<std::vector<double>> waveforms;
  std::vector<double> scales;
  for (const Sample& s : batch) {
    fwd.push_back(forward(params, s.clip));
    for (double v : fwd.back().waveform) {
      if (!std::isfinite(v)) throw NumericError("non-finite model output at step " + std::to_string(step));
    }
    waveforms.push_back(fwd.back().waveform);
    scales.push_back(s.band_scale);
  }
  const TotalLoss loss = total_loss(waveforms, band, spectral, weights, scales);
  if (!std::isfinite(loss.breakdown.total)) {
    throw NumericError("non-finite loss at step " + std::to_string(step) +
                       " (bandwidth=" + std::to_string(loss.breakdown.bandwidth) +
                       ", sparsity=" + std::to_string(loss.breakdown.sparsity) +
                       ", variance=" + std::to_string(loss.breakdown.variance) + ")");
  }
  ModelGrads grads = zeros_like(params);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const ModelGrads g = backward(params, fwd[i].cache, loss.d_waveforms[i]);
    auto acc = grads.values();
    const auto src = g.values();
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += src[k];
  }
  try {
    adam_step(params, grads, adam);
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " at step " + std::to_string(step));
  }
  return loss.breakdown;
}

StepRecord record(std::size_t step, std::size_t epoch, const LossBreakdown& loss,
                  const std::vector<Sample>& batch) {
  StepRecord r;
  r.step = step;
  r.epoch = epoch;
  r.loss = loss;
  for (const Sample& s : batch) {
    r.band_scales.push_back(s.band_scale);
    r.poisoned.push_back(s.poisoned);
  }
  return r;
}

using Clock = std::chrono::steady_clock;

std::size_t train_stride(const TrainConfig& cfg) { return std::max<std::size_t>(1, cfg.clip_len / 2); }

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

std::string history_jsonl(const TrainHistory& history) {
  std::string out;
  for (const StepRecord& r : history.steps) {
    Json j;
    j["step"] = r.step;
    j["epoch"] = r.epoch;
    j["bandwidth"] = r.loss.bandwidth;
    j["sparsity"] = r.loss.sparsity;
    j["variance"] = r.loss.variance;
    j["total"] = r.loss.total;
    j["band_scales"] = r.band_scales;
    j["poisoned"] = r.poisoned;
    out += j.dump();
    out += '\n';
  }
  return out;
}

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                  std::span<const Clip> dataset, const GenSpec& negatives) {
  return train_from(init_model(model_cfg), cfg, dataset, negatives);
}

std::size_t train_steps_per_epoch(std::span<const Clip> dataset, const TrainConfig& cfg) {
  std::size_t samples = 0;
  for (const Clip& clip : dataset) {
    samples += std::max<std::size_t>(1, window_count(clip.frames, cfg.clip_len, train_stride(cfg)));
  }
  return (samples + cfg.batch_size - 1) / cfg.batch_size;
}

TrainResult train_from(ModelParams initial, const TrainConfig& cfg, std::span<const Clip> dataset,
                       const GenSpec& negatives) {
  cfg.validate();
  if (dataset.empty()) throw ConfigError("training dataset is empty");
  const std::size_t T = cfg.clip_len;
  const std::size_t need =
      cfg.augment.resample ? resample_source_frames(cfg.augment.resample_hi, T) : T;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (dataset[i].frames < need) {
      throw ConfigError("dataset clip " + std::to_string(i) + " has " +
                        std::to_string(dataset[i].frames) + " frames; training needs " +
                        std::to_string(need));
    }
  }

  TrainResult result{std::move(initial), {}};
  ModelParams& params = result.params;
  AdamState adam = make_adam(params, cfg.adam);

  Rng order_rng = make_rng(cfg.seed, "train.order");
  Rng poison_rng = make_rng(cfg.seed, "train.poison");
  Rng window_rng = make_rng(cfg.seed, "train.window");
  Rng augment_rng = make_rng(cfg.seed, "train.augment");
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t negatives_made = 0;

  const std::size_t n = dataset.size();
  const std::size_t steps_per_epoch = train_steps_per_epoch(dataset, cfg);
  std::vector<std::size_t> order(n);
  std::size_t cursor = n;
  std::size_t step = 0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = Clock::now();
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      std::vector<Sample> batch;
      batch.reserve(cfg.batch_size);
      for (std::size_t slot = 0; slot < cfg.batch_size; ++slot) {
        if (cursor == n) {
          std::iota(order.begin(), order.end(), 0);
          std::shuffle(order.begin(), order.end(), order_rng);
          cursor = 0;
        }
        const Clip& source = dataset[order[cursor++]];
        const std::size_t start =
            std::uniform_int_distribution<std::size_t>(0, source.frames - need)(window_rng);
        // The poison draw happens for every slot so that runs with different
        // alphas share all other random streams.
        const bool poisoned = unit(poison_rng) < cfg.poison_alpha;

        Clip window;
        if (poisoned) {
          GenSpec neg = negatives;
          neg.frames = need;
          neg.width = source.width;
          neg.height = source.height;
          neg.channels = source.channels;
          neg.fps = source.fps;
          Rng neg_rng = make_rng(cfg.seed, "train.negative", negatives_made++);
          window = gen_poisoned(neg, neg_rng);
        } else {
          window = source.window(start, need);
        }
        auto views = augment_batch(window, 1, T, cfg.augment, augment_rng);
        batch.push_back({std::move(views.front().clip), views.front().band_scale, poisoned});
      }
      const LossBreakdown loss =
          optimize_step(params, adam, batch, cfg.band, cfg.spectral, cfg.weights, step);
      result.history.steps.push_back(record(step, epoch, loss, batch));
      ++step;
    }
    result.history.epoch_seconds.push_back(seconds_since(started));
  }
  result.history.params_checksum = params.checksum();
  return result;
}

std::size_t window_count(std::size_t frames, std::size_t window, std::size_t stride) {
  if (frames < window || stride == 0) return 0;
  return (frames - window) / stride + 1;
}

std::vector<Clip> personalization_windows(const Clip& subject, const PersonalizeConfig& cfg) {
  cfg.validate();
  const auto usable = static_cast<std::size_t>(std::lround(cfg.duration_s * subject.fps));
  if (subject.frames < usable) {
    throw InvalidInput("subject clip has " + std::to_string(subject.frames) +
                       " frames; personalization needs " + std::to_string(usable));
  }
  const std::size_t count = window_count(usable, cfg.window, cfg.stride);
  if (count == 0) throw InvalidInput("personalization window is longer than the subject segment");
  std::vector<Clip> windows;
  windows.reserve(count);
  for (std::size_t i = 0; i < count; ++i) windows.push_back(subject.window(i * cfg.stride, cfg.window));
  return windows;
}

TrainResult personalize(const ModelParams& pretrained, const Clip& subject,
                        const PersonalizeConfig& cfg) {
  const std::vector<Clip> windows = personalization_windows(subject, cfg);
  TrainResult result{pretrained, {}};
  ModelParams& params = result.params;
  AdamState adam = make_adam(params, cfg.adam);
  Rng pick_rng = make_rng(cfg.seed, "personalize.pick");
  Rng augment_rng = make_rng(cfg.seed, "personalize.augment");
  std::uniform_int_distribution<std::size_t> pick(0, windows.size() - 1);

  const std::size_t steps_per_epoch = (windows.size() + cfg.batch_size - 1) / cfg.batch_size;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto started = Clock::now();
    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      std::vector<Sample> batch;
      batch.reserve(cfg.batch_size);
      for (std::size_t slot = 0; slot < cfg.batch_size; ++slot) {
        auto views = augment_batch(windows[pick(pick_rng)], 1, cfg.window, cfg.augment, augment_rng);
        batch.push_back({std::move(views.front().clip), views.front().band_scale, false});
      }
      const LossBreakdown loss =
          optimize_step(params, adam, batch, cfg.band, cfg.spectral, cfg.weights, step);
      result.history.steps.push_back(record(step, epoch, loss, batch));
      ++step;
    }
    result.history.epoch_seconds.push_back(seconds_since(started));
  }
  result.history.params_checksum = params.checksum();
  return result;
}

std::size_t tta_updates_for_clip(double n_tta, std::size_t index) {
  if (!(n_tta > 0.0)) return 0;
  if (n_tta >= 1.0) return static_cast<std::size_t>(std::lround(n_tta));
  const auto period = std::max<long>(1, std::lround(1.0 / n_tta));
  return (index + 1) % static_cast<std::size_t>(period) == 0 ? 1 : 0;
}

TtaResult tta_run(const ModelParams& pretrained, const Clip& stream, const TtaConfig& cfg,
                  const Bandlimits& band, const SpectralConfig& spectral) {
  cfg.validate();
  if (stream.frames < cfg.clip_len) {
    throw InvalidInput("stream has " + std::to_string(stream.frames) +
                       " frames, shorter than one clip of " + std::to_string(cfg.clip_len));
  }
  TtaResult result{{}, pretrained, {}, 0};
  ModelParams& params = result.params;
  AdamState adam = make_adam(params, cfg.adam);
  Rng augment_rng = make_rng(cfg.seed, "tta.augment");

  const std::size_t clips = window_count(stream.frames, cfg.clip_len, cfg.stride);
  std::size_t step = 0;
  for (std::size_t i = 0; i < clips; ++i) {
    const std::size_t start = i * cfg.stride;
    const Clip clip = stream.window(start, cfg.clip_len);
    const std::size_t due = tta_updates_for_clip(cfg.n_tta, i);
    for (std::size_t u = 0; u < due; ++u) {
      // Fresh views for every update.
      auto views = augment_batch(clip, cfg.views, cfg.clip_len, cfg.augment, augment_rng);
      std::vector<Sample> batch;
      batch.reserve(views.size());
      for (auto& v : views) batch.push_back({std::move(v.clip), v.band_scale, false});
      const LossBreakdown loss = optimize_step(params, adam, batch, band, spectral, cfg.weights, step);
      result.history.steps.push_back(record(step, i, loss, batch));
      ++step;
      ++result.updates;
    }
    result.rates.times_s.push_back(
        (static_cast<double>(start) + static_cast<double>(cfg.clip_len) / 2.0) / stream.fps);
    result.rates.rates_bpm.push_back(estimate_rate_bpm(predict(params, clip), band, spectral));
  }
  result.history.params_checksum = params.checksum();
  return result;
}

RateSeries window_gt_rates(const Clip& stream, std::size_t clip_len, std::size_t stride) {
  RateSeries out;
  const std::size_t clips = window_count(stream.frames, clip_len, stride);
  for (std::size_t i = 0; i < clips; ++i) {
    const std::size_t start = i * stride;
    out.times_s.push_back((static_cast<double>(start) + static_cast<double>(clip_len) / 2.0) /
                          stream.fps);
    out.rates_bpm.push_back(60.0 * stream.window(start, clip_len).mean_gt_rate_hz());
  }
  return out;
}

namespace {

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

MeanStd mean_std(const std::vector<double>& xs) {
  MeanStd r;
  if (xs.empty()) return r;
  r.mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - r.mean) * (x - r.mean);
    r.std = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return r;
}

}  // namespace

std::vector<SweepRow> poison_sweep(const SweepConfig& cfg) {
  if (cfg.folds < 2) throw ConfigError("sweep.folds must be at least 2");
  if (cfg.seeds_per_fold < 1) throw ConfigError("sweep.seeds_per_fold must be at least 1");
  for (double a : cfg.alphas) {
    if (!(a >= 0.0 && a <= 1.0)) throw ConfigError("sweep alphas must lie in [0, 1]");
  }
  if (cfg.n_clips < cfg.folds) throw ConfigError("sweep needs at least one clip per fold");

  const std::vector<Clip> clips = gen_clips(cfg.dataset_spec, cfg.n_clips, cfg.source_len_factor);
  const std::vector<Clip> cross = gen_clips(cfg.cross_spec, cfg.n_cross, cfg.source_len_factor);

  // Contiguous, equal-sized folds (the last absorbs any remainder).
  const std::size_t fold_size = cfg.n_clips / cfg.folds;
  auto fold_of = [&](std::size_t i) { return std::min(i / fold_size, cfg.folds - 1); };

  struct Job {
    std::size_t alpha_index;
    std::size_t fold;
    std::size_t seed_index;
    double within = 0.0;
    double cross = 0.0;
  };
  std::vector<Job> jobs;
  for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
    for (std::size_t f = 0; f < cfg.folds; ++f) {
      for (std::size_t s = 0; s < cfg.seeds_per_fold; ++s) jobs.push_back({a, f, s});
    }
  }

  auto run = [&](Job& job) {
    std::vector<Clip> train_set;
    std::vector<Clip> held_out;
    for (std::size_t i = 0; i < clips.size(); ++i) {
      (fold_of(i) == job.fold ? held_out : train_set).push_back(clips[i]);
    }
    // Seeds depend on (fold, seed) only, so every alpha starts from the same
    // initialization and sees the same sampling streams.
    const std::size_t replicate = job.fold * cfg.seeds_per_fold + job.seed_index;
    ModelConfig model = cfg.model;
    model.seed = derive_seed(cfg.seed, "sweep.model", replicate);
    TrainConfig tc = cfg.train;
    tc.seed = derive_seed(cfg.seed, "sweep.train", replicate);
    tc.poison_alpha = cfg.alphas[job.alpha_index];
    const TrainResult trained = train(model, tc, train_set, cfg.dataset_spec);
    job.within = evaluate_clips(trained.params, held_out, tc.band, tc.spectral, tc.clip_len).mae;
    job.cross = evaluate_clips(trained.params, cross, tc.band, tc.spectral, tc.clip_len).mae;
  };

  const std::size_t workers = std::clamp<std::size_t>(cfg.jobs, 1, jobs.size());
  if (workers == 1) {
    for (Job& job : jobs) run(job);
  } else {
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
          try {
            run(jobs[i]);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
    }
    pool.clear();
    if (failure) std::rethrow_exception(failure);
  }

  std::vector<SweepRow> rows;
  for (std::size_t a = 0; a < cfg.alphas.size(); ++a) {
    std::vector<double> within;
    std::vector<double> crossed;
    for (const Job& job : jobs) {
      if (job.alpha_index != a) continue;
      within.push_back(job.within);
      crossed.push_back(job.cross);
    }
    const MeanStd w = mean_std(within);
    const MeanStd c = mean_std(crossed);
    rows.push_back({cfg.alphas[a], "within", w.mean, w.std, within.size()});
    rows.push_back({cfg.alphas[a], "cross", c.mean, c.std, crossed.size()});
  }
  return rows;
}

std::string sweep_csv(std::span<const SweepRow> rows) {
  std::string out = "alpha,eval_set,mae_mean,mae_std\n";
  char line[128];
  for (const SweepRow& r : rows) {
    std::snprintf(line, sizeof line, "%.4f,%s,%.6f,%.6f\n", r.alpha, r.eval_set.c_str(), r.mae_mean,
                  r.mae_std);
    out += line;
  }
  return out;
}

}  // namespace sinc
