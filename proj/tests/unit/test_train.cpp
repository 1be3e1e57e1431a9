#include "sinc/train.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "sinc/error.hpp"
#include "sinc/eval.hpp"

using namespace sinc;

namespace {

std::vector<Clip> small_dataset(std::size_t n) { return gen_clips(default_pulse_spec(), n, 1.5); }

TrainConfig quick_config(std::size_t epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 4;
  cfg.seed = 3;
  return cfg;
}

double mean_total(const TrainHistory& h, std::size_t epoch) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const StepRecord& r : h.steps) {
    if (r.epoch != epoch) continue;
    sum += r.loss.total;
    ++n;
  }
  return sum / static_cast<double>(n);
}

// One default 30-epoch run, shared by the tests that need a trained model.
const TrainResult& pretrained() {
  static const TrainResult result = [] {
    GenSpec spec = default_pulse_spec();
    spec.seed = 21;
    const auto clips = gen_clips(spec, 32, 1.5);
    TrainConfig cfg;
    cfg.seed = 22;
    ModelConfig mc;
    mc.seed = 23;
    return train(mc, cfg, clips, spec);
  }();
  return result;
}

}  // namespace

TEST_CASE("epoch arithmetic") {
  CHECK(window_count(600, 120, 60) == 9);
  CHECK(window_count(180, 120, 60) == 2);
  CHECK(window_count(119, 120, 60) == 0);
  CHECK(window_count(120, 120, 60) == 1);
  const auto clips = small_dataset(32);
  CHECK(train_steps_per_epoch(clips, TrainConfig{}) == 8);
  TrainConfig one;
  one.batch_size = 1;
  CHECK(train_steps_per_epoch(clips, one) == 64);
}

TEST_CASE("zero learning rate and zero epochs leave the initialization alone") {
  const auto clips = small_dataset(4);
  ModelConfig mc;
  mc.seed = 9;
  const ModelParams init = init_model(mc);

  TrainConfig cfg = quick_config(5);
  cfg.adam.lr = 0.0;
  const TrainResult frozen = train(mc, cfg, clips, default_pulse_spec());
  CHECK(frozen.params == init);
  CHECK(frozen.history.steps.size() == 5 * 2);

  const TrainResult none = train(mc, quick_config(0), clips, default_pulse_spec());
  CHECK(none.params == init);
  CHECK(none.history.steps.empty());
  CHECK(none.history.params_checksum == init.checksum());
}

TEST_CASE("training is deterministic and records its band scales") {
  const auto clips = small_dataset(6);
  ModelConfig mc;
  const TrainResult a = train(mc, quick_config(2), clips, default_pulse_spec());
  const TrainResult b = train(mc, quick_config(2), clips, default_pulse_spec());
  CHECK(a.params == b.params);
  CHECK(history_jsonl(a.history) == history_jsonl(b.history));
  CHECK(a.history.params_checksum == a.params.checksum());

  bool scaled = false;
  for (std::size_t i = 0; i < a.history.steps.size(); ++i) {
    CHECK(a.history.steps[i].step == i);
    for (double c : a.history.steps[i].band_scales) {
      CHECK(c >= 0.6);
      CHECK(c <= 1.4);
      if (c != 1.0) scaled = true;
    }
  }
  CHECK(scaled);

  TrainConfig other = quick_config(2);
  other.seed = 4;
  CHECK_FALSE(train(mc, other, clips, default_pulse_spec()).params == a.params);

  const std::string jsonl = history_jsonl(a.history);
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == static_cast<long>(a.history.steps.size()));
  CHECK(jsonl.find("\"band_scales\"") != std::string::npos);
}

TEST_CASE("poison mixing follows alpha") {
  const auto clips = small_dataset(8);
  ModelConfig mc;
  for (double alpha : {0.0, 1.0}) {
    TrainConfig cfg = quick_config(1);
    cfg.poison_alpha = alpha;
    cfg.adam.lr = 0.0;
    for (const StepRecord& r : train(mc, cfg, clips, default_pulse_spec()).history.steps) {
      for (bool p : r.poisoned) CHECK(p == (alpha == 1.0));
    }
  }
  TrainConfig half = quick_config(10);
  half.poison_alpha = 0.5;
  half.adam.lr = 0.0;
  std::size_t poisoned = 0;
  std::size_t total = 0;
  for (const StepRecord& r : train(mc, half, clips, default_pulse_spec()).history.steps) {
    for (bool p : r.poisoned) {
      poisoned += p ? 1 : 0;
      ++total;
    }
  }
  // 160 Bernoulli(0.5) draws: four standard deviations is about 25.
  CHECK(std::abs(static_cast<double>(poisoned) - 80.0) < 26.0);
}

TEST_CASE("bad training inputs") {
  ModelConfig mc;
  CHECK_THROWS_AS(train(mc, quick_config(1), std::vector<Clip>{}, default_pulse_spec()), ConfigError);
  const auto short_clips = gen_clips(default_pulse_spec(), 2, 1.0);  // 120 frames, resampling needs 168
  CHECK_THROWS_AS(train(mc, quick_config(1), short_clips, default_pulse_spec()), ConfigError);
  TrainConfig no_resample = quick_config(1);
  no_resample.augment.resample = false;
  CHECK_NOTHROW(train(mc, no_resample, short_clips, default_pulse_spec()));

  // Weights large enough that the spatial projection overflows.
  ModelParams blown = init_model(mc);
  for (double& w : blown.spatial()) w = 1e306;
  TrainConfig cfg = quick_config(1);
  try {
    train_from(blown, cfg, small_dataset(2), default_pulse_spec());
    FAIL("expected a NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("step 0") != std::string::npos);
  }
}

TEST_CASE("thirty default epochs at least halve the loss") {
  const TrainHistory& h = pretrained().history;
  REQUIRE(h.epoch_seconds.size() == 30);
  const double first = mean_total(h, 0);
  const double last = mean_total(h, 29);
  CAPTURE(first);
  CAPTURE(last);
  CHECK(last < 0.5 * first);
}

TEST_CASE("fully poisoned training stays far behind clean training") {
  // Negatives still teach the content-free part of the loss (keep power in
  // band), which already suppresses the out-of-band distractor, so alpha = 1
  // beats an untrained model here. It must still trail clean training.
  GenSpec spec = default_pulse_spec();
  spec.seed = 31;
  const auto clips = gen_clips(spec, 32, 1.5);
  GenSpec held = default_pulse_spec();
  held.seed = 32;
  const auto eval = gen_clips(held, 16, 1.0);

  for (std::uint64_t s = 0; s < 3; ++s) {
    ModelConfig mc;
    mc.seed = 100 + s;
    TrainConfig cfg;
    cfg.seed = 200 + s;
    cfg.epochs = 10;
    const double clean = evaluate_clips(train(mc, cfg, clips, spec).params, eval, cfg.band, cfg.spectral).mae;
    cfg.poison_alpha = 1.0;
    const double poisoned =
        evaluate_clips(train(mc, cfg, clips, spec).params, eval, cfg.band, cfg.spectral).mae;
    const double untrained = evaluate_clips(init_model(mc), eval, cfg.band, cfg.spectral).mae;
    MESSAGE("seed " << s << ": untrained " << untrained << ", alpha=1 " << poisoned << ", alpha=0 " << clean);
    CHECK(poisoned > 2.0 * clean);
  }
}

TEST_CASE("personalization windows and edge cases") {
  PersonalizeConfig cfg;
  GenSpec spec = default_pulse_spec();
  spec.frames = 900;
  Rng rng(4);
  const Clip subject = gen_positive(spec, rng);
  const auto windows = personalization_windows(subject, cfg);
  REQUIRE(windows.size() == 9);
  CHECK(windows[8].data == subject.window(480, 120).data);

  GenSpec too_short = spec;
  too_short.frames = 599;
  Rng r2(5);
  CHECK_THROWS_AS(personalize(pretrained().params, gen_positive(too_short, r2), cfg), InvalidInput);

  PersonalizeConfig none = cfg;
  none.epochs = 0;
  CHECK(personalize(pretrained().params, subject, none).params == pretrained().params);

  PersonalizeConfig two = cfg;
  two.epochs = 2;
  const TrainResult a = personalize(pretrained().params, subject, two);
  const TrainResult b = personalize(pretrained().params, subject, two);
  CHECK(a.params == b.params);
  CHECK(a.history.steps.size() == 2);
  for (const StepRecord& r : a.history.steps) {
    CHECK(r.band_scales.size() == 20);
    for (double c : r.band_scales) CHECK(c == 1.0);
  }
}

TEST_CASE("personalization lowers the loss on a shifted subject") {
  GenSpec spec = default_pulse_spec();
  spec.frames = 600;
  spec.noise_sigma = 3.0;
  spec.carrier_mask_frac = 0.3;
  spec.seed = 41;
  Rng rng = make_rng(spec.seed, "subject");
  const Clip subject = gen_positive(spec, rng);
  const PersonalizeConfig cfg;
  const auto windows = personalization_windows(subject, cfg);

  auto subject_loss = [&](const ModelParams& p) {
    std::vector<std::vector<double>> w;
    for (const Clip& c : windows) w.push_back(predict(p, c));
    return total_loss(w, cfg.band, cfg.spectral, cfg.weights).breakdown.total;
  };
  const ModelParams before = pretrained().params;
  const TrainResult adapted = personalize(before, subject, cfg);
  CHECK(pretrained().params == before);
  CHECK(adapted.history.steps.size() == 50);
  CHECK(subject_loss(adapted.params) < subject_loss(before));
}

TEST_CASE("test-time update schedule") {
  auto count = [](double n, std::size_t clips) {
    std::size_t total = 0;
    for (std::size_t i = 0; i < clips; ++i) total += tta_updates_for_clip(n, i);
    return total;
  };
  CHECK(count(0.5, 10) == 5);
  CHECK(count(1.0 / 25.0, 100) == 4);
  CHECK(count(1.0, 10) == 10);
  CHECK(count(3.0, 10) == 30);
  CHECK(count(0.0, 10) == 0);
  CHECK(tta_updates_for_clip(0.5, 0) == 0);
  CHECK(tta_updates_for_clip(0.5, 1) == 1);
}

TEST_CASE("test-time adaptation with updates off is frozen inference") {
  GenSpec spec = default_pulse_spec();
  spec.frames = 600;
  Rng rng(6);
  const Clip stream = gen_positive(spec, rng);
  TtaConfig cfg;
  cfg.n_tta = 0.0;
  const Bandlimits band = pulse_band();
  const SpectralConfig sc;
  const TtaResult frozen = tta_run(pretrained().params, stream, cfg, band, sc);
  CHECK(frozen.updates == 0);
  CHECK(frozen.params == pretrained().params);
  REQUIRE(frozen.rates.rates_bpm.size() == 9);
  for (std::size_t i = 0; i < 9; ++i) {
    const Clip clip = stream.window(i * 60, 120);
    CHECK(frozen.rates.rates_bpm[i] == estimate_rate_bpm(predict(pretrained().params, clip), band, sc));
    CHECK(frozen.rates.times_s[i] == doctest::Approx(2.0 + 2.0 * static_cast<double>(i)));
  }
  const RateSeries gt = window_gt_rates(stream, 120, 60);
  CHECK(gt.times_s == frozen.rates.times_s);

  cfg.n_tta = 0.5;
  cfg.views = 4;
  const TtaResult half = tta_run(pretrained().params, stream, cfg, band, sc);
  CHECK(half.updates == 4);
  CHECK(half.history.steps.size() == 4);
  CHECK(half.rates.rates_bpm[0] == frozen.rates.rates_bpm[0]);
  CHECK_FALSE(half.params == pretrained().params);

  GenSpec tiny = default_pulse_spec();
  tiny.frames = 100;
  Rng r2(1);
  CHECK_THROWS_AS(tta_run(pretrained().params, gen_positive(tiny, r2), cfg, band, sc), InvalidInput);
}

TEST_CASE("poison sweep table shape") {
  SweepConfig cfg;
  cfg.alphas = {0.0};
  cfg.folds = 2;
  cfg.seeds_per_fold = 1;
  cfg.n_clips = 4;
  cfg.n_cross = 2;
  cfg.train.epochs = 1;
  cfg.train.batch_size = 2;
  const auto rows = poison_sweep(cfg);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].eval_set == "within");
  CHECK(rows[1].eval_set == "cross");
  CHECK(rows[0].mae_std >= 0.0);
  CHECK(rows[0].models == 2);

  cfg.alphas = {0.0, 0.5, 0.9};
  cfg.folds = 2;
  cfg.seeds_per_fold = 1;
  cfg.jobs = 2;
  const auto three = poison_sweep(cfg);
  CHECK(three.size() == 6);
  const std::string csv = sweep_csv(three);
  CHECK(csv.rfind("alpha,eval_set,mae_mean,mae_std\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  CHECK(csv.find("0.9000,cross,") != std::string::npos);

  // Parallel and serial runs agree exactly.
  SweepConfig serial = cfg;
  serial.jobs = 1;
  CHECK(sweep_csv(poison_sweep(serial)) == csv);

  SweepConfig bad = cfg;
  bad.alphas = {1.5};
  CHECK_THROWS_AS(poison_sweep(bad), ConfigError);
}

TEST_CASE("sweep CSV formatting") {
  const SweepRow lone{0.25, "within", 3.0, 0.0, 1};
  CHECK(sweep_csv(std::vector<SweepRow>{lone}) ==
        "alpha,eval_set,mae_mean,mae_std\n0.2500,within,3.000000,0.000000\n");
}
