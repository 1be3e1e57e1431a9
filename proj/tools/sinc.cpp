// Command-line front end: sinc <gen|train|personalize|tta|poison-sweep|eval>.
// Exit status: 0 on success, 1 on validation errors, 2 on runtime failures.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "sinc/config.hpp"
#include "sinc/error.hpp"
#include "sinc/eval.hpp"
#include "sinc/io.hpp"
#include "sinc/model.hpp"
#include "sinc/synth.hpp"
#include "sinc/train.hpp"

namespace fs = std::filesystem;
using namespace sinc;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  std::string out = "out";
  std::string dataset;
  std::string checkpoint;
};

RunConfig load(const CommonOptions& opt) {
  RunConfig rc;
  if (!opt.config.empty()) {
    if (!fs::exists(opt.config)) throw ConfigError(opt.config + ": config file not found");
    rc = load_run_config(opt.config);
  }
  if (opt.seed) rc.seed = *opt.seed;
  if (!opt.dataset.empty()) rc.dataset = opt.dataset;
  if (!opt.checkpoint.empty()) rc.checkpoint = opt.checkpoint;
  rc.sweep.jobs = opt.jobs;
  rc.resolve();
  return rc;
}

void write_json(const fs::path& path, const Json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

Json metrics_to_json(const Metrics& m) { return Json::parse(metrics_json(m)); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void log(const std::string& line) { std::cerr << "sinc: " << line << "\n"; }

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

const fs::path& require_path(const std::optional<fs::path>& path, const char* what,
                             const char* flag) {
  if (!path) throw ConfigError(std::string("no ") + what + " given (pass " + flag + ")");
  if (!fs::exists(*path)) throw IoError(path->string() + ": " + what + " not found");
  return *path;
}

std::vector<Clip> held_out_clips(const RunConfig& rc) {
  return gen_clips(rc.eval_generator, rc.n_eval, 1.0);
}

void write_clip_rates(const fs::path& dir, const ClipRates& rates, double spacing_s) {
  write_rate_csv(dir / "pred_rates.csv", as_series(rates.pred_bpm, spacing_s));
  write_rate_csv(dir / "gt_rates.csv", as_series(rates.gt_bpm, spacing_s));
}

int cmd_gen(const CommonOptions& opt) {
  const RunConfig rc = load(opt);
  const fs::path out = opt.out;
  const DatasetManifest m = gen_dataset(rc.generator, rc.n_clips, rc.source_len_factor, out);
  std::cout << "generated " << m.entries.size() << " clips of "
            << (m.entries.empty() ? 0 : m.entries.front().frames) << " frames at "
            << rc.generator.fps << " fps, rates " << rc.generator.rate_lo_hz << "-"
            << rc.generator.rate_hi_hz << " Hz, band [" << rc.band.low_hz << ", "
            << rc.band.high_hz << "] Hz, seed " << rc.seed << "\n"
            << "manifest: " << (out / "manifest.json").string() << "\n";
  return 0;
}

int cmd_train(const CommonOptions& opt) {
  const RunConfig rc = load(opt);
  const fs::path manifest_path = require_path(rc.dataset, "dataset manifest", "--dataset");
  const std::vector<Clip> dataset = load_dataset(read_manifest(manifest_path));
  const std::vector<Clip> held_out = held_out_clips(rc);
  const fs::path out = opt.out;

  const ModelParams initial = init_model(rc.model);
  const Metrics before = evaluate_clips(initial, held_out, rc.band, rc.spectral, rc.train.clip_len);
  Stopwatch clock;
  const TrainResult result = train_from(initial, rc.train, dataset, rc.generator);
  log("trained " + std::to_string(result.history.steps.size()) + " steps in " +
      std::to_string(clock.seconds()) + " s");
  for (std::size_t e = 0; e < result.history.epoch_seconds.size(); ++e) {
    log("epoch " + std::to_string(e) + ": " + std::to_string(result.history.epoch_seconds[e]) + " s");
  }

  const ClipRates rates = clip_rates(result.params, held_out, rc.band, rc.spectral, rc.train.clip_len);
  const Metrics after = metrics_from_pairs(rates.pred_bpm, rates.gt_bpm);

  save_checkpoint(out / "model.ckpt", result.params);
  write_file_atomic(out / "history.jsonl", history_jsonl(result.history));
  write_clip_rates(out, rates, static_cast<double>(rc.train.clip_len) / rc.spectral.fs);
  Json j;
  j["untrained"] = metrics_to_json(before);
  j["trained"] = metrics_to_json(after);
  j["steps"] = result.history.steps.size();
  j["params_checksum"] = hex64(result.history.params_checksum);
  write_json(out / "metrics.json", j);
  std::cout << "held-out MAE " << before.mae << " -> " << after.mae << " bpm\n";
  return 0;
}

int cmd_personalize(const CommonOptions& opt) {
  const RunConfig rc = load(opt);
  const ModelParams pretrained =
      load_checkpoint(require_path(rc.checkpoint, "checkpoint", "--checkpoint"));
  Rng subject_rng = make_rng(rc.subject.seed, "subject");
  const Clip subject = quantize_to_f32(gen_positive(rc.subject, subject_rng));
  const PersonalizeConfig& pc = rc.personalize;
  const std::vector<Clip> windows = personalization_windows(subject, pc);

  // Held-out subject material: every window after the adaptation segment.
  const std::size_t used = windows.size() == 0 ? 0 : (windows.size() - 1) * pc.stride + pc.window;
  std::vector<Clip> subject_eval;
  for (std::size_t s = used; s + pc.window <= subject.frames; s += pc.stride) {
    subject_eval.push_back(subject.window(s, pc.window));
  }
  if (subject_eval.empty()) {
    throw ConfigError("personalize.subject.frames leaves no held-out windows after duration_s");
  }

  const auto subject_loss = [&](const ModelParams& p) {
    std::vector<std::vector<double>> ys;
    for (const Clip& w : windows) ys.push_back(predict(p, w));
    return total_loss(ys, pc.band, pc.spectral, pc.weights).breakdown;
  };

  Stopwatch clock;
  const TrainResult adapted = personalize(pretrained, subject, pc);
  log("personalized " + std::to_string(adapted.history.steps.size()) + " steps in " +
      std::to_string(clock.seconds()) + " s");

  const std::vector<Clip> original = held_out_clips(rc);
  const ForgettingReport report = forgetting_report(pretrained, adapted.params, original,
                                                    subject_eval, rc.band, rc.spectral, pc.window);
  const LossBreakdown loss_before = subject_loss(pretrained);
  const LossBreakdown loss_after = subject_loss(adapted.params);

  const fs::path out = opt.out;
  save_checkpoint(out / "model.ckpt", adapted.params);
  write_file_atomic(out / "history.jsonl", history_jsonl(adapted.history));
  const ClipRates rates = clip_rates(adapted.params, subject_eval, rc.band, rc.spectral, pc.window);
  write_clip_rates(out, rates, static_cast<double>(pc.stride) / rc.spectral.fs);
  Json j;
  j["windows"] = windows.size();
  j["subject_loss_before"] = loss_before.total;
  j["subject_loss_after"] = loss_after.total;
  j["forgetting"]["original_on_original"] = metrics_to_json(report.original_on_original);
  j["forgetting"]["original_on_new"] = metrics_to_json(report.original_on_new);
  j["forgetting"]["adapted_on_original"] = metrics_to_json(report.adapted_on_original);
  j["forgetting"]["adapted_on_new"] = metrics_to_json(report.adapted_on_new);
  write_json(out / "metrics.json", j);
  std::cout << "subject MAE " << report.original_on_new.mae << " -> " << report.adapted_on_new.mae
            << " bpm; original-domain MAE " << report.original_on_original.mae << " -> "
            << report.adapted_on_original.mae << " bpm\n";
  return 0;
}

int cmd_tta(const CommonOptions& opt) {
  const RunConfig rc = load(opt);
  const ModelParams pretrained =
      load_checkpoint(require_path(rc.checkpoint, "checkpoint", "--checkpoint"));
  Rng stream_rng = make_rng(rc.stream.seed, "stream");
  const Clip stream = quantize_to_f32(gen_positive(rc.stream, stream_rng));

  TtaConfig frozen_cfg = rc.tta;
  frozen_cfg.n_tta = 0.0;
  const TtaResult frozen = tta_run(pretrained, stream, frozen_cfg, rc.band, rc.spectral);
  Stopwatch clock;
  const TtaResult adapted = tta_run(pretrained, stream, rc.tta, rc.band, rc.spectral);
  log("adapted with " + std::to_string(adapted.updates) + " updates in " +
      std::to_string(clock.seconds()) + " s");
  const RateSeries gt = window_gt_rates(stream, rc.tta.clip_len, rc.tta.stride);

  const fs::path out = opt.out;
  write_rate_csv(out / "tta_rates.csv", adapted.rates);
  write_rate_csv(out / "frozen_rates.csv", frozen.rates);
  write_rate_csv(out / "gt_rates.csv", gt);
  const Metrics m_frozen = rate_metrics(frozen.rates, gt);
  const Metrics m_adapted = rate_metrics(adapted.rates, gt);
  Json j;
  j["n_tta"] = rc.tta.n_tta;
  j["updates"] = adapted.updates;
  j["frozen"] = metrics_to_json(m_frozen);
  j["adapted"] = metrics_to_json(m_adapted);
  write_json(out / "metrics.json", j);
  std::cout << "stream MAE frozen " << m_frozen.mae << " bpm, adapted " << m_adapted.mae
            << " bpm (" << adapted.updates << " updates)\n";
  return 0;
}

int cmd_poison_sweep(const CommonOptions& opt) {
  const RunConfig rc = load(opt);
  Stopwatch clock;
  const std::vector<SweepRow> rows = poison_sweep(rc.sweep);
  log("sweep finished in " + std::to_string(clock.seconds()) + " s");
  const std::string csv = sweep_csv(rows);
  write_file_atomic(fs::path(opt.out) / "poison_sweep.csv", csv);
  std::cout << csv;
  return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& gt_path, std::optional<double> tol,
             const std::string& out) {
  const Metrics m = rate_metrics(read_rate_csv(pred_path), read_rate_csv(gt_path), tol);
  const std::string text = metrics_json(m);
  if (!out.empty()) write_file_atomic(fs::path(out) / "metrics.json", text + "\n");
  std::cout << text << "\n";
  return 0;
}

void add_common(CLI::App* cmd, CommonOptions& opt, bool needs_dataset, bool needs_checkpoint) {
  cmd->add_option("--config", opt.config, "run config (JSON, schema sinc.config/1)");
  cmd->add_option("--seed", opt.seed, "global seed; overrides the config");
  cmd->add_option("--jobs", opt.jobs, "worker cap for independent jobs")->check(CLI::PositiveNumber);
  cmd->add_option("--out", opt.out, "output directory")->capture_default_str();
  if (needs_dataset) cmd->add_option("--dataset", opt.dataset, "dataset manifest.json");
  if (needs_checkpoint) cmd->add_option("--checkpoint", opt.checkpoint, "model checkpoint");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sinc: unsupervised rate estimation from periodic-signal clips"};
  app.require_subcommand(1);

  CommonOptions opt;
  auto* gen = app.add_subcommand("gen", "generate a synthetic dataset and manifest");
  add_common(gen, opt, false, false);
  auto* train_cmd = app.add_subcommand("train", "train a model from scratch on a dataset");
  add_common(train_cmd, opt, true, false);
  auto* pers = app.add_subcommand("personalize", "finetune a checkpoint on one subject");
  add_common(pers, opt, false, true);
  auto* tta = app.add_subcommand("tta", "test-time adaptation over a stream");
  add_common(tta, opt, false, true);
  auto* sweep = app.add_subcommand("poison-sweep", "MAE versus poisoning rate");
  add_common(sweep, opt, false, false);

  std::string pred_path;
  std::string gt_path;
  std::optional<double> tolerance;
  std::string eval_out;
  auto* eval = app.add_subcommand("eval", "score a predicted rate CSV against ground truth");
  eval->add_option("pred", pred_path, "predicted rates CSV")->required();
  eval->add_option("gt", gt_path, "ground-truth rates CSV")->required();
  eval->add_option("--tolerance", tolerance, "max time offset (s) when pairing samples");
  eval->add_option("--out", eval_out, "directory for metrics.json");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (*gen) return cmd_gen(opt);
    if (*train_cmd) return cmd_train(opt);
    if (*pers) return cmd_personalize(opt);
    if (*tta) return cmd_tta(opt);
    if (*sweep) return cmd_poison_sweep(opt);
    if (*eval) return cmd_eval(pred_path, gt_path, tolerance, eval_out);
  } catch (const ConfigError& e) {
    std::cerr << "sinc: error: " << e.what() << "\n";
    return 1;
  } catch (const InvalidInput& e) {
    std::cerr << "sinc: error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "sinc: error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
