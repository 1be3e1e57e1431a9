#include "sinc/eval.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "sinc/config.hpp"
#include "sinc/error.hpp"
#include "sinc/io.hpp"

namespace sinc {

Metrics metrics_from_pairs(std::span<const double> pred, std::span<const double> gt) {
  if (pred.size() != gt.size()) throw InvalidInput("metrics: series lengths differ");
  if (pred.empty()) throw InvalidInput("no overlapping samples");
  Metrics m;
  m.n = pred.size();
  const double n = static_cast<double>(m.n);
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - gt[i];
    abs_sum += std::abs(e);
    sq_sum += e * e;
  }
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);

  const double mp = std::accumulate(pred.begin(), pred.end(), 0.0) / n;
  const double mg = std::accumulate(gt.begin(), gt.end(), 0.0) / n;
  double cov = 0.0;
  double vp = 0.0;
  double vg = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    cov += (pred[i] - mp) * (gt[i] - mg);
    vp += (pred[i] - mp) * (pred[i] - mp);
    vg += (gt[i] - mg) * (gt[i] - mg);
  }
  if (vp > 0.0 && vg > 0.0) m.pearson_r = std::clamp(cov / std::sqrt(vp * vg), -1.0, 1.0);
  return m;
}

Metrics rate_metrics(const RateSeries& pred, const RateSeries& gt, std::optional<double> tolerance_s) {
  if (pred.times_s.size() != pred.rates_bpm.size() || gt.times_s.size() != gt.rates_bpm.size()) {
    throw InvalidInput("rate series times and rates differ in length");
  }
  if (pred.times_s.empty() || gt.times_s.empty()) throw InvalidInput("no overlapping samples");
  double tol = 0.0;
  if (tolerance_s) {
    tol = *tolerance_s;
  } else if (gt.times_s.size() > 1) {
    double hop = gt.times_s[1] - gt.times_s[0];
    for (std::size_t i = 2; i < gt.times_s.size(); ++i) {
      hop = std::min(hop, gt.times_s[i] - gt.times_s[i - 1]);
    }
    tol = hop / 2.0;
  }
  tol += 1e-9;

  std::vector<double> p;
  std::vector<double> g;
  for (std::size_t i = 0; i < pred.times_s.size(); ++i) {
    const double t = pred.times_s[i];
    const auto it = std::lower_bound(gt.times_s.begin(), gt.times_s.end(), t);
    std::size_t best = gt.times_s.size();
    double best_dist = tol;
    for (auto cand : {it, it == gt.times_s.begin() ? it : it - 1}) {
      if (cand == gt.times_s.end()) continue;
      const double d = std::abs(*cand - t);
      if (d <= best_dist) {
        best_dist = d;
        best = static_cast<std::size_t>(cand - gt.times_s.begin());
      }
    }
    if (best < gt.times_s.size()) {
      p.push_back(pred.rates_bpm[i]);
      g.push_back(gt.rates_bpm[best]);
    }
  }
  if (p.empty()) throw InvalidInput("no overlapping samples");
  return metrics_from_pairs(p, g);
}

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

RowMatrix centered(const MotionMatrix& motion) {
  if (motion.rows < 2 || motion.cols == 0 || motion.data.size() != motion.rows * motion.cols) {
    throw InvalidInput("motion matrix has an inconsistent shape");
  }
  for (double v : motion.data) {
    if (!std::isfinite(v)) throw InvalidInput("motion matrix contains a non-finite value");
  }
  RowMatrix x = Eigen::Map<const RowMatrix>(motion.data.data(), static_cast<Eigen::Index>(motion.rows),
                                            static_cast<Eigen::Index>(motion.cols));
  x.rowwise() -= x.colwise().mean();
  return x;
}

}  // namespace

std::vector<double> zca_whiten(const MotionMatrix& motion, double ridge) {
  const RowMatrix x = centered(motion);
  const Eigen::MatrixXd cov = (x.transpose() * x) / static_cast<double>(motion.rows - 1);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("ZCA eigendecomposition failed");
  const Eigen::VectorXd scale =
      (eig.eigenvalues().array().max(0.0) + ridge).rsqrt().matrix();
  const Eigen::MatrixXd w = eig.eigenvectors() * scale.asDiagonal() * eig.eigenvectors().transpose();
  const RowMatrix comps = x * w;
  return std::vector<double>(comps.data(), comps.data() + comps.size());
}

std::vector<double> zca_baseline(const MotionMatrix& motion, const Bandlimits& band,
                                 const SpectralConfig& spectral) {
  const std::vector<double> comps = zca_whiten(motion);
  const std::size_t T = motion.rows;
  const std::size_t P = motion.cols;
  SpectralConfig cfg = spectral;
  cfg.nfft = std::max(cfg.nfft, T);

  std::vector<std::vector<double>> columns(P, std::vector<double>(T));
  std::vector<double> scores(P);
  for (std::size_t c = 0; c < P; ++c) {
    for (std::size_t t = 0; t < T; ++t) columns[c][t] = comps[t * P + c];
    scores[c] = snr(psd(columns[c], cfg), band);
  }
  std::vector<std::size_t> order(P);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  const std::size_t keep = std::min<std::size_t>(3, P);

  const auto& top = columns[order[0]];
  std::vector<double> out(T, 0.0);
  for (std::size_t r = 0; r < keep; ++r) {
    const auto& col = columns[order[r]];
    double dot = 0.0;
    for (std::size_t t = 0; t < T; ++t) dot += col[t] * top[t];
    const double sign = dot < 0.0 ? -1.0 : 1.0;
    for (std::size_t t = 0; t < T; ++t) out[t] += sign * col[t] / static_cast<double>(keep);
  }
  return out;
}

ClipRates clip_rates(const ModelParams& params, std::span<const Clip> clips, const Bandlimits& band,
                     const SpectralConfig& spectral, std::size_t frames) {
  ClipRates out;
  for (const Clip& clip : clips) {
    const std::size_t n = frames == 0 ? clip.frames : frames;
    const Clip view = n == clip.frames ? clip : clip.window(0, n);
    out.pred_bpm.push_back(estimate_rate_bpm(predict(params, view), band, spectral));
    out.gt_bpm.push_back(60.0 * view.mean_gt_rate_hz());
  }
  return out;
}

Metrics evaluate_clips(const ModelParams& params, std::span<const Clip> clips,
                       const Bandlimits& band, const SpectralConfig& spectral, std::size_t frames) {
  const ClipRates r = clip_rates(params, clips, band, spectral, frames);
  return metrics_from_pairs(r.pred_bpm, r.gt_bpm);
}

RateSeries as_series(std::span<const double> rates_bpm, double spacing_s) {
  RateSeries s;
  for (std::size_t i = 0; i < rates_bpm.size(); ++i) {
    s.times_s.push_back(static_cast<double>(i) * spacing_s);
    s.rates_bpm.push_back(rates_bpm[i]);
  }
  return s;
}

ForgettingReport forgetting_report(const ModelParams& original, const ModelParams& adapted,
                                   std::span<const Clip> original_set,
                                   std::span<const Clip> new_set, const Bandlimits& band,
                                   const SpectralConfig& spectral, std::size_t frames) {
  const ModelConfig& a = original.config();
  const ModelConfig& b = adapted.config();
  if (a.width != b.width || a.height != b.height || a.channels != b.channels ||
      a.layers != b.layers) {
    throw InvalidInput("forgetting_report: models have different architectures");
  }
  return {evaluate_clips(original, original_set, band, spectral, frames),
          evaluate_clips(original, new_set, band, spectral, frames),
          evaluate_clips(adapted, original_set, band, spectral, frames),
          evaluate_clips(adapted, new_set, band, spectral, frames)};
}

std::string rate_csv(const RateSeries& series) {
  std::string out = "time_s,rate_bpm\n";
  char line[96];
  for (std::size_t i = 0; i < series.times_s.size(); ++i) {
    std::snprintf(line, sizeof line, "%.6f,%.6f\n", series.times_s[i], series.rates_bpm[i]);
    out += line;
  }
  return out;
}

void write_rate_csv(const std::filesystem::path& path, const RateSeries& series) {
  write_file_atomic(path, rate_csv(series));
}

RateSeries read_rate_csv(const std::filesystem::path& path) {
  std::istringstream in(read_file(path));
  std::string line;
  std::size_t line_no = 0;
  RateSeries s;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1) {
      if (line != "time_s,rate_bpm") {
        throw IoError(path.string() + ":1: expected header 'time_s,rate_bpm'");
      }
      continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos || line.find(',', comma + 1) != std::string::npos) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected two columns");
    }
    try {
      std::size_t used = 0;
      const std::string a = line.substr(0, comma);
      const std::string b = line.substr(comma + 1);
      const double t = std::stod(a, &used);
      if (used != a.size()) throw std::invalid_argument("time");
      const double r = std::stod(b, &used);
      if (used != b.size()) throw std::invalid_argument("rate");
      if (!s.times_s.empty() && !(t > s.times_s.back())) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": times must increase");
      }
      s.times_s.push_back(t);
      s.rates_bpm.push_back(r);
    } catch (const std::logic_error&) {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": not a number");
    }
  }
  if (line_no == 0) throw IoError(path.string() + ":1: empty file");
  return s;
}

std::string metrics_json(const Metrics& m) {
  Json j;
  j["mae"] = m.mae;
  j["rmse"] = m.rmse;
  if (m.pearson_r) {
    j["pearson_r"] = *m.pearson_r;
  } else {
    j["pearson_r"] = nullptr;
  }
  j["n"] = m.n;
  return j.dump();
}

}  // namespace sinc
