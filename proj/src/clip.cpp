#include "sinc/clip.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "sinc/error.hpp"

namespace sinc {

void Clip::validate() const {
  if (frames < 2) throw InvalidInput("clip needs at least 2 frames");
  if (width == 0 || height == 0 || channels == 0) throw InvalidInput("clip has an empty dimension");
  if (data.size() != frames * frame_size()) throw InvalidInput("clip data size mismatch");
  if (!(fps > 0.0) || !std::isfinite(fps)) throw InvalidInput("clip frame rate must be positive");
  for (double v : data) {
    if (!std::isfinite(v)) throw InvalidInput("clip contains a non-finite value");
  }
  if (gt_rate_hz.has_value() != (label == ClipLabel::kPositive)) {
    throw InvalidInput("ground truth must be present exactly for positive clips");
  }
  if (gt_rate_hz && gt_rate_hz->size() != frames) {
    throw InvalidInput("ground-truth trace length differs from frame count");
  }
}

Clip Clip::window(std::size_t start, std::size_t count) const {
  if (start + count > frames) {
    throw InvalidInput("window [" + std::to_string(start) + ", " + std::to_string(start + count) +
                       ") exceeds clip of " + std::to_string(frames) + " frames");
  }
  Clip out(count, width, height, channels, fps);
  out.label = label;
  const auto first = data.begin() + static_cast<long>(start * frame_size());
  std::copy(first, first + static_cast<long>(count * frame_size()), out.data.begin());
  if (gt_rate_hz) {
    out.gt_rate_hz.emplace(gt_rate_hz->begin() + static_cast<long>(start),
                           gt_rate_hz->begin() + static_cast<long>(start + count));
  }
  return out;
}

double Clip::mean_gt_rate_hz() const {
  if (!gt_rate_hz || gt_rate_hz->empty()) throw InvalidInput("clip carries no ground truth");
  return std::accumulate(gt_rate_hz->begin(), gt_rate_hz->end(), 0.0) /
         static_cast<double>(gt_rate_hz->size());
}

std::vector<double> Clip::spatial_mean_trace() const {
  std::vector<double> trace(frames, 0.0);
  const std::size_t fsz = frame_size();
  for (std::size_t t = 0; t < frames; ++t) {
    const auto f = frame(t);
    trace[t] = std::accumulate(f.begin(), f.end(), 0.0) / static_cast<double>(fsz);
  }
  return trace;
}

}  // namespace sinc
