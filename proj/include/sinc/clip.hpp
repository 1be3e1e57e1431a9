#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace sinc {

enum class ClipLabel { kPositive, kPoisoned };

/// T x W x H x C tensor of pixel traces, stored frame-major:
/// data[((t * W + w) * H + h) * C + c].
struct Clip {
  std::size_t frames = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::size_t channels = 0;
  double fps = 30.0;
  std::vector<double> data;
  std::optional<std::vector<double>> gt_rate_hz;  // per frame; positives only
  ClipLabel label = ClipLabel::kPositive;

  Clip() = default;
  Clip(std::size_t t, std::size_t w, std::size_t h, std::size_t c, double fps_hz)
      : frames(t), width(w), height(h), channels(c), fps(fps_hz), data(t * w * h * c, 0.0) {}

  std::size_t frame_size() const { return width * height * channels; }
  std::size_t index(std::size_t t, std::size_t w, std::size_t h, std::size_t c) const {
    return ((t * width + w) * height + h) * channels + c;
  }
  double& at(std::size_t t, std::size_t w, std::size_t h, std::size_t c) {
    return data[index(t, w, h, c)];
  }
  double at(std::size_t t, std::size_t w, std::size_t h, std::size_t c) const {
    return data[index(t, w, h, c)];
  }
  std::span<const double> frame(std::size_t t) const {
    return std::span<const double>(data).subspan(t * frame_size(), frame_size());
  }
  std::span<double> frame(std::size_t t) {
    return std::span<double>(data).subspan(t * frame_size(), frame_size());
  }

  /// Throws InvalidInput when shapes, values, or metadata are inconsistent.
  void validate() const;

  /// Frames [start, start + count), metadata sliced alongside.
  Clip window(std::size_t start, std::size_t count) const;

  /// Mean of the ground-truth trace in Hz; throws if absent.
  double mean_gt_rate_hz() const;

  /// Per-frame average over all pixels and channels.
  std::vector<double> spatial_mean_trace() const;
};

}  // namespace sinc
