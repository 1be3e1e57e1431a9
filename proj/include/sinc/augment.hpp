#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sinc/clip.hpp"
#include "sinc/rng.hpp"

namespace sinc {

struct AugmentConfig {
  bool resample = true;
  bool crop = true;
  bool flip = true;
  bool reverse = true;
  bool illumination = true;
  bool pixel_noise = true;

  double pixel_noise_sigma = 2.0;  // on the 0-255 image scale
  double illum_sigma = 10.0;
  double flip_p = 0.5;
  double crop_min_frac = 0.5;
  double reverse_p = 0.5;
  double resample_lo = 0.6;
  double resample_hi = 1.4;

  void validate() const;

  /// Everything off.
  static AugmentConfig none();
  /// Finetuning on one subject: all but pixel noise and frequency resampling.
  static AugmentConfig personalization();
  /// Test-time views: flip, illumination, crop, and time reversal.
  static AugmentConfig test_time();
};

struct AugmentOutcome {
  Clip clip;
  double band_scale = 1.0;  // c when frequency resampling was applied
  std::vector<std::string> applied;
};

Clip gaussian_pixel_noise(const Clip& clip, double sigma, Rng& rng);
Clip illumination_shift(const Clip& clip, double sigma, Rng& rng);
Clip horizontal_flip(const Clip& clip, double p, Rng& rng);

/// Crops a side x side square at (offset_w, offset_h) from every frame and
/// resizes it back bilinearly (corner-aligned).
Clip crop_resize_at(const Clip& clip, std::size_t side, std::size_t offset_w,
                    std::size_t offset_h);
/// Random square crop with side ~ U(min_frac * W, W), at least 2 pixels.
Clip crop_resize(const Clip& clip, double min_frac, Rng& rng);

Clip time_reverse(const Clip& clip, double p, Rng& rng);

/// Output frame j is the source linearly interpolated at time index j * c, so
/// every embedded frequency f becomes c * f. Ground truth is scaled by c.
Clip freq_resample(const Clip& clip, double c, std::size_t out_frames);

/// Source frames freq_resample needs to produce out_frames at factor c.
std::size_t resample_source_frames(double c, std::size_t out_frames);

/// n_views independently augmented views of `clip`, each out_frames long
/// (0 keeps the source length). Order: resample, crop, flip, reverse,
/// illumination, pixel noise.
std::vector<AugmentOutcome> augment_batch(const Clip& clip, std::size_t n_views,
                                          std::size_t out_frames, const AugmentConfig& cfg,
                                          Rng& rng);

}  // namespace sinc
