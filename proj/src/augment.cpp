#include "sinc/augment.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "sinc/error.hpp"

namespace sinc {

void AugmentConfig::validate() const {
  auto prob = [](double p, const char* name) {
    if (!(p >= 0.0 && p <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  prob(flip_p, "flip_p");
  prob(reverse_p, "reverse_p");
  if (!(crop_min_frac > 0.0 && crop_min_frac <= 1.0)) {
    throw ConfigError("crop_min_frac must lie in (0, 1]");
  }
  if (!(resample_lo > 0.0 && resample_lo <= resample_hi)) {
    throw ConfigError("resample range must satisfy 0 < lo <= hi");
  }
  if (!(pixel_noise_sigma >= 0.0) || !(illum_sigma >= 0.0)) {
    throw ConfigError("noise sigmas must be non-negative");
  }
}

AugmentConfig AugmentConfig::none() {
  AugmentConfig cfg;
  cfg.resample = cfg.crop = cfg.flip = cfg.reverse = cfg.illumination = cfg.pixel_noise = false;
  return cfg;
}

AugmentConfig AugmentConfig::personalization() {
  AugmentConfig cfg;
  cfg.resample = false;
  cfg.pixel_noise = false;
  return cfg;
}

AugmentConfig AugmentConfig::test_time() {
  AugmentConfig cfg = none();
  cfg.flip = cfg.illumination = cfg.crop = cfg.reverse = true;
  return cfg;
}

Clip gaussian_pixel_noise(const Clip& clip, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw InvalidInput("pixel noise sigma must be non-negative");
  Clip out = clip;
  if (sigma == 0.0) return out;
  std::normal_distribution<double> noise(0.0, sigma);
  for (double& v : out.data) v += noise(rng);
  return out;
}

Clip illumination_shift(const Clip& clip, double sigma, Rng& rng) {
  if (!(sigma >= 0.0)) throw InvalidInput("illumination sigma must be non-negative");
  Clip out = clip;
  if (sigma == 0.0) return out;
  const double delta = std::normal_distribution<double>(0.0, sigma)(rng);
  for (double& v : out.data) v += delta;
  return out;
}

namespace {

bool bernoulli(double p, Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

Clip mirror_width(const Clip& clip) {
  Clip out = clip;
  for (std::size_t t = 0; t < clip.frames; ++t) {
    for (std::size_t w = 0; w < clip.width; ++w) {
      for (std::size_t h = 0; h < clip.height; ++h) {
        for (std::size_t c = 0; c < clip.channels; ++c) {
          out.at(t, w, h, c) = clip.at(t, clip.width - 1 - w, h, c);
        }
      }
    }
  }
  return out;
}

Clip reverse_frames(const Clip& clip) {
  Clip out = clip;
  for (std::size_t t = 0; t < clip.frames; ++t) {
    const auto src = clip.frame(clip.frames - 1 - t);
    std::copy(src.begin(), src.end(), out.frame(t).begin());
  }
  if (out.gt_rate_hz) std::reverse(out.gt_rate_hz->begin(), out.gt_rate_hz->end());
  return out;
}

}  // namespace

Clip horizontal_flip(const Clip& clip, double p, Rng& rng) {
  return bernoulli(p, rng) ? mirror_width(clip) : clip;
}

Clip crop_resize_at(const Clip& clip, std::size_t side, std::size_t offset_w,
                    std::size_t offset_h) {
  if (clip.width != clip.height) throw InvalidInput("crop_resize needs square frames");
  if (side < 1 || offset_w + side > clip.width || offset_h + side > clip.height) {
    throw InvalidInput("crop window falls outside the frame");
  }
  const std::size_t W = clip.width;
  // Corner-aligned sampling positions inside the crop, shared by both axes.
  std::vector<std::size_t> lo(W);
  std::vector<double> frac(W);
  for (std::size_t o = 0; o < W; ++o) {
    const double pos = W == 1 ? 0.0
                              : static_cast<double>(o) * static_cast<double>(side - 1) /
                                    static_cast<double>(W - 1);
    lo[o] = std::min(static_cast<std::size_t>(std::floor(pos)), side - 1);
    frac[o] = pos - static_cast<double>(lo[o]);
  }

  Clip out = clip;
  for (std::size_t t = 0; t < clip.frames; ++t) {
    for (std::size_t w = 0; w < W; ++w) {
      const std::size_t w0 = offset_w + lo[w];
      const std::size_t w1 = frac[w] > 0.0 ? w0 + 1 : w0;
      for (std::size_t h = 0; h < W; ++h) {
        const std::size_t h0 = offset_h + lo[h];
        const std::size_t h1 = frac[h] > 0.0 ? h0 + 1 : h0;
        for (std::size_t c = 0; c < clip.channels; ++c) {
          const double top = (1.0 - frac[h]) * clip.at(t, w0, h0, c) + frac[h] * clip.at(t, w0, h1, c);
          const double bottom =
              (1.0 - frac[h]) * clip.at(t, w1, h0, c) + frac[h] * clip.at(t, w1, h1, c);
          out.at(t, w, h, c) = (1.0 - frac[w]) * top + frac[w] * bottom;
        }
      }
    }
  }
  return out;
}

Clip crop_resize(const Clip& clip, double min_frac, Rng& rng) {
  if (clip.width != clip.height) throw InvalidInput("crop_resize needs square frames");
  if (!(min_frac > 0.0 && min_frac <= 1.0)) throw InvalidInput("crop min_frac must lie in (0, 1]");
  const double W = static_cast<double>(clip.width);
  const double drawn = std::uniform_real_distribution<double>(min_frac * W, W)(rng);
  const auto side = std::clamp<std::size_t>(static_cast<std::size_t>(std::lround(drawn)),
                                            std::min<std::size_t>(2, clip.width), clip.width);
  std::uniform_int_distribution<std::size_t> offset(0, clip.width - side);
  const std::size_t ow = offset(rng);
  const std::size_t oh = offset(rng);
  return crop_resize_at(clip, side, ow, oh);
}

Clip time_reverse(const Clip& clip, double p, Rng& rng) {
  return bernoulli(p, rng) ? reverse_frames(clip) : clip;
}

std::size_t resample_source_frames(double c, std::size_t out_frames) {
  if (out_frames == 0) return 0;
  return static_cast<std::size_t>(std::ceil(c * static_cast<double>(out_frames - 1) - 1e-9)) + 1;
}

Clip freq_resample(const Clip& clip, double c, std::size_t out_frames) {
  if (!(c > 0.0) || !std::isfinite(c)) throw InvalidInput("resample factor must be positive");
  if (out_frames < 2) throw InvalidInput("resample output needs at least 2 frames");
  const std::size_t needed = resample_source_frames(c, out_frames);
  if (clip.frames < needed) {
    throw InvalidInput("resampling by " + std::to_string(c) + " to " + std::to_string(out_frames) +
                       " frames needs " + std::to_string(needed) + " source frames, got " +
                       std::to_string(clip.frames));
  }
  Clip out(out_frames, clip.width, clip.height, clip.channels, clip.fps);
  out.label = clip.label;
  if (clip.gt_rate_hz) out.gt_rate_hz.emplace(out_frames, 0.0);
  const std::size_t fsz = clip.frame_size();
  for (std::size_t j = 0; j < out_frames; ++j) {
    const double pos = static_cast<double>(j) * c;
    auto i0 = static_cast<std::size_t>(std::floor(pos));
    double frac = pos - static_cast<double>(i0);
    if (i0 >= clip.frames - 1) {
      i0 = clip.frames - 1;
      frac = 0.0;
    }
    const auto a = clip.frame(i0);
    auto dst = out.frame(j);
    if (frac == 0.0) {
      std::copy(a.begin(), a.end(), dst.begin());
    } else {
      const auto b = clip.frame(i0 + 1);
      for (std::size_t p = 0; p < fsz; ++p) dst[p] = (1.0 - frac) * a[p] + frac * b[p];
    }
    if (clip.gt_rate_hz) {
      const auto& gt = *clip.gt_rate_hz;
      const double rate = frac == 0.0 ? gt[i0] : (1.0 - frac) * gt[i0] + frac * gt[i0 + 1];
      (*out.gt_rate_hz)[j] = c * rate;
    }
  }
  return out;
}

std::vector<AugmentOutcome> augment_batch(const Clip& clip, std::size_t n_views,
                                          std::size_t out_frames, const AugmentConfig& cfg,
                                          Rng& rng) {
  if (n_views == 0) throw InvalidInput("augment_batch needs at least one view");
  cfg.validate();
  if (out_frames == 0) out_frames = clip.frames;
  // Checked against the largest factor so the failure does not depend on the draw.
  const std::size_t needed = cfg.resample ? resample_source_frames(cfg.resample_hi, out_frames) : out_frames;
  if (clip.frames < needed) {
    throw InvalidInput("augment_batch: " + std::to_string(out_frames) + "-frame views need " +
                       std::to_string(needed) + " source frames, got " + std::to_string(clip.frames));
  }
  const std::uint64_t base = rng();

  std::vector<AugmentOutcome> views;
  views.reserve(n_views);
  for (std::size_t v = 0; v < n_views; ++v) {
    const std::uint64_t view_seed = derive_seed(base, "augment.view", v);
    auto stream = [view_seed](std::string_view tag) { return make_rng(view_seed, tag); };
    AugmentOutcome outcome;
    if (cfg.resample) {
      Rng r = stream("resample");
      const double c = std::uniform_real_distribution<double>(cfg.resample_lo, cfg.resample_hi)(r);
      outcome.clip = freq_resample(clip, c, out_frames);
      outcome.band_scale = c;
      outcome.applied.emplace_back("resample");
    } else {
      outcome.clip = clip.frames == out_frames ? clip : clip.window(0, out_frames);
    }
    if (cfg.crop) {
      Rng r = stream("crop");
      outcome.clip = crop_resize(outcome.clip, cfg.crop_min_frac, r);
      outcome.applied.emplace_back("crop");
    }
    if (cfg.flip) {
      Rng r = stream("flip");
      if (bernoulli(cfg.flip_p, r)) {
        outcome.clip = mirror_width(outcome.clip);
        outcome.applied.emplace_back("flip");
      }
    }
    if (cfg.reverse) {
      Rng r = stream("reverse");
      if (bernoulli(cfg.reverse_p, r)) {
        outcome.clip = reverse_frames(outcome.clip);
        outcome.applied.emplace_back("reverse");
      }
    }
    if (cfg.illumination) {
      Rng r = stream("illumination");
      outcome.clip = illumination_shift(outcome.clip, cfg.illum_sigma, r);
      outcome.applied.emplace_back("illumination");
    }
    if (cfg.pixel_noise) {
      Rng r = stream("pixel_noise");
      outcome.clip = gaussian_pixel_noise(outcome.clip, cfg.pixel_noise_sigma, r);
      outcome.applied.emplace_back("pixel_noise");
    }
    views.push_back(std::move(outcome));
  }
  return views;
}

}  // namespace sinc
