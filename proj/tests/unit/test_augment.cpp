#include "sinc/augment.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "oracles.hpp"
#include "sinc/error.hpp"

using namespace sinc;

namespace {

Clip random_clip(std::size_t t, std::size_t w, std::size_t h, std::size_t c, std::uint64_t seed) {
  Clip clip(t, w, h, c, 30.0);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(100.0, 150.0);
  for (double& v : clip.data) v = u(rng);
  clip.gt_rate_hz.emplace(t, 1.2);
  return clip;
}

Clip tone_clip(std::size_t t, double f_hz, double fps) {
  Clip clip(t, 2, 2, 1, fps);
  for (std::size_t i = 0; i < t; ++i) {
    const double v = 128.0 + 5.0 * std::sin(2.0 * std::numbers::pi * f_hz * static_cast<double>(i) / fps);
    for (double& x : clip.frame(i)) x = v;
  }
  clip.gt_rate_hz.emplace(t, f_hz);
  return clip;
}

std::vector<double> pixel_trace(const Clip& clip, std::size_t w, std::size_t h, std::size_t c) {
  std::vector<double> y(clip.frames);
  for (std::size_t t = 0; t < clip.frames; ++t) y[t] = clip.at(t, w, h, c);
  return y;
}

// Peak bin of the reference DFT restricted to [1, bins).
std::size_t oracle_peak(const std::vector<double>& y, std::size_t nfft) {
  const auto p = oracle::dft_power(y, nfft);
  return static_cast<std::size_t>(std::max_element(p.begin() + 1, p.end()) - p.begin());
}

}  // namespace

TEST_CASE("pixel noise: zero sigma is the identity, sigma 2 has the right spread") {
  const Clip in = random_clip(50, 8, 8, 3, 1);
  Rng rng(5);
  CHECK(gaussian_pixel_noise(in, 0.0, rng).data == in.data);

  const Clip big = random_clip(1042, 8, 4, 3, 2);  // 100032 values
  Rng r2 = make_rng(11, "noise");
  const Clip out = gaussian_pixel_noise(big, 2.0, r2);
  double mean = 0.0;
  for (std::size_t i = 0; i < out.data.size(); ++i) mean += out.data[i] - big.data[i];
  mean /= static_cast<double>(out.data.size());
  double var = 0.0;
  for (std::size_t i = 0; i < out.data.size(); ++i) {
    const double d = out.data[i] - big.data[i] - mean;
    var += d * d;
  }
  const double sd = std::sqrt(var / static_cast<double>(out.data.size() - 1));
  CHECK(sd >= 1.95);
  CHECK(sd <= 2.05);

  Rng a(3), b(3);
  CHECK(gaussian_pixel_noise(in, 2.0, a).data == gaussian_pixel_noise(in, 2.0, b).data);
  CHECK_THROWS_AS(gaussian_pixel_noise(in, -1.0, a), InvalidInput);
}

TEST_CASE("illumination shift adds one constant and leaves trace spectra alone") {
  const Clip in = random_clip(64, 4, 4, 3, 3);
  Rng z(1);
  CHECK(illumination_shift(in, 0.0, z).data == in.data);

  Rng rng(9);
  const Clip out = illumination_shift(in, 10.0, rng);
  const double delta = out.data[0] - in.data[0];
  CHECK(std::abs(delta) > 0.0);
  for (std::size_t i = 0; i < in.data.size(); ++i) {
    CHECK(out.data[i] - in.data[i] == doctest::Approx(delta).epsilon(1e-12));
  }
  const auto p_in = oracle::dft_power(pixel_trace(in, 1, 2, 0), 128);
  const auto p_out = oracle::dft_power(pixel_trace(out, 1, 2, 0), 128);
  CHECK(oracle::rel_error(p_out, p_in) < 1e-9);
}

TEST_CASE("horizontal flip") {
  const Clip in = random_clip(10, 4, 3, 2, 4);
  Rng rng(1);
  CHECK(horizontal_flip(in, 0.0, rng).data == in.data);
  const Clip once = horizontal_flip(in, 1.0, rng);
  CHECK(once.data != in.data);
  CHECK(once.at(3, 0, 2, 1) == in.at(3, 3, 2, 1));
  CHECK(once.at(7, 1, 0, 0) == in.at(7, 2, 0, 0));
  CHECK(horizontal_flip(once, 1.0, rng).data == in.data);

  Clip uniform(6, 4, 4, 3, 30.0);
  for (std::size_t t = 0; t < 6; ++t) {
    for (double& v : uniform.frame(t)) v = 100.0 + static_cast<double>(t);
  }
  CHECK(horizontal_flip(uniform, 1.0, rng).data == uniform.data);
}

TEST_CASE("crop_resize: identity, constants, and a hand-computed 4x4 case") {
  const Clip in = random_clip(5, 6, 6, 2, 5);
  CHECK(crop_resize_at(in, 6, 0, 0).data == in.data);

  Clip flat(4, 6, 6, 3, 30.0);
  std::fill(flat.data.begin(), flat.data.end(), 77.0);
  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    const Clip out = crop_resize(flat, 0.5, rng);
    for (double v : out.data) CHECK(v == doctest::Approx(77.0).epsilon(1e-14));
  }

  // 4x4 frame with value 10*w + h. The 2x2 block at (1,1) is
  //   w=1: 11 12
  //   w=2: 21 22
  // and corner-aligned upsampling samples it at 0, 1/3, 2/3, 1 on both axes,
  // so out(w, h) = 11 + 10*w/3 + h/3.
  Clip grid(1, 4, 4, 1, 30.0);
  for (std::size_t w = 0; w < 4; ++w) {
    for (std::size_t h = 0; h < 4; ++h) grid.at(0, w, h, 0) = 10.0 * static_cast<double>(w) + static_cast<double>(h);
  }
  const double expected[4][4] = {
      {11.0, 11.0 + 1.0 / 3.0, 11.0 + 2.0 / 3.0, 12.0},
      {14.0 + 1.0 / 3.0, 14.0 + 2.0 / 3.0, 15.0, 15.0 + 1.0 / 3.0},
      {17.0 + 2.0 / 3.0, 18.0, 18.0 + 1.0 / 3.0, 18.0 + 2.0 / 3.0},
      {21.0, 21.0 + 1.0 / 3.0, 21.0 + 2.0 / 3.0, 22.0},
  };
  const Clip up = crop_resize_at(grid, 2, 1, 1);
  for (std::size_t w = 0; w < 4; ++w) {
    for (std::size_t h = 0; h < 4; ++h) {
      CHECK(up.at(0, w, h, 0) == doctest::Approx(expected[w][h]).epsilon(1e-14));
    }
  }

  Clip rect(2, 4, 3, 1, 30.0);
  CHECK_THROWS_AS(crop_resize(rect, 0.5, rng), InvalidInput);
  CHECK_THROWS_AS(crop_resize(in, 0.0, rng), InvalidInput);
  CHECK_THROWS_AS(crop_resize_at(in, 4, 3, 0), InvalidInput);
}

TEST_CASE("time reversal") {
  const Clip in = random_clip(9, 3, 3, 1, 6);
  Rng rng(4);
  CHECK(time_reverse(in, 0.0, rng).data == in.data);
  const Clip once = time_reverse(in, 1.0, rng);
  CHECK(once.at(0, 1, 1, 0) == in.at(8, 1, 1, 0));
  CHECK(once.gt_rate_hz == in.gt_rate_hz);
  CHECK(time_reverse(once, 1.0, rng).data == in.data);
  const auto p_in = oracle::dft_power(pixel_trace(in, 2, 0, 0), 32);
  const auto p_out = oracle::dft_power(pixel_trace(once, 2, 0, 0), 32);
  CHECK(oracle::rel_error(p_out, p_in) < 1e-9);
}

TEST_CASE("freq_resample: identity, ramp, and source length") {
  const Clip in = random_clip(20, 2, 2, 1, 7);
  const Clip same = freq_resample(in, 1.0, 12);
  CHECK(same.frames == 12);
  for (std::size_t t = 0; t < 12; ++t) CHECK(same.at(t, 1, 0, 0) == in.at(t, 1, 0, 0));

  Clip ramp(10, 1, 1, 1, 30.0);
  for (std::size_t t = 0; t < 10; ++t) ramp.data[t] = static_cast<double>(t);
  const Clip half = freq_resample(ramp, 0.5, 10);
  for (std::size_t j = 0; j < 10; ++j) CHECK(half.data[j] == doctest::Approx(0.5 * static_cast<double>(j)));

  CHECK(resample_source_frames(1.4, 120) == 168);
  CHECK(resample_source_frames(1.0, 120) == 120);
  CHECK(resample_source_frames(0.5, 11) == 6);
  CHECK_NOTHROW(freq_resample(random_clip(168, 1, 1, 1, 1), 1.4, 120));
  CHECK_THROWS_AS(freq_resample(random_clip(167, 1, 1, 1, 1), 1.4, 120), InvalidInput);
  CHECK_THROWS_AS(freq_resample(in, 0.0, 10), InvalidInput);

  const Clip scaled = freq_resample(tone_clip(200, 1.0, 30.0), 1.25, 120);
  for (double r : *scaled.gt_rate_hz) CHECK(r == doctest::Approx(1.25));
}

TEST_CASE("freq_resample moves a tone from f0 to c*f0") {
  const std::size_t T = 120;
  const std::size_t nfft = 600;  // 0.05 Hz bins at 30 fps
  const double bin = 30.0 / static_cast<double>(nfft);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> uf(0.8, 2.0);
  std::uniform_real_distribution<double> uc(0.6, 1.4);

  // The 0.2 Hz example from the docs, at a slower frame rate so a full cycle fits.
  {
    const Clip src = tone_clip(200, 0.2, 2.0);
    const Clip out = freq_resample(src, 1.25, 100);
    const std::size_t k = oracle_peak(out.spatial_mean_trace(), 1000);
    CHECK(std::abs(static_cast<double>(k) * 2.0 / 1000.0 - 0.25) <= 2.0 / 1000.0);
  }
  for (int i = 0; i < 20; ++i) {
    const double f0 = uf(rng);
    const double c = uc(rng);
    const Clip src = tone_clip(resample_source_frames(c, T), f0, 30.0);
    const Clip out = freq_resample(src, c, T);
    const std::size_t k = oracle_peak(out.spatial_mean_trace(), nfft);
    CAPTURE(f0);
    CAPTURE(c);
    CHECK(std::abs(static_cast<double>(k) * bin - c * f0) <= bin);
  }
}

TEST_CASE("augment_batch") {
  const Clip src = random_clip(180, 8, 8, 3, 8);
  Rng rng(1);
  const auto off = augment_batch(src, 3, 120, AugmentConfig::none(), rng);
  REQUIRE(off.size() == 3);
  for (const auto& o : off) {
    CHECK(o.band_scale == 1.0);
    CHECK(o.applied.empty());
    CHECK(o.clip.data == src.window(0, 120).data);
  }

  AugmentConfig full;
  Rng a(77), b(77);
  const auto x = augment_batch(src, 4, 120, full, a);
  const auto y = augment_batch(src, 4, 120, full, b);
  bool views_differ = false;
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(x[i].clip.data == y[i].clip.data);
    CHECK(x[i].band_scale == y[i].band_scale);
    CHECK(x[i].clip.frames == 120);
    CHECK(std::find(x[i].applied.begin(), x[i].applied.end(), "resample") != x[i].applied.end());
    CHECK(x[i].band_scale >= 0.6);
    CHECK(x[i].band_scale <= 1.4);
    for (double r : *x[i].clip.gt_rate_hz) CHECK(r == doctest::Approx(1.2 * x[i].band_scale));
    if (i > 0 && x[i].clip.data != x[0].clip.data) views_differ = true;
  }
  CHECK(views_differ);

  // Personalization views: no noise, no resampling. With illumination off too,
  // every view is a geometric rearrangement of the window, so a static clip stays static.
  Clip flat(150, 8, 8, 3, 30.0);
  std::fill(flat.data.begin(), flat.data.end(), 128.0);
  AugmentConfig pers = AugmentConfig::personalization();
  Rng r2(5);
  for (const auto& o : augment_batch(flat, 6, 120, pers, r2)) {
    CHECK(o.band_scale == 1.0);
    const double first = o.clip.data[0];
    for (double v : o.clip.data) CHECK(v == doctest::Approx(first).epsilon(1e-12));
  }
  CHECK_FALSE(pers.pixel_noise);
  CHECK_FALSE(pers.resample);

  AugmentConfig tta = AugmentConfig::test_time();
  CHECK(tta.flip);
  CHECK(tta.illumination);
  CHECK(tta.crop);
  CHECK(tta.reverse);
  Rng r3(6);
  for (const auto& o : augment_batch(src, 20, 120, tta, r3)) CHECK(o.band_scale == 1.0);

  CHECK_THROWS_AS(augment_batch(src, 0, 120, full, r3), InvalidInput);
  CHECK_THROWS_AS(augment_batch(src, 1, 170, full, r3), InvalidInput);
}
