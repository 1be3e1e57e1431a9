#include "sinc/losses.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sinc/error.hpp"

using namespace sinc;

namespace {

Spectrum make_spectrum(std::vector<double> power, double fs, std::size_t nfft) {
  Spectrum s;
  s.power = std::move(power);
  s.fs = fs;
  s.nfft = nfft;
  return s;
}

// Spectrum with nfft = 64 at fs = 32 (0.5 Hz bins); the pulse band covers bins 2..6.
Spectrum random_spectrum(std::mt19937_64& rng, std::size_t nfft = 64, double fs = 32.0) {
  return make_spectrum(oracle::uniform(nfft / 2 + 1, rng, 0.0, 1.0), fs, nfft);
}

template <class F>
std::vector<double> fd_over_power(const Spectrum& s, F&& loss, double h = 1e-6) {
  return oracle::central_diff(
      [&](std::span<const double> p) {
        Spectrum t = s;
        t.power.assign(p.begin(), p.end());
        return loss(t);
      },
      s.power, h);
}

}  // namespace

TEST_CASE("bandwidth loss worked example") {
  // 1 Hz bins; [1.5, 2.5] Hz selects bin 2 only.
  const Spectrum s = make_spectrum({0, 1, 3, 0, 0}, 8.0, 8);
  const Bandlimits band{1.5, 2.5, 0.25};
  CHECK(bandwidth_loss(s, band).value == doctest::Approx(0.25).epsilon(1e-9));

  const Spectrum inside = make_spectrum({9, 0, 3, 0, 0}, 8.0, 8);
  CHECK(bandwidth_loss(inside, band).value == doctest::Approx(0.0).scale(1e-12));
}

TEST_CASE("bandwidth loss ignores DC and handles silence") {
  const Spectrum dc = make_spectrum({50, 0, 2, 0, 0}, 8.0, 8);
  CHECK(bandwidth_loss(dc, {1.5, 2.5, 0.25}).value == doctest::Approx(0.0).scale(1e-12));
  const Spectrum zero = make_spectrum({0, 0, 0, 0, 0}, 8.0, 8);
  const SpectrumLoss l = bandwidth_loss(zero, {1.5, 2.5, 0.25});
  CHECK(l.value == 0.0);
  for (double g : l.d_power) CHECK(g == 0.0);
}

TEST_CASE("bandwidth gradient matches finite differences") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 20; ++i) {
    const Spectrum s = random_spectrum(rng);
    const SpectrumLoss l = bandwidth_loss(s, pulse_band());
    const auto fd = fd_over_power(s, [](const Spectrum& t) { return bandwidth_loss(t, pulse_band()).value; });
    CHECK(oracle::rel_error(l.d_power, fd) < 1e-6);
    CHECK(l.value >= 0.0);
    CHECK(l.value <= 1.0);
  }
}

TEST_CASE("sparsity loss worked example") {
  // 1 Hz bins, band [1, 3] Hz = bins 1..3, half-width 0.5 Hz keeps only the peak.
  const Spectrum s = make_spectrum({0, 1, 3, 1, 0, 0, 0, 0, 0}, 16.0, 16);
  CHECK(sparsity_loss(s, {1.0, 3.0, 0.5}).value == doctest::Approx(0.4).epsilon(1e-9));
  // Anything under one bin of half-width still keeps only the peak.
  CHECK(sparsity_loss(s, {1.0, 3.0, 0.9}).value == doctest::Approx(0.4).epsilon(1e-9));
  const Spectrum wide = make_spectrum({0, 1, 3, 1, 0, 0, 0, 0, 0}, 16.0, 16);
  CHECK(sparsity_loss(wide, {1.0, 4.0, 1.0}).value == doctest::Approx(0.0).scale(1e-9));
}

TEST_CASE("sparsity of a single in-band tone is zero") {
  const SpectralConfig cfg;
  const double f = 200.0 * cfg.bin_hz();
  const Spectrum s = psd(oracle::tone(cfg.nfft, f, cfg.fs), cfg);
  CHECK(sparsity_loss(s, pulse_band()).value < 1e-12);
  CHECK(bandwidth_loss(s, pulse_band()).value < 1e-12);
}

TEST_CASE("sparsity gradient matches finite differences with the peak held") {
  std::mt19937_64 rng(22);
  for (int i = 0; i < 20; ++i) {
    Spectrum s = random_spectrum(rng, 256, 32.0);
    // A clear in-band peak keeps the argmax stable under +-h.
    s.power[30 + static_cast<std::size_t>(i)] += 5.0;
    const Bandlimits band{0.66, 3.0, 0.3};
    const SpectrumLoss l = sparsity_loss(s, band);
    const auto fd = fd_over_power(s, [&](const Spectrum& t) { return sparsity_loss(t, band).value; });
    CHECK(oracle::rel_error(l.d_power, fd) < 1e-6);
    CHECK(l.value >= 0.0);
    CHECK(l.value <= 1.0);
  }
}

TEST_CASE("sparsity is zero without in-band power") {
  const Spectrum s = make_spectrum({4, 0, 0, 0, 2, 0, 0, 0, 0}, 16.0, 16);
  const SpectrumLoss l = sparsity_loss(s, {1.0, 3.0, 0.5});
  CHECK(l.value == 0.0);
  for (double g : l.d_power) CHECK(g == 0.0);
}

TEST_CASE("variance loss worked example") {
  // 1 Hz bins; [1, 3] Hz = three bins, all power on the first.
  const Spectrum s = make_spectrum({0, 2, 0, 0, 0, 0, 0, 0, 0}, 16.0, 16);
  const std::vector<Spectrum> batch{s, s, s};
  CHECK(variance_loss(batch, {1.0, 3.0, 0.5}).value == doctest::Approx(5.0 / 9.0).epsilon(1e-7));
}

TEST_CASE("variance loss vanishes when the batch covers the band") {
  std::vector<Spectrum> batch;
  for (std::size_t k = 1; k <= 3; ++k) {
    std::vector<double> p(9, 0.0);
    p[k] = 1.0 + static_cast<double>(k);  // scale is normalized away
    batch.push_back(make_spectrum(p, 16.0, 16));
  }
  CHECK(variance_loss(batch, {1.0, 3.0, 0.5}).value < 1e-12);

  const Spectrum flat = make_spectrum({7, 1, 1, 1, 3, 0, 0, 0, 0}, 16.0, 16);
  CHECK(variance_loss(std::vector<Spectrum>{flat}, {1.0, 3.0, 0.5}).value < 1e-12);
}

TEST_CASE("variance gradient matches finite differences per sample") {
  std::mt19937_64 rng(23);
  const Bandlimits band = pulse_band();
  for (int i = 0; i < 20; ++i) {
    std::vector<Spectrum> batch;
    for (int b = 0; b < 4; ++b) batch.push_back(random_spectrum(rng, 128, 32.0));
    const BatchSpectrumLoss l = variance_loss(batch, band);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto fd = oracle::central_diff(
          [&](std::span<const double> p) {
            auto copy = batch;
            copy[b].power.assign(p.begin(), p.end());
            return variance_loss(copy, band).value;
          },
          batch[b].power, 1e-6);
      CHECK(oracle::rel_error(l.d_power[b], fd) < 1e-6);
    }
  }
}

TEST_CASE("variance loss is permutation invariant and validates the batch") {
  std::mt19937_64 rng(24);
  std::vector<Spectrum> batch;
  for (int b = 0; b < 5; ++b) batch.push_back(random_spectrum(rng));
  const double v = variance_loss(batch, pulse_band()).value;
  std::reverse(batch.begin(), batch.end());
  CHECK(variance_loss(batch, pulse_band()).value == doctest::Approx(v).epsilon(1e-14));

  CHECK_THROWS_AS(variance_loss(std::vector<Spectrum>{}, pulse_band()), InvalidInput);
  batch.push_back(random_spectrum(rng, 128, 32.0));
  CHECK_THROWS_AS(variance_loss(batch, pulse_band()), InvalidInput);
}

TEST_CASE("psd_backward matches finite differences of a linear functional") {
  std::mt19937_64 rng(25);
  for (int i = 0; i < 20; ++i) {
    const std::size_t t = 20 + static_cast<std::size_t>(i);
    // Alternate even and odd transform lengths so the Nyquist bin is covered.
    const SpectralConfig cfg{static_cast<std::size_t>(i % 2 == 0 ? 64 : 63), 30.0};
    const auto y = oracle::gaussian(t, rng);
    const auto weights = oracle::uniform(cfg.one_sided_bins(), rng, -1.0, 1.0);
    const auto functional = [&](std::span<const double> x) {
      const Spectrum s = psd(x, cfg);
      return std::inner_product(weights.begin(), weights.end(), s.power.begin(), 0.0);
    };
    const auto analytic = psd_backward(weights, y, cfg);
    const auto fd = oracle::central_diff(functional, y, 1e-5);
    CHECK(oracle::rel_error(analytic, fd) < 1e-6);
  }
}

TEST_CASE("psd_backward gradient is orthogonal to constant shifts") {
  std::mt19937_64 rng(26);
  const SpectralConfig cfg;
  const auto y = oracle::gaussian(120, rng);
  const auto w = oracle::uniform(cfg.one_sided_bins(), rng, -1.0, 1.0);
  const auto g = psd_backward(w, y, cfg);
  CHECK(std::abs(std::accumulate(g.begin(), g.end(), 0.0)) < 1e-8);
  CHECK_THROWS_AS(psd_backward(std::vector<double>(10, 0.0), y, cfg), InvalidInput);
}

TEST_CASE("total loss on exact-bin tones spanning the band is near zero") {
  // 0.5 Hz bins: the pulse band holds bins 2..6, one tone per bin.
  const SpectralConfig cfg{64, 32.0};
  std::vector<std::vector<double>> tones;
  for (std::size_t k = 2; k <= 6; ++k) {
    tones.push_back(oracle::tone(cfg.nfft, static_cast<double>(k) * cfg.bin_hz(), cfg.fs));
  }
  const TotalLoss l = total_loss(tones, pulse_band(), cfg);
  CHECK(l.breakdown.total < 0.05);
  CHECK(l.breakdown.variance < 1e-9);
}

TEST_CASE("out-of-band tones are penalized by the bandwidth term") {
  const SpectralConfig cfg;
  std::vector<std::vector<double>> tones{oracle::tone(cfg.nfft, 900 * cfg.bin_hz(), cfg.fs),
                                         oracle::tone(cfg.nfft, 60 * cfg.bin_hz(), cfg.fs)};
  CHECK(total_loss(tones, pulse_band(), cfg).breakdown.bandwidth > 0.95);
}

TEST_CASE("zero weights give zero loss and zero gradients") {
  std::mt19937_64 rng(27);
  std::vector<std::vector<double>> batch{oracle::gaussian(60, rng), oracle::gaussian(60, rng)};
  const TotalLoss l = total_loss(batch, pulse_band(), {}, {0.0, 0.0, 0.0});
  CHECK(l.breakdown.total == 0.0);
  for (const auto& g : l.d_waveforms) {
    for (double v : g) CHECK(v == 0.0);
  }
}

TEST_CASE("total loss gradient matches finite differences") {
  std::mt19937_64 rng(28);
  const SpectralConfig cfg{256, 30.0};
  const LossWeights weights{1.0, 0.7, 0.3};
  for (int i = 0; i < 20; ++i) {
    std::vector<std::vector<double>> batch;
    std::vector<double> scales;
    for (int b = 0; b < 3; ++b) {
      // Strong tone plus noise: the sparsity peak stays put under +-h.
      auto y = oracle::tone(40, 1.1 + 0.4 * b, cfg.fs, 3.0);
      const auto n = oracle::gaussian(40, rng, 0.3);
      for (std::size_t t = 0; t < y.size(); ++t) y[t] += n[t];
      batch.push_back(y);
      scales.push_back(0.8 + 0.2 * b);
    }
    const TotalLoss l = total_loss(batch, pulse_band(), cfg, weights, scales);
    for (std::size_t b = 0; b < batch.size(); ++b) {
      const auto fd = oracle::central_diff(
          [&](std::span<const double> x) {
            auto copy = batch;
            copy[b].assign(x.begin(), x.end());
            return total_loss(copy, pulse_band(), cfg, weights, scales).breakdown.total;
          },
          batch[b], 1e-5);
      CHECK(oracle::rel_error(l.d_waveforms[b], fd) < 1e-6);
    }
  }
}

TEST_CASE("band scales move the per-sample band") {
  const SpectralConfig cfg;
  // 3.5 Hz is outside the base band but inside it after scaling by 1.4.
  const std::vector<std::vector<double>> batch{oracle::tone(cfg.nfft, 630 * cfg.bin_hz(), cfg.fs)};
  const std::vector<double> unit{1.0};
  const std::vector<double> wide{1.4};
  CHECK(total_loss(batch, pulse_band(), cfg, {}, unit).breakdown.bandwidth > 0.99);
  CHECK(total_loss(batch, pulse_band(), cfg, {}, wide).breakdown.bandwidth < 1e-9);
  const std::vector<double> wrong{1.0, 1.0};
  CHECK_THROWS_AS(total_loss(batch, pulse_band(), cfg, {}, wrong), InvalidInput);
}
