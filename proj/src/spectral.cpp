#include "sinc/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>

#include "fft.hpp"
#include "sinc/error.hpp"

namespace sinc {

void SpectralConfig::validate() const {
  if (nfft < 2) throw InvalidInput("nfft must be at least 2, got " + std::to_string(nfft));
  if (!(fs > 0.0) || !std::isfinite(fs)) throw InvalidInput("sampling rate must be positive");
}

void Bandlimits::validate(double fs) const {
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0)) {
    throw InvalidBand("band [" + std::to_string(low_hz) + ", " + std::to_string(high_hz) +
                      "] Hz must satisfy 0 < a < b < fs/2 = " + std::to_string(fs / 2.0));
  }
  if (!(delta_f_hz > 0.0) || !(2.0 * delta_f_hz < high_hz - low_hz)) {
    throw InvalidBand("sparsity half-width must satisfy 0 < 2*delta_f < b - a");
  }
}

Bandlimits pulse_band() { return {0.66, 3.0, 0.1}; }

Bandlimits respiration_band() { return {0.1, 0.5, 0.08 / 3.0}; }

Spectrum psd(std::span<const double> y, const SpectralConfig& cfg) {
  cfg.validate();
  if (y.size() < 2) throw InvalidInput("psd needs at least 2 samples");
  if (y.size() > cfg.nfft) {
    throw InvalidInput("signal length " + std::to_string(y.size()) + " exceeds nfft " +
                       std::to_string(cfg.nfft));
  }
  double mean = 0.0;
  for (double v : y) {
    if (!std::isfinite(v)) throw InvalidInput("psd input contains a non-finite value");
    mean += v;
  }
  mean /= static_cast<double>(y.size());

  std::vector<double> padded(cfg.nfft, 0.0);
  std::transform(y.begin(), y.end(), padded.begin(), [mean](double v) { return v - mean; });
  std::vector<std::complex<double>> bins(cfg.one_sided_bins());
  detail::rfft(padded, bins);

  Spectrum out;
  out.fs = cfg.fs;
  out.nfft = cfg.nfft;
  out.power.resize(bins.size());
  std::transform(bins.begin(), bins.end(), out.power.begin(),
                 [](const std::complex<double>& c) { return std::norm(c); });
  return out;
}

BinRange band_bins(double fs, std::size_t nfft, const Bandlimits& band) {
  band.validate(fs);
  const double per_hz = static_cast<double>(nfft) / fs;
  // Tolerate representation error so that 0.1 Hz at 30/5400 Hz per bin lands
  // on bin 18 rather than 19.
  constexpr double kSlack = 1e-9;
  const double lo_real = band.low_hz * per_hz;
  const double hi_real = band.high_hz * per_hz;
  const auto lo = static_cast<std::size_t>(std::max(1.0, std::ceil(lo_real - kSlack)));
  const auto hi_floor = std::floor(hi_real + kSlack);
  const std::size_t last = nfft / 2;
  if (hi_floor < static_cast<double>(lo) || static_cast<double>(lo) > static_cast<double>(last)) {
    throw InvalidBand("no frequency bin falls inside [" + std::to_string(band.low_hz) + ", " +
                      std::to_string(band.high_hz) + "] Hz at nfft " + std::to_string(nfft));
  }
  return {lo, std::min(static_cast<std::size_t>(hi_floor), last)};
}

std::size_t peak_bin(const Spectrum& spec, const BinRange& bins) {
  if (bins.hi >= spec.power.size()) throw InvalidInput("bin range outside spectrum");
  std::size_t best = bins.lo;
  for (std::size_t k = bins.lo + 1; k <= bins.hi; ++k) {
    if (spec.power[k] > spec.power[best]) best = k;
  }
  return best;
}

double peak_frequency(const Spectrum& spec, const Bandlimits& band) {
  return spec.frequency(peak_bin(spec, band_bins(spec, band)));
}

double estimate_rate_bpm(std::span<const double> y, const Bandlimits& band,
                         const SpectralConfig& cfg) {
  return 60.0 * peak_frequency(psd(y, cfg), band);
}

RateSeries stft_rates(std::span<const double> y, double window_s, double hop_s,
                      const Bandlimits& band, const SpectralConfig& cfg) {
  cfg.validate();
  if (!(window_s > 0.0) || !(hop_s > 0.0)) throw InvalidInput("window and hop must be positive");
  const auto window = static_cast<std::size_t>(std::lround(window_s * cfg.fs));
  const auto hop = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(hop_s * cfg.fs)));
  if (window < 2) throw InvalidInput("STFT window shorter than 2 samples");
  if (y.size() < window) {
    throw InvalidInput("waveform of " + std::to_string(y.size()) +
                       " samples is shorter than one window of " + std::to_string(window));
  }
  SpectralConfig win_cfg = cfg;
  win_cfg.nfft = std::max(cfg.nfft, window);

  RateSeries out;
  for (std::size_t start = 0; start + window <= y.size(); start += hop) {
    const Spectrum spec = psd(y.subspan(start, window), win_cfg);
    out.times_s.push_back((static_cast<double>(start) + static_cast<double>(window) / 2.0) /
                          cfg.fs);
    out.rates_bpm.push_back(60.0 * peak_frequency(spec, band));
  }
  return out;
}

double snr(const Spectrum& spec, const Bandlimits& signal_band) {
  const BinRange bins = band_bins(spec, signal_band);
  double in = 0.0;
  double out = 0.0;
  for (std::size_t k = 1; k < spec.power.size(); ++k) {
    (bins.contains(k) ? in : out) += spec.power[k];
  }
  if (in == 0.0 && out == 0.0) return 0.0;
  return in / (out + 1e-12);
}

}  // namespace sinc
