#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace sinc {

inline constexpr std::size_t kDefaultNfft = 5400;

struct SpectralConfig {
  std::size_t nfft = kDefaultNfft;  // zero-padded transform length
  double fs = 30.0;                 // sampling rate, Hz

  void validate() const;
  double bin_hz() const { return fs / static_cast<double>(nfft); }
  std::size_t one_sided_bins() const { return nfft / 2 + 1; }
};

/// One-sided power spectrum. power[k] = |Y_k|^2 at frequency k * fs / nfft.
struct Spectrum {
  std::vector<double> power;
  double fs = 0.0;
  std::size_t nfft = 0;

  double bin_hz() const { return fs / static_cast<double>(nfft); }
  double frequency(std::size_t k) const { return static_cast<double>(k) * bin_hz(); }
};

/// Frequency band [low_hz, high_hz] plus the sparsity half-width delta_f_hz.
struct Bandlimits {
  double low_hz = 0.66;
  double high_hz = 3.0;
  double delta_f_hz = 0.1;

  void validate(double fs) const;
  /// Band after resampling a clip by factor c; every frequency moves to c*f.
  Bandlimits scaled(double c) const { return {c * low_hz, c * high_hz, c * delta_f_hz}; }
};

/// Pulse-analog defaults (40-180 bpm).
Bandlimits pulse_band();
/// Respiration defaults (6-30 breaths per minute).
Bandlimits respiration_band();

/// Inclusive bin range [lo, hi].
struct BinRange {
  std::size_t lo = 0;
  std::size_t hi = 0;
  std::size_t size() const { return hi - lo + 1; }
  bool contains(std::size_t k) const { return k >= lo && k <= hi; }
};

struct RateSeries {
  std::vector<double> times_s;    // window centers, ascending
  std::vector<double> rates_bpm;  // one per time
};

/// Mean-subtracted, zero-padded power spectrum of y (rectangular window).
Spectrum psd(std::span<const double> y, const SpectralConfig& cfg);

/// Bins k with ceil(a*nfft/fs) <= k <= floor(b*nfft/fs); DC is never included.
BinRange band_bins(double fs, std::size_t nfft, const Bandlimits& band);
inline BinRange band_bins(const Spectrum& spec, const Bandlimits& band) {
  return band_bins(spec.fs, spec.nfft, band);
}

/// Lowest-index argmax over the band's bins.
std::size_t peak_bin(const Spectrum& spec, const BinRange& bins);
/// Frequency (Hz) of the in-band spectral peak.
double peak_frequency(const Spectrum& spec, const Bandlimits& band);
/// 60 * in-band peak frequency of y's spectrum.
double estimate_rate_bpm(std::span<const double> y, const Bandlimits& band,
                         const SpectralConfig& cfg);

/// Sliding-window rate track. Windows of round(window_s*fs) samples advance by
/// round(hop_s*fs); each window is transformed with cfg.nfft (or the window
/// length, if larger).
RateSeries stft_rates(std::span<const double> y, double window_s, double hop_s,
                      const Bandlimits& band, const SpectralConfig& cfg);

/// In-band over out-of-band power (bins 1..end), with a 1e-12 floor.
double snr(const Spectrum& spec, const Bandlimits& signal_band);

}  // namespace sinc
