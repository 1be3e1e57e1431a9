#include "sinc/losses.hpp"

#include <cmath>
#include <complex>
#include <string>

#include "fft.hpp"
#include "sinc/error.hpp"

namespace sinc {

SpectrumLoss bandwidth_loss(const Spectrum& spec, const Bandlimits& band) {
  const BinRange bins = band_bins(spec, band);
  const std::size_t n = spec.power.size();
  double total = 0.0;
  double in = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    total += spec.power[k];
    if (bins.contains(k)) in += spec.power[k];
  }
  SpectrumLoss out{0.0, std::vector<double>(n, 0.0)};
  if (total == 0.0) return out;

  const double outside = total - in;
  const double denom = total + kLossEps;
  out.value = outside / denom;
  const double d_in = -outside / (denom * denom);
  const double d_out = (in + kLossEps) / (denom * denom);
  for (std::size_t k = 1; k < n; ++k) out.d_power[k] = bins.contains(k) ? d_in : d_out;
  return out;
}

SpectrumLoss sparsity_loss(const Spectrum& spec, const Bandlimits& band) {
  const BinRange bins = band_bins(spec, band);
  SpectrumLoss out{0.0, std::vector<double>(spec.power.size(), 0.0)};

  double in = 0.0;
  for (std::size_t k = bins.lo; k <= bins.hi; ++k) in += spec.power[k];
  if (in == 0.0) return out;

  // Window: in-band bins within delta_f of the peak. Compared in bin units so
  // that a half-width of exactly m bins includes the m-th neighbour.
  const std::size_t peak = peak_bin(spec, bins);
  const double half_bins = band.delta_f_hz / spec.bin_hz() + 1e-9;
  auto in_window = [&](std::size_t k) {
    const double dist = std::abs(static_cast<double>(k) - static_cast<double>(peak));
    return dist <= half_bins;
  };
  double window = 0.0;
  for (std::size_t k = bins.lo; k <= bins.hi; ++k) {
    if (in_window(k)) window += spec.power[k];
  }

  const double denom = in + kLossEps;
  out.value = (in - window) / denom;
  const double d_window = -out.value / denom;
  const double d_rest = (window + kLossEps) / (denom * denom);
  for (std::size_t k = bins.lo; k <= bins.hi; ++k) {
    out.d_power[k] = in_window(k) ? d_window : d_rest;
  }
  return out;
}

BatchSpectrumLoss variance_loss(std::span<const Spectrum> batch, const Bandlimits& band) {
  if (batch.empty()) throw InvalidInput("variance_loss needs a non-empty batch");
  const Spectrum& first = batch.front();
  for (const Spectrum& s : batch) {
    if (s.fs != first.fs || s.nfft != first.nfft || s.power.size() != first.power.size()) {
      throw InvalidInput("variance_loss: batch spectra have different spectral configs");
    }
  }
  const BinRange bins = band_bins(first, band);
  const std::size_t width = bins.size();
  const double batch_size = static_cast<double>(batch.size());

  std::vector<double> sums(batch.size(), 0.0);
  std::vector<double> mean_dist(width, 0.0);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& p = batch[i].power;
    for (std::size_t j = 0; j < width; ++j) sums[i] += p[bins.lo + j];
    const double denom = sums[i] + kLossEps;
    for (std::size_t j = 0; j < width; ++j) mean_dist[j] += p[bins.lo + j] / denom;
  }
  for (double& d : mean_dist) d /= batch_size;

  // residual[j] = CDF_d[j] - CDF_u[j]
  std::vector<double> residual(width);
  double cdf = 0.0;
  BatchSpectrumLoss out;
  for (std::size_t j = 0; j < width; ++j) {
    cdf += mean_dist[j];
    residual[j] = cdf - static_cast<double>(j + 1) / static_cast<double>(width);
    out.value += residual[j] * residual[j];
  }

  // dL/dd_m = 2 * sum_{j >= m} residual[j]
  std::vector<double> d_mean(width);
  double suffix = 0.0;
  for (std::size_t j = width; j-- > 0;) {
    suffix += residual[j];
    d_mean[j] = 2.0 * suffix;
  }

  out.d_power.assign(batch.size(), std::vector<double>(first.power.size(), 0.0));
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& p = batch[i].power;
    const double denom = sums[i] + kLossEps;
    double dot = 0.0;
    for (std::size_t j = 0; j < width; ++j) dot += d_mean[j] * p[bins.lo + j];
    for (std::size_t j = 0; j < width; ++j) {
      out.d_power[i][bins.lo + j] = (d_mean[j] / denom - dot / (denom * denom)) / batch_size;
    }
  }
  return out;
}

std::vector<double> psd_backward(std::span<const double> d_power, std::span<const double> y,
                                 const SpectralConfig& cfg) {
  cfg.validate();
  const std::size_t nfft = cfg.nfft;
  const std::size_t bins = cfg.one_sided_bins();
  if (d_power.size() != bins) {
    throw InvalidInput("psd_backward: gradient has " + std::to_string(d_power.size()) +
                       " bins, expected " + std::to_string(bins));
  }
  if (y.size() < 2 || y.size() > nfft) throw InvalidInput("psd_backward: bad waveform length");

  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  std::vector<double> padded(nfft, 0.0);
  for (std::size_t n = 0; n < y.size(); ++n) padded[n] = y[n] - mean;
  std::vector<std::complex<double>> spectrum(bins);
  detail::rfft(padded, spectrum);

  // dF_k/dx_n = 2 Re(conj(Y_k) e^{-2 pi i k n / N}), so
  // dL/dx_n = 2 Re(sum_k dF_k Y_k e^{+2 pi i k n / N}) over one-sided k.
  // The Hermitian inverse counts interior bins twice and DC/Nyquist once,
  // hence the factor 2 on the unpaired bins only.
  for (std::size_t k = 0; k < bins; ++k) {
    const bool unpaired = (k == 0) || (nfft % 2 == 0 && k == nfft / 2);
    spectrum[k] *= d_power[k] * (unpaired ? 2.0 : 1.0);
  }
  std::vector<double> grad_padded(nfft);
  detail::irfft(spectrum, grad_padded);

  // Chain through mean subtraction: (I - ones/T) is symmetric.
  std::vector<double> grad(grad_padded.begin(), grad_padded.begin() + static_cast<long>(y.size()));
  double g_mean = 0.0;
  for (double g : grad) g_mean += g;
  g_mean /= static_cast<double>(grad.size());
  for (double& g : grad) g -= g_mean;
  return grad;
}

TotalLoss total_loss(std::span<const std::vector<double>> waveforms, const Bandlimits& band,
                     const SpectralConfig& cfg, const LossWeights& weights,
                     std::span<const double> band_scales) {
  if (waveforms.empty()) throw InvalidInput("total_loss needs a non-empty batch");
  if (!band_scales.empty() && band_scales.size() != waveforms.size()) {
    throw InvalidInput("total_loss: one band scale per waveform required");
  }
  const std::size_t len = waveforms.front().size();
  for (const auto& w : waveforms) {
    if (w.size() != len) throw InvalidInput("total_loss: waveforms differ in length");
  }
  const std::size_t batch = waveforms.size();
  const double inv_batch = 1.0 / static_cast<double>(batch);

  std::vector<Spectrum> spectra;
  spectra.reserve(batch);
  for (const auto& w : waveforms) spectra.push_back(psd(w, cfg));

  TotalLoss out;
  out.breakdown.weights = weights;
  std::vector<std::vector<double>> d_power(batch, std::vector<double>(cfg.one_sided_bins(), 0.0));

  for (std::size_t i = 0; i < batch; ++i) {
    const double c = band_scales.empty() ? 1.0 : band_scales[i];
    const Bandlimits view_band = band.scaled(c);
    const SpectrumLoss bw = bandwidth_loss(spectra[i], view_band);
    const SpectrumLoss sp = sparsity_loss(spectra[i], view_band);
    out.breakdown.bandwidth += bw.value * inv_batch;
    out.breakdown.sparsity += sp.value * inv_batch;
    for (std::size_t k = 0; k < d_power[i].size(); ++k) {
      d_power[i][k] = weights.bandwidth * inv_batch * bw.d_power[k] +
                      weights.sparsity * inv_batch * sp.d_power[k];
    }
  }
  const BatchSpectrumLoss var = variance_loss(spectra, band);
  out.breakdown.variance = var.value;
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t k = 0; k < d_power[i].size(); ++k) {
      d_power[i][k] += weights.variance * var.d_power[i][k];
    }
  }
  out.breakdown.total = weights.bandwidth * out.breakdown.bandwidth +
                        weights.sparsity * out.breakdown.sparsity +
                        weights.variance * out.breakdown.variance;

  out.d_waveforms.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    out.d_waveforms.push_back(psd_backward(d_power[i], waveforms[i], cfg));
  }
  return out;
}

}  // namespace sinc
