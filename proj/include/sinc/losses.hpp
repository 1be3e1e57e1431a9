#pragma once

#include <span>
#include <vector>

#include "sinc/spectral.hpp"

namespace sinc {

// Guards every power ratio; zero spectra give zero loss and zero gradient.
inline constexpr double kLossEps = 1e-8;

struct LossWeights {
  double bandwidth = 1.0;
  double sparsity = 1.0;
  double variance = 1.0;
};

struct LossBreakdown {
  double bandwidth = 0.0;
  double sparsity = 0.0;
  double variance = 0.0;
  double total = 0.0;
  LossWeights weights;
};

/// A loss value with its derivative w.r.t. each one-sided power bin.
struct SpectrumLoss {
  double value = 0.0;
  std::vector<double> d_power;
};

struct BatchSpectrumLoss {
  double value = 0.0;
  std::vector<std::vector<double>> d_power;  // one per batch member
};

/// Fraction of power (bins 1..end) that lies outside the band.
SpectrumLoss bandwidth_loss(const Spectrum& spec, const Bandlimits& band);

/// Fraction of in-band power lying farther than delta_f from the in-band peak.
/// The peak index is held fixed when differentiating.
SpectrumLoss sparsity_loss(const Spectrum& spec, const Bandlimits& band);

/// Squared CDF distance between the batch-mean normalized in-band spectrum and
/// the uniform distribution over the band's bins.
BatchSpectrumLoss variance_loss(std::span<const Spectrum> batch, const Bandlimits& band);

/// dL/dy for a loss of the one-sided spectrum psd(y, cfg), given dL/dpower.
/// Includes the mean-subtraction Jacobian. O(nfft log nfft).
std::vector<double> psd_backward(std::span<const double> d_power, std::span<const double> y,
                                 const SpectralConfig& cfg);

struct TotalLoss {
  LossBreakdown breakdown;
  std::vector<std::vector<double>> d_waveforms;
};

/// Full objective over a batch of predicted waveforms. Bandwidth and sparsity
/// are per-sample (each on band.scaled(band_scales[i])) and averaged; the
/// variance term is computed once over the batch on the unscaled band.
/// An empty band_scales means no resampling (all 1).
TotalLoss total_loss(std::span<const std::vector<double>> waveforms, const Bandlimits& band,
                     const SpectralConfig& cfg, const LossWeights& weights = {},
                     std::span<const double> band_scales = {});

}  // namespace sinc
