#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "sinc/clip.hpp"

namespace sinc {

struct ConvLayerSpec {
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_size = 0;

  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

/// Spatial projection (one weight per pixel and channel, contracting each
/// frame to C channel traces, which are then centered in time) followed by a
/// same-padded temporal convolution stack with tanh between layers and a
/// linear output layer of width 1.
struct ModelConfig {
  std::size_t width = 8;
  std::size_t height = 8;
  std::size_t channels = 3;
  std::vector<ConvLayerSpec> layers{{3, 8, 7}, {8, 8, 7}, {8, 1, 7}};
  std::uint64_t seed = 0;

  void validate() const;
  std::size_t parameter_count() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// All trainable values in one flat buffer, in declaration order: spatial
/// weights (W x H x C), then per layer the kernel (out x in x k) and bias (out).
class ModelParams {
 public:
  ModelParams() = default;
  explicit ModelParams(ModelConfig cfg);

  const ModelConfig& config() const { return config_; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  std::span<double> spatial();
  std::span<const double> spatial() const;
  std::span<double> kernel(std::size_t layer);
  std::span<const double> kernel(std::size_t layer) const;
  std::span<double> bias(std::size_t layer);
  std::span<const double> bias(std::size_t layer) const;

  /// FNV-1a over the raw bytes of every value.
  std::uint64_t checksum() const;

  friend bool operator==(const ModelParams&, const ModelParams&) = default;

 private:
  std::size_t kernel_offset(std::size_t layer) const;

  ModelConfig config_;
  std::vector<double> values_;
};

/// Gradients share the parameter layout.
using ModelGrads = ModelParams;

/// Zero-initialized gradient buffer matching params.
ModelGrads zeros_like(const ModelParams& params);

/// Scaled-uniform init (kernels and biases in +-sqrt(1/fan_in)); spatial
/// weights are positive and sum to 1 within each channel.
ModelParams init_model(const ModelConfig& cfg);

struct ActivationCache {
  std::uint64_t params_checksum = 0;
  std::size_t frames = 0;
  std::vector<double> input;  // clip data used by the forward pass
  // activations[0] is the centered projection (T x C); activations[l + 1] is
  // the output of layer l (T x out_l), post-tanh except for the last layer.
  std::vector<std::vector<double>> activations;
};

struct ForwardResult {
  std::vector<double> waveform;
  ActivationCache cache;
};

ForwardResult forward(const ModelParams& params, const Clip& clip);

/// Inference only.
std::vector<double> predict(const ModelParams& params, const Clip& clip);

/// Gradients of <d_waveform, forward(params, clip)> w.r.t. params.
/// Throws InvalidState if params changed since the cache was produced.
ModelGrads backward(const ModelParams& params, const ActivationCache& cache,
                    std::span<const double> d_waveform);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam(const ModelParams& params, const AdamHyper& hyper = {});

/// Bias-corrected Adam update in place. Throws NumericError on non-finite
/// gradients, leaving params and state untouched.
void adam_step(ModelParams& params, const ModelGrads& grads, AdamState& state);

/// Checkpoint format: "SINCMDL1", then length-prefixed config fields, then
/// parameters as little-endian float64 in declaration order.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& path);

}  // namespace sinc
