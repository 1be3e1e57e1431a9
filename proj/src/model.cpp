#include "sinc/model.hpp"

#include <cmath>
#include <cstring>
#include <random>
#include <string>

#include "binary_io.hpp"
#include "sinc/error.hpp"
#include "sinc/io.hpp"
#include "sinc/rng.hpp"

namespace sinc {

void ModelConfig::validate() const {
  if (width == 0 || height == 0 || channels == 0) {
    throw ConfigError("model spatial dims must be positive");
  }
  if (layers.empty()) throw ConfigError("model needs at least one temporal layer");
  if (layers.front().in_channels != channels) {
    throw ConfigError("first temporal layer must take " + std::to_string(channels) +
                      " input channels");
  }
  if (layers.back().out_channels != 1) throw ConfigError("last temporal layer must output 1 channel");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto& s = layers[l];
    if (s.in_channels == 0 || s.out_channels == 0) {
      throw ConfigError("layer " + std::to_string(l) + " has zero channels");
    }
    if (s.kernel_size % 2 == 0) {
      throw ConfigError("layer " + std::to_string(l) + " kernel size must be odd");
    }
    if (l > 0 && layers[l - 1].out_channels != s.in_channels) {
      throw ConfigError("layer " + std::to_string(l) + " input channels do not match layer " +
                        std::to_string(l - 1) + " output");
    }
  }
}

std::size_t ModelConfig::parameter_count() const {
  std::size_t n = width * height * channels;
  for (const auto& s : layers) n += s.out_channels * s.in_channels * s.kernel_size + s.out_channels;
  return n;
}

ModelParams::ModelParams(ModelConfig cfg) : config_(std::move(cfg)) {
  config_.validate();
  values_.assign(config_.parameter_count(), 0.0);
}

std::size_t ModelParams::kernel_offset(std::size_t layer) const {
  std::size_t off = config_.width * config_.height * config_.channels;
  for (std::size_t l = 0; l < layer; ++l) {
    const auto& s = config_.layers[l];
    off += s.out_channels * s.in_channels * s.kernel_size + s.out_channels;
  }
  return off;
}

std::span<double> ModelParams::spatial() {
  return std::span<double>(values_).first(config_.width * config_.height * config_.channels);
}
std::span<const double> ModelParams::spatial() const {
  return std::span<const double>(values_).first(config_.width * config_.height * config_.channels);
}
std::span<double> ModelParams::kernel(std::size_t layer) {
  const auto& s = config_.layers.at(layer);
  return std::span<double>(values_).subspan(kernel_offset(layer),
                                            s.out_channels * s.in_channels * s.kernel_size);
}
std::span<const double> ModelParams::kernel(std::size_t layer) const {
  const auto& s = config_.layers.at(layer);
  return std::span<const double>(values_).subspan(kernel_offset(layer),
                                                  s.out_channels * s.in_channels * s.kernel_size);
}
std::span<double> ModelParams::bias(std::size_t layer) {
  const auto& s = config_.layers.at(layer);
  return std::span<double>(values_).subspan(
      kernel_offset(layer) + s.out_channels * s.in_channels * s.kernel_size, s.out_channels);
}
std::span<const double> ModelParams::bias(std::size_t layer) const {
  const auto& s = config_.layers.at(layer);
  return std::span<const double>(values_).subspan(
      kernel_offset(layer) + s.out_channels * s.in_channels * s.kernel_size, s.out_channels);
}

std::uint64_t ModelParams::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : values_) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) {
      h ^= (bits >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

ModelGrads zeros_like(const ModelParams& params) { return ModelGrads(params.config()); }

ModelParams init_model(const ModelConfig& cfg) {
  ModelParams params(cfg);
  Rng rng(derive_seed(cfg.seed, "model.init"));

  auto spatial = params.spatial();
  std::uniform_real_distribution<double> positive(0.5, 1.0);
  for (double& w : spatial) w = positive(rng);
  for (std::size_t c = 0; c < cfg.channels; ++c) {
    double sum = 0.0;
    for (std::size_t p = c; p < spatial.size(); p += cfg.channels) sum += spatial[p];
    for (std::size_t p = c; p < spatial.size(); p += cfg.channels) spatial[p] /= sum;
  }

  for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
    const auto& s = cfg.layers[l];
    const double bound = std::sqrt(1.0 / static_cast<double>(s.in_channels * s.kernel_size));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& w : params.kernel(l)) w = dist(rng);
    for (double& b : params.bias(l)) b = dist(rng);
  }
  return params;
}

namespace {

void check_clip_shape(const ModelConfig& cfg, const Clip& clip) {
  if (clip.width != cfg.width || clip.height != cfg.height || clip.channels != cfg.channels) {
    throw InvalidInput("clip is " + std::to_string(clip.width) + "x" +
                       std::to_string(clip.height) + "x" + std::to_string(clip.channels) +
                       " but the model expects " + std::to_string(cfg.width) + "x" +
                       std::to_string(cfg.height) + "x" + std::to_string(cfg.channels));
  }
  if (clip.frames < 1 || clip.data.size() != clip.frames * clip.frame_size()) {
    throw InvalidInput("clip data size does not match its shape");
  }
}

}  // namespace

ForwardResult forward(const ModelParams& params, const Clip& clip) {
  const ModelConfig& cfg = params.config();
  check_clip_shape(cfg, clip);
  for (double v : clip.data) {
    if (!std::isfinite(v)) throw InvalidInput("clip contains a non-finite value");
  }
  const std::size_t T = clip.frames;
  const std::size_t C = cfg.channels;
  const std::size_t P = clip.frame_size();

  ForwardResult out;
  out.cache.params_checksum = params.checksum();
  out.cache.frames = T;
  out.cache.input = clip.data;
  out.cache.activations.resize(cfg.layers.size() + 1);

  // Spatial projection, then remove each channel's temporal mean.
  auto& proj = out.cache.activations[0];
  proj.assign(T * C, 0.0);
  const auto spatial = params.spatial();
  for (std::size_t t = 0; t < T; ++t) {
    const double* x = clip.data.data() + t * P;
    double* z = proj.data() + t * C;
    for (std::size_t p = 0; p < P; ++p) z[p % C] += spatial[p] * x[p];
  }
  for (std::size_t c = 0; c < C; ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) mean += proj[t * C + c];
    mean /= static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) proj[t * C + c] -= mean;
  }

  for (std::size_t l = 0; l < cfg.layers.size(); ++l) {
    const auto& s = cfg.layers[l];
    const auto kernel = params.kernel(l);
    const auto bias = params.bias(l);
    const auto& prev = out.cache.activations[l];
    auto& next = out.cache.activations[l + 1];
    next.assign(T * s.out_channels, 0.0);
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(s.kernel_size / 2);
    const bool last = (l + 1 == cfg.layers.size());
    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t o = 0; o < s.out_channels; ++o) {
        double acc = bias[o];
        for (std::size_t j = 0; j < s.kernel_size; ++j) {
          const std::ptrdiff_t tt = static_cast<std::ptrdiff_t>(t + j) - half;
          if (tt < 0 || tt >= static_cast<std::ptrdiff_t>(T)) continue;
          const double* in = prev.data() + static_cast<std::size_t>(tt) * s.in_channels;
          const double* k = kernel.data() + o * s.in_channels * s.kernel_size + j;
          for (std::size_t i = 0; i < s.in_channels; ++i) acc += k[i * s.kernel_size] * in[i];
        }
        next[t * s.out_channels + o] = last ? acc : std::tanh(acc);
      }
    }
  }
  out.waveform = out.cache.activations.back();
  return out;
}

std::vector<double> predict(const ModelParams& params, const Clip& clip) {
  return forward(params, clip).waveform;
}

ModelGrads backward(const ModelParams& params, const ActivationCache& cache,
                    std::span<const double> d_waveform) {
  const ModelConfig& cfg = params.config();
  if (cache.activations.size() != cfg.layers.size() + 1 ||
      cache.params_checksum != params.checksum()) {
    throw InvalidState("activation cache does not belong to these parameters");
  }
  const std::size_t T = cache.frames;
  if (d_waveform.size() != T) {
    throw InvalidInput("upstream gradient has " + std::to_string(d_waveform.size()) +
                       " samples, forward produced " + std::to_string(T));
  }
  const std::size_t C = cfg.channels;

  ModelGrads grads = zeros_like(params);
  std::vector<double> d_act(d_waveform.begin(), d_waveform.end());  // dL/d(pre-activation)

  for (std::size_t l = cfg.layers.size(); l-- > 0;) {
    const auto& s = cfg.layers[l];
    const auto kernel = params.kernel(l);
    auto d_kernel = grads.kernel(l);
    auto d_bias = grads.bias(l);
    const auto& prev = cache.activations[l];
    std::vector<double> d_prev(T * s.in_channels, 0.0);
    const std::ptrdiff_t half = static_cast<std::ptrdiff_t>(s.kernel_size / 2);

    for (std::size_t t = 0; t < T; ++t) {
      for (std::size_t o = 0; o < s.out_channels; ++o) {
        const double g = d_act[t * s.out_channels + o];
        if (g == 0.0) continue;
        d_bias[o] += g;
        for (std::size_t j = 0; j < s.kernel_size; ++j) {
          const std::ptrdiff_t tt = static_cast<std::ptrdiff_t>(t + j) - half;
          if (tt < 0 || tt >= static_cast<std::ptrdiff_t>(T)) continue;
          const std::size_t row = static_cast<std::size_t>(tt) * s.in_channels;
          const std::size_t kbase = o * s.in_channels * s.kernel_size + j;
          for (std::size_t i = 0; i < s.in_channels; ++i) {
            d_kernel[kbase + i * s.kernel_size] += g * prev[row + i];
            d_prev[row + i] += g * kernel[kbase + i * s.kernel_size];
          }
        }
      }
    }
    if (l > 0) {
      // prev = tanh(pre) for every hidden layer.
      for (std::size_t n = 0; n < d_prev.size(); ++n) d_prev[n] *= 1.0 - prev[n] * prev[n];
    }
    d_act = std::move(d_prev);
  }

  // d_act now holds dL/d(centered projection), T x C. Centering is symmetric.
  for (std::size_t c = 0; c < C; ++c) {
    double mean = 0.0;
    for (std::size_t t = 0; t < T; ++t) mean += d_act[t * C + c];
    mean /= static_cast<double>(T);
    for (std::size_t t = 0; t < T; ++t) d_act[t * C + c] -= mean;
  }
  auto d_spatial = grads.spatial();
  const std::size_t P = d_spatial.size();
  for (std::size_t t = 0; t < T; ++t) {
    const double* x = cache.input.data() + t * P;
    const double* dz = d_act.data() + t * C;
    for (std::size_t p = 0; p < P; ++p) d_spatial[p] += dz[p % C] * x[p];
  }
  return grads;
}

AdamState make_adam(const ModelParams& params, const AdamHyper& hyper) {
  AdamState state;
  state.m.assign(params.values().size(), 0.0);
  state.v.assign(params.values().size(), 0.0);
  state.lr = hyper.lr;
  state.beta1 = hyper.beta1;
  state.beta2 = hyper.beta2;
  state.eps = hyper.eps;
  return state;
}

void adam_step(ModelParams& params, const ModelGrads& grads, AdamState& state) {
  auto w = params.values();
  const auto g = grads.values();
  if (g.size() != w.size() || state.m.size() != w.size() || state.v.size() != w.size()) {
    throw InvalidInput("adam_step: parameter, gradient, and moment shapes differ");
  }
  for (double v : g) {
    if (!std::isfinite(v)) throw NumericError("adam_step: non-finite gradient");
  }
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < w.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g[i];
    state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g[i] * g[i];
    const double m_hat = state.m[i] / correction1;
    const double v_hat = state.v[i] / correction2;
    w[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
  }
}

namespace {
constexpr std::string_view kModelMagic = "SINCMDL1";
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params) {
  const ModelConfig& cfg = params.config();
  detail::ByteWriter out;
  out.raw(kModelMagic);

  out.u32(12);
  out.u32(static_cast<std::uint32_t>(cfg.width));
  out.u32(static_cast<std::uint32_t>(cfg.height));
  out.u32(static_cast<std::uint32_t>(cfg.channels));

  out.u32(static_cast<std::uint32_t>(4 + 12 * cfg.layers.size()));
  out.u32(static_cast<std::uint32_t>(cfg.layers.size()));
  for (const auto& s : cfg.layers) {
    out.u32(static_cast<std::uint32_t>(s.in_channels));
    out.u32(static_cast<std::uint32_t>(s.out_channels));
    out.u32(static_cast<std::uint32_t>(s.kernel_size));
  }

  out.u32(8);
  out.u64(cfg.seed);

  out.u64(params.values().size());
  for (double v : params.values()) out.f64(v);
  write_file_atomic(path, out.bytes());
}

ModelParams load_checkpoint(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  detail::ByteReader in(bytes, path.string());
  if (in.raw(kModelMagic.size()) != kModelMagic) throw IoError(path.string() + ": not a model checkpoint");

  ModelConfig cfg;
  if (in.u32() != 12) throw IoError(path.string() + ": bad dims field");
  cfg.width = in.u32();
  cfg.height = in.u32();
  cfg.channels = in.u32();

  const std::uint32_t layer_bytes = in.u32();
  const std::uint32_t n_layers = in.u32();
  if (layer_bytes != 4 + 12 * n_layers) throw IoError(path.string() + ": bad layer field");
  cfg.layers.clear();
  for (std::uint32_t l = 0; l < n_layers; ++l) {
    ConvLayerSpec s;
    s.in_channels = in.u32();
    s.out_channels = in.u32();
    s.kernel_size = in.u32();
    cfg.layers.push_back(s);
  }
  if (in.u32() != 8) throw IoError(path.string() + ": bad seed field");
  cfg.seed = in.u64();

  ModelParams params;
  try {
    params = ModelParams(cfg);
  } catch (const ConfigError& e) {
    throw IoError(path.string() + ": invalid model config: " + e.what());
  }
  const std::uint64_t count = in.u64();
  if (count != params.values().size()) throw IoError(path.string() + ": parameter count mismatch");
  for (double& v : params.values()) v = in.f64();
  if (!in.at_end()) throw IoError(path.string() + ": trailing bytes after parameters");
  return params;
}

}  // namespace sinc
