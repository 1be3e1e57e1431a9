#include "sinc/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>
#include <random>

#include "binary_io.hpp"
#include "sinc/config.hpp"
#include "sinc/error.hpp"
#include "sinc/io.hpp"

namespace sinc {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Smooth per-channel texture around 128 built from a few random plane waves.
std::vector<double> static_texture(const GenSpec& spec, Rng& rng) {
  std::vector<double> frame(spec.width * spec.height * spec.channels, 128.0);
  if (spec.texture_amplitude == 0.0) return frame;
  std::uniform_real_distribution<double> freq(0.0, 1.5);
  std::uniform_real_distribution<double> phase(0.0, kTwoPi);
  std::uniform_real_distribution<double> amp(0.2, 1.0);
  for (std::size_t c = 0; c < spec.channels; ++c) {
    for (int wave = 0; wave < 3; ++wave) {
      const double fu = freq(rng);
      const double fv = freq(rng);
      const double ph = phase(rng);
      const double a = amp(rng) * spec.texture_amplitude / 3.0;
      for (std::size_t w = 0; w < spec.width; ++w) {
        for (std::size_t h = 0; h < spec.height; ++h) {
          const double arg = kTwoPi * (fu * static_cast<double>(w) / static_cast<double>(spec.width) +
                                       fv * static_cast<double>(h) / static_cast<double>(spec.height)) +
                             ph;
          frame[(w * spec.height + h) * spec.channels + c] += a * std::cos(arg);
        }
      }
    }
  }
  return frame;
}

Clip empty_clip(const GenSpec& spec) {
  return Clip(spec.frames, spec.width, spec.height, spec.channels, spec.fps);
}

}  // namespace

void GenSpec::validate() const {
  if (frames < 2) throw ConfigError("generator: frames must be at least 2");
  if (width == 0 || height == 0 || channels == 0) throw ConfigError("generator: empty spatial dims");
  if (!(fps > 0.0)) throw ConfigError("generator: fps must be positive");
  if (!(rate_lo_hz > 0.0 && rate_lo_hz <= rate_hi_hz && rate_hi_hz < fps / 2.0)) {
    throw ConfigError("generator: rate range must satisfy 0 < lo <= hi < fps/2");
  }
  if (!(signal_amplitude >= 0.0) || !(noise_sigma >= 0.0) || !(texture_amplitude >= 0.0)) {
    throw ConfigError("generator: amplitudes must be non-negative");
  }
  if (!(carrier_mask_frac > 0.0 && carrier_mask_frac <= 1.0)) {
    throw ConfigError("generator: carrier_mask_frac must lie in (0, 1]");
  }
  if (!(drift >= 0.0 && drift < 1.0)) throw ConfigError("generator: drift must lie in [0, 1)");
  if (distractor) {
    if (!(distractor->freq_hz > 0.0 && distractor->freq_hz < fps / 2.0) ||
        !(distractor->amplitude >= 0.0)) {
      throw ConfigError("generator: distractor must be below Nyquist with amplitude >= 0");
    }
  }
}

GenSpec default_pulse_spec() { return GenSpec{}; }

GenSpec default_respiration_spec() {
  GenSpec spec;
  spec.frames = 300;
  spec.fps = 30.0;
  spec.rate_lo_hz = 0.15;
  spec.rate_hi_hz = 0.45;
  spec.distractor = Distractor{1.2, 2.0};
  return spec;
}

Clip gen_positive(const GenSpec& spec, Rng& rng) {
  spec.validate();
  const std::uint64_t base = rng();
  auto stream = [base](std::string_view tag) { return make_rng(base, tag); };
  Clip clip = empty_clip(spec);
  clip.label = ClipLabel::kPositive;
  const std::size_t T = spec.frames;
  const std::size_t P = clip.frame_size();

  // Instantaneous rate: a slow sinusoidal wander around f0, kept in range.
  Rng rate_rng = stream("rate");
  const double f0 = std::uniform_real_distribution<double>(spec.rate_lo_hz, spec.rate_hi_hz)(rate_rng);
  const double depth = spec.drift * std::uniform_real_distribution<double>(-1.0, 1.0)(rate_rng);
  const double cycles = std::uniform_real_distribution<double>(0.25, 1.0)(rate_rng);
  const double wander_phase = std::uniform_real_distribution<double>(0.0, kTwoPi)(rate_rng);
  double phase = std::uniform_real_distribution<double>(0.0, kTwoPi)(rate_rng);
  std::vector<double> rate(T);
  std::vector<double> signal(T);
  for (std::size_t t = 0; t < T; ++t) {
    const double u = static_cast<double>(t) / static_cast<double>(T);
    const double f = f0 * (1.0 + depth * std::sin(kTwoPi * cycles * u + wander_phase));
    rate[t] = std::clamp(f, spec.rate_lo_hz, spec.rate_hi_hz);
    signal[t] = spec.signal_amplitude * std::sin(phase);
    phase += kTwoPi * rate[t] / spec.fps;
  }

  Rng mask_rng = stream("mask");
  std::vector<std::size_t> order(P);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), mask_rng);
  const auto n_carriers = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::lround(spec.carrier_mask_frac * static_cast<double>(P))));
  std::vector<double> gain(P, 0.0);
  std::uniform_real_distribution<double> gain_dist(0.5, 1.0);
  for (std::size_t i = 0; i < n_carriers; ++i) gain[order[i]] = gain_dist(mask_rng);

  Rng tex_rng = stream("texture");
  const std::vector<double> texture = static_texture(spec, tex_rng);

  Rng dist_rng = stream("distractor");
  const double dist_phase = std::uniform_real_distribution<double>(0.0, kTwoPi)(dist_rng);

  Rng noise_rng = stream("noise");
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
  for (std::size_t t = 0; t < T; ++t) {
    double common = 0.0;
    if (spec.distractor) {
      common += spec.distractor->amplitude *
                std::sin(kTwoPi * spec.distractor->freq_hz * static_cast<double>(t) / spec.fps +
                         dist_phase);
    }
    common += spec.illumination_drift *
              (static_cast<double>(t) / static_cast<double>(T - 1) - 0.5);
    auto frame = clip.frame(t);
    for (std::size_t p = 0; p < P; ++p) {
      double v = texture[p] + common + gain[p] * signal[t];
      if (spec.noise_sigma > 0.0) v += noise(noise_rng);
      frame[p] = v;
    }
  }
  clip.gt_rate_hz = std::move(rate);
  return clip;
}

Clip gen_poisoned(const GenSpec& spec, Rng& rng) {
  spec.validate();
  const std::uint64_t base = rng();
  Clip clip = empty_clip(spec);
  clip.label = ClipLabel::kPoisoned;
  Rng tex_rng = make_rng(base, "texture");
  const std::vector<double> texture = static_texture(spec, tex_rng);
  Rng noise_rng = make_rng(base, "noise");
  std::normal_distribution<double> noise(0.0, spec.noise_sigma > 0.0 ? spec.noise_sigma : 1.0);
  for (std::size_t t = 0; t < spec.frames; ++t) {
    auto frame = clip.frame(t);
    for (std::size_t p = 0; p < frame.size(); ++p) {
      frame[p] = texture[p] + (spec.noise_sigma > 0.0 ? noise(noise_rng) : 0.0);
    }
  }
  return clip;
}

MotionMatrix gen_motion_matrix(std::size_t frames, std::size_t cols, double rate_hz, double fs,
                               double amplitude, double noise_sigma, Rng& rng,
                               double carrier_frac) {
  if (cols == 0 || frames < 2) throw InvalidInput("motion matrix needs P >= 1 and T >= 2");
  if (!(fs > 0.0) || !(noise_sigma >= 0.0)) throw InvalidInput("motion matrix: bad fs or sigma");
  const std::uint64_t base = rng();
  MotionMatrix m;
  m.rows = frames;
  m.cols = cols;
  m.data.assign(frames * cols, 0.0);

  Rng pick = make_rng(base, "carriers");
  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), pick);
  const auto n_carriers = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::lround(carrier_frac * static_cast<double>(cols))), 1, cols);
  m.carriers.assign(order.begin(), order.begin() + static_cast<long>(n_carriers));
  std::sort(m.carriers.begin(), m.carriers.end());
  std::vector<double> gain(cols, 0.0);
  std::uniform_real_distribution<double> mag(0.5, 1.0);
  for (std::size_t c : m.carriers) gain[c] = (pick() & 1U ? 1.0 : -1.0) * mag(pick);
  const double phase = std::uniform_real_distribution<double>(0.0, kTwoPi)(pick);

  Rng noise_rng = make_rng(base, "noise");
  std::normal_distribution<double> noise(0.0, noise_sigma > 0.0 ? noise_sigma : 1.0);
  for (std::size_t t = 0; t < frames; ++t) {
    const double s = amplitude * std::sin(kTwoPi * rate_hz * static_cast<double>(t) / fs + phase);
    for (std::size_t c = 0; c < cols; ++c) {
      double v = gain[c] * s;
      if (noise_sigma > 0.0) v += noise(noise_rng);
      m.data[t * cols + c] = v;
    }
  }
  return m;
}

namespace {
constexpr std::string_view kClipMagic = "SINCCLIP";
}

void write_clip(const std::filesystem::path& path, const Clip& clip) {
  clip.validate();
  detail::ByteWriter out;
  out.raw(kClipMagic);
  out.u32(static_cast<std::uint32_t>(clip.frames));
  out.u32(static_cast<std::uint32_t>(clip.width));
  out.u32(static_cast<std::uint32_t>(clip.height));
  out.u32(static_cast<std::uint32_t>(clip.channels));
  out.f64(clip.fps);
  out.u8(clip.label == ClipLabel::kPositive ? 0 : 1);
  out.u8(clip.gt_rate_hz ? 1 : 0);
  if (clip.gt_rate_hz) {
    for (double r : *clip.gt_rate_hz) out.f32(static_cast<float>(r));
  }
  for (double v : clip.data) out.f32(static_cast<float>(v));
  write_file_atomic(path, out.bytes());
}

Clip read_clip(const std::filesystem::path& path) {
  const std::string bytes = read_file(path);
  detail::ByteReader in(bytes, path.string());
  if (in.raw(kClipMagic.size()) != kClipMagic) throw IoError(path.string() + ": not a clip file");
  const std::size_t T = in.u32();
  const std::size_t W = in.u32();
  const std::size_t H = in.u32();
  const std::size_t C = in.u32();
  const double fps = in.f64();
  const std::uint8_t label = in.u8();
  const std::uint8_t has_gt = in.u8();
  if (label > 1 || has_gt > 1) throw IoError(path.string() + ": bad label or flag byte");
  const std::size_t expected = (has_gt ? T : 0) * 4 + T * W * H * C * 4;
  if (in.remaining() != expected) throw IoError(path.string() + ": size does not match header");

  Clip clip(T, W, H, C, fps);
  clip.label = label == 0 ? ClipLabel::kPositive : ClipLabel::kPoisoned;
  if (has_gt) {
    std::vector<double> gt(T);
    for (double& r : gt) r = in.f32();
    clip.gt_rate_hz = std::move(gt);
  }
  for (double& v : clip.data) v = in.f32();
  try {
    clip.validate();
  } catch (const InvalidInput& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  return clip;
}

Clip quantize_to_f32(Clip clip) {
  for (double& v : clip.data) v = static_cast<float>(v);
  if (clip.gt_rate_hz) {
    for (double& r : *clip.gt_rate_hz) r = static_cast<float>(r);
  }
  return clip;
}

std::string spec_hash(const GenSpec& spec) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(to_json(spec).dump())));
  return buf;
}

Clip gen_dataset_clip(const GenSpec& spec, std::size_t index, double source_len_factor) {
  if (!(source_len_factor >= 1.0)) throw ConfigError("source_len_factor must be at least 1");
  GenSpec source = spec;
  source.frames = static_cast<std::size_t>(
      std::lround(source_len_factor * static_cast<double>(spec.frames)));
  Rng rng = make_rng(spec.seed, "dataset.clip", index);
  return gen_positive(source, rng);
}

std::vector<Clip> gen_clips(const GenSpec& spec, std::size_t n_clips, double source_len_factor) {
  std::vector<Clip> clips;
  clips.reserve(n_clips);
  for (std::size_t i = 0; i < n_clips; ++i) {
    clips.push_back(quantize_to_f32(gen_dataset_clip(spec, i, source_len_factor)));
  }
  return clips;
}

DatasetManifest gen_dataset(const GenSpec& spec, std::size_t n_clips, double source_len_factor,
                            const std::filesystem::path& out_dir) {
  spec.validate();
  DatasetManifest manifest;
  manifest.spec = spec;
  manifest.spec_hash = spec_hash(spec);
  manifest.seed = spec.seed;
  manifest.source_len_factor = source_len_factor;
  manifest.root = out_dir;
  for (std::size_t i = 0; i < n_clips; ++i) {
    char name[48];
    std::snprintf(name, sizeof name, "clips/clip_%05zu.sinc", i);
    const Clip clip = gen_dataset_clip(spec, i, source_len_factor);
    write_clip(out_dir / name, clip);
    ManifestEntry e;
    e.path = name;
    e.label = clip.label;
    e.fps = clip.fps;
    e.frames = clip.frames;
    const auto& gt = *clip.gt_rate_hz;
    e.gt_mean_hz = static_cast<float>(clip.mean_gt_rate_hz());
    e.gt_min_hz = static_cast<float>(*std::min_element(gt.begin(), gt.end()));
    e.gt_max_hz = static_cast<float>(*std::max_element(gt.begin(), gt.end()));
    manifest.entries.push_back(e);
  }
  write_manifest(out_dir / "manifest.json", manifest);
  return manifest;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  Json j;
  j["schema"] = DatasetManifest::kSchema;
  j["seed"] = manifest.seed;
  j["spec_hash"] = manifest.spec_hash;
  j["source_len_factor"] = manifest.source_len_factor;
  j["generator"] = to_json(manifest.spec);
  Json entries = Json::array();
  for (const auto& e : manifest.entries) {
    entries.push_back({{"path", e.path},
                       {"label", e.label == ClipLabel::kPositive ? "positive" : "poisoned"},
                       {"fps", e.fps},
                       {"frames", e.frames},
                       {"gt_mean_hz", e.gt_mean_hz},
                       {"gt_min_hz", e.gt_min_hz},
                       {"gt_max_hz", e.gt_max_hz}});
  }
  j["entries"] = std::move(entries);
  write_file_atomic(path, j.dump(2) + "\n");
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw IoError(path.string() + ": " + e.what());
  }
  try {
    if (j.at("schema").get<std::string>() != DatasetManifest::kSchema) {
      throw IoError(path.string() + ": unsupported manifest schema");
    }
    DatasetManifest m;
    m.root = path.parent_path();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.spec_hash = j.at("spec_hash").get<std::string>();
    m.source_len_factor = j.at("source_len_factor").get<double>();
    m.spec = gen_spec_from_json(j.at("generator"));
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.path = e.at("path").get<std::string>();
      entry.label = e.at("label").get<std::string>() == "positive" ? ClipLabel::kPositive
                                                                    : ClipLabel::kPoisoned;
      entry.fps = e.at("fps").get<double>();
      entry.frames = e.at("frames").get<std::size_t>();
      entry.gt_mean_hz = e.at("gt_mean_hz").get<double>();
      entry.gt_min_hz = e.at("gt_min_hz").get<double>();
      entry.gt_max_hz = e.at("gt_max_hz").get<double>();
      m.entries.push_back(entry);
    }
    return m;
  } catch (const Json::exception& e) {
    throw IoError(path.string() + ": malformed manifest: " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::vector<Clip> load_dataset(const DatasetManifest& manifest) {
  std::vector<Clip> clips;
  clips.reserve(manifest.entries.size());
  for (const auto& e : manifest.entries) clips.push_back(read_clip(manifest.root / e.path));
  return clips;
}

}  // namespace sinc
