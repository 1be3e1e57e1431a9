#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sinc/clip.hpp"
#include "sinc/rng.hpp"

namespace sinc {

struct Distractor {
  double freq_hz = 0.3;
  double amplitude = 0.0;

  friend bool operator==(const Distractor&, const Distractor&) = default;
};

/// Recipe for synthetic clips: a hidden quasi-periodic signal carried by a
/// random subset of pixel/channel traces on top of a static texture around
/// 128, iid sensor noise, and an optional global out-of-band tone.
struct GenSpec {
  std::size_t frames = 120;
  std::size_t width = 8;
  std::size_t height = 8;
  std::size_t channels = 3;
  double fps = 30.0;
  double rate_lo_hz = 0.75;
  double rate_hi_hz = 2.5;
  double signal_amplitude = 1.0;
  double carrier_mask_frac = 0.5;
  double noise_sigma = 1.0;
  double drift = 0.05;  // max fractional deviation of the instantaneous rate
  std::optional<Distractor> distractor = Distractor{0.3, 2.0};
  double texture_amplitude = 10.0;
  // Linear brightness ramp across the clip (start to end difference).
  double illumination_drift = 0.0;
  std::uint64_t seed = 0;

  void validate() const;

  friend bool operator==(const GenSpec&, const GenSpec&) = default;
};

/// Pulse-analog defaults: 120 frames at 30 fps, 8x8x3.
GenSpec default_pulse_spec();
/// Respiration-analog defaults: 300 frames at 30 fps, rates 0.15-0.45 Hz.
GenSpec default_respiration_spec();

Clip gen_positive(const GenSpec& spec, Rng& rng);

/// A static smooth frame repeated for every time step, plus iid noise.
Clip gen_poisoned(const GenSpec& spec, Rng& rng);

/// T x P matrix (row-major) standing in for vertical motion: a random subset of
/// columns carries amplitude * gain * sin(2 pi rate t / fs), every column
/// carries iid noise.
struct MotionMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;
  std::vector<std::size_t> carriers;  // columns that carry the signal

  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
};

MotionMatrix gen_motion_matrix(std::size_t frames, std::size_t cols, double rate_hz, double fs,
                               double amplitude, double noise_sigma, Rng& rng,
                               double carrier_frac = 0.3);

/// Clip files: "SINCCLIP", u32 T, W, H, C, f64 fps, u8 label, u8 has_gt,
/// [T x f32 gt rate], then T*W*H*C little-endian f32 values, frame-major.
void write_clip(const std::filesystem::path& path, const Clip& clip);
Clip read_clip(const std::filesystem::path& path);
/// Rounds every value to float32, as a write/read round trip would.
Clip quantize_to_f32(Clip clip);

struct ManifestEntry {
  std::string path;  // relative to the manifest's directory
  ClipLabel label = ClipLabel::kPositive;
  double fps = 0.0;
  std::size_t frames = 0;
  double gt_mean_hz = 0.0;
  double gt_min_hz = 0.0;
  double gt_max_hz = 0.0;
};

struct DatasetManifest {
  static constexpr const char* kSchema = "sinc.manifest/1";
  GenSpec spec;
  std::string spec_hash;
  std::uint64_t seed = 0;
  double source_len_factor = 1.5;
  std::vector<ManifestEntry> entries;
  std::filesystem::path root;  // directory the manifest lives in; not serialized
};

/// Hex FNV-1a of the generator spec's canonical JSON.
std::string spec_hash(const GenSpec& spec);

/// Clip i of a generated dataset, from seed derive(spec.seed, "dataset.clip", i).
/// Frames are round(source_len_factor * spec.frames) so resampling has room.
Clip gen_dataset_clip(const GenSpec& spec, std::size_t index, double source_len_factor);

/// In-memory dataset identical to what gen_dataset writes (after f32 rounding).
std::vector<Clip> gen_clips(const GenSpec& spec, std::size_t n_clips, double source_len_factor);

DatasetManifest gen_dataset(const GenSpec& spec, std::size_t n_clips, double source_len_factor,
                            const std::filesystem::path& out_dir);

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);
DatasetManifest read_manifest(const std::filesystem::path& path);
std::vector<Clip> load_dataset(const DatasetManifest& manifest);

}  // namespace sinc
