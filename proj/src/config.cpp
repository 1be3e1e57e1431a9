#include "sinc/config.hpp"

#include <set>
#include <string>

#include "sinc/error.hpp"
#include "sinc/io.hpp"
#include "sinc/rng.hpp"

namespace sinc {

namespace {

// Reads fields of one JSON object and remembers which keys were consumed so
// that leftovers can be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const Json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j_.is_object()) throw ConfigError((where_.empty() ? "config" : where_) + ": expected an object");
  }

  template <typename T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const Json::exception&) {
      throw ConfigError(path(key) + ": wrong type");
    }
  }

  const Json* child(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(const std::string& key) const { return where_.empty() ? key : where_ + "." + key; }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) throw ConfigError("unknown config key '" + path(it.key()) + "'");
    }
  }

 private:
  const Json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

}  // namespace

Json to_json(const GenSpec& s) {
  Json j;
  j["frames"] = s.frames;
  j["width"] = s.width;
  j["height"] = s.height;
  j["channels"] = s.channels;
  j["fps"] = s.fps;
  j["rate_lo_hz"] = s.rate_lo_hz;
  j["rate_hi_hz"] = s.rate_hi_hz;
  j["signal_amplitude"] = s.signal_amplitude;
  j["carrier_mask_frac"] = s.carrier_mask_frac;
  j["noise_sigma"] = s.noise_sigma;
  j["drift"] = s.drift;
  if (s.distractor) {
    j["distractor"] = {{"freq_hz", s.distractor->freq_hz}, {"amplitude", s.distractor->amplitude}};
  } else {
    j["distractor"] = nullptr;
  }
  j["texture_amplitude"] = s.texture_amplitude;
  j["illumination_drift"] = s.illumination_drift;
  j["seed"] = s.seed;
  return j;
}

GenSpec gen_spec_from_json(const Json& j, GenSpec s, const std::string& where) {
  ObjectReader r(j, where);
  r.get("frames", s.frames);
  r.get("width", s.width);
  r.get("height", s.height);
  r.get("channels", s.channels);
  r.get("fps", s.fps);
  r.get("rate_lo_hz", s.rate_lo_hz);
  r.get("rate_hi_hz", s.rate_hi_hz);
  r.get("signal_amplitude", s.signal_amplitude);
  r.get("carrier_mask_frac", s.carrier_mask_frac);
  r.get("noise_sigma", s.noise_sigma);
  r.get("drift", s.drift);
  if (const Json* d = r.child("distractor")) {
    if (d->is_null()) {
      s.distractor.reset();
    } else {
      Distractor dist = s.distractor.value_or(Distractor{});
      ObjectReader dr(*d, r.path("distractor"));
      dr.get("freq_hz", dist.freq_hz);
      dr.get("amplitude", dist.amplitude);
      dr.finish();
      s.distractor = dist;
    }
  }
  r.get("texture_amplitude", s.texture_amplitude);
  r.get("illumination_drift", s.illumination_drift);
  r.get("seed", s.seed);
  r.finish();
  s.validate();
  return s;
}

Json to_json(const ModelConfig& cfg) {
  Json layers = Json::array();
  for (const auto& l : cfg.layers) layers.push_back({l.in_channels, l.out_channels, l.kernel_size});
  return {{"width", cfg.width}, {"height", cfg.height}, {"channels", cfg.channels},
          {"layers", layers}};
}

ModelConfig model_config_from_json(const Json& j, const std::string& where) {
  ModelConfig cfg;
  ObjectReader r(j, where);
  r.get("width", cfg.width);
  r.get("height", cfg.height);
  r.get("channels", cfg.channels);
  if (const Json* layers = r.child("layers")) {
    if (!layers->is_array()) throw ConfigError(r.path("layers") + ": expected an array");
    cfg.layers.clear();
    for (const auto& l : *layers) {
      if (!l.is_array() || l.size() != 3) {
        throw ConfigError(r.path("layers") + ": each layer is [in, out, kernel]");
      }
      cfg.layers.push_back({l[0].get<std::size_t>(), l[1].get<std::size_t>(),
                            l[2].get<std::size_t>()});
    }
  } else if (cfg.channels != 3) {
    cfg.layers.front().in_channels = cfg.channels;
  }
  r.finish();
  cfg.validate();
  return cfg;
}

Json to_json(const AugmentConfig& c) {
  return {{"resample", c.resample},
          {"crop", c.crop},
          {"flip", c.flip},
          {"reverse", c.reverse},
          {"illumination", c.illumination},
          {"pixel_noise", c.pixel_noise},
          {"pixel_noise_sigma", c.pixel_noise_sigma},
          {"illum_sigma", c.illum_sigma},
          {"flip_p", c.flip_p},
          {"crop_min_frac", c.crop_min_frac},
          {"reverse_p", c.reverse_p},
          {"resample_range", {c.resample_lo, c.resample_hi}}};
}

AugmentConfig augment_from_json(const Json& j, AugmentConfig c, const std::string& where) {
  ObjectReader r(j, where);
  r.get("resample", c.resample);
  r.get("crop", c.crop);
  r.get("flip", c.flip);
  r.get("reverse", c.reverse);
  r.get("illumination", c.illumination);
  r.get("pixel_noise", c.pixel_noise);
  r.get("pixel_noise_sigma", c.pixel_noise_sigma);
  r.get("illum_sigma", c.illum_sigma);
  r.get("flip_p", c.flip_p);
  r.get("crop_min_frac", c.crop_min_frac);
  r.get("reverse_p", c.reverse_p);
  if (const Json* range = r.child("resample_range")) {
    if (!range->is_array() || range->size() != 2) {
      throw ConfigError(r.path("resample_range") + ": expected [lo, hi]");
    }
    c.resample_lo = (*range)[0].get<double>();
    c.resample_hi = (*range)[1].get<double>();
  }
  r.finish();
  c.validate();
  return c;
}

Json to_json(const Bandlimits& b) {
  return {{"low_hz", b.low_hz}, {"high_hz", b.high_hz}, {"delta_f_hz", b.delta_f_hz}};
}

Bandlimits band_from_json(const Json& j, const std::string& where) {
  Bandlimits b;
  ObjectReader r(j, where);
  r.get("low_hz", b.low_hz);
  r.get("high_hz", b.high_hz);
  r.get("delta_f_hz", b.delta_f_hz);
  r.finish();
  return b;
}

Json to_json(const SpectralConfig& c) { return {{"nfft", c.nfft}, {"fs", c.fs}}; }

SpectralConfig spectral_from_json(const Json& j, const std::string& where) {
  SpectralConfig c;
  ObjectReader r(j, where);
  r.get("nfft", c.nfft);
  r.get("fs", c.fs);
  r.finish();
  try {
    c.validate();
  } catch (const InvalidInput& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return c;
}

Json to_json(const AdamHyper& a) {
  return {{"lr", a.lr}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"eps", a.eps}};
}

Json to_json(const LossWeights& w) {
  return {{"bandwidth", w.bandwidth}, {"sparsity", w.sparsity}, {"variance", w.variance}};
}

namespace {

AdamHyper adam_from_json(const Json& j, AdamHyper a, const std::string& where) {
  ObjectReader r(j, where);
  r.get("lr", a.lr);
  r.get("beta1", a.beta1);
  r.get("beta2", a.beta2);
  r.get("eps", a.eps);
  r.finish();
  if (!(a.lr >= 0.0)) throw ConfigError(where + ".lr must be non-negative");
  return a;
}

LossWeights weights_from_json(const Json& j, LossWeights w, const std::string& where) {
  ObjectReader r(j, where);
  r.get("bandwidth", w.bandwidth);
  r.get("sparsity", w.sparsity);
  r.get("variance", w.variance);
  r.finish();
  if (!(w.bandwidth >= 0.0 && w.sparsity >= 0.0 && w.variance >= 0.0)) {
    throw ConfigError(where + ": loss weights must be non-negative");
  }
  return w;
}

}  // namespace

RunConfig run_config_from_json(const Json& j) {
  RunConfig rc;
  ObjectReader r(j, "");
  std::string schema;
  r.get("schema", schema);
  if (schema != RunConfig::kSchema) {
    throw ConfigError("config.schema must be \"" + std::string(RunConfig::kSchema) + "\"");
  }
  r.get("seed", rc.seed);
  if (const Json* b = r.child("band")) rc.band = band_from_json(*b, "band");
  if (const Json* s = r.child("spectral")) rc.spectral = spectral_from_json(*s, "spectral");

  if (const Json* g = r.child("generator")) rc.generator = gen_spec_from_json(*g, rc.generator, "generator");
  r.get("n_clips", rc.n_clips);
  r.get("source_len_factor", rc.source_len_factor);
  rc.eval_generator = rc.generator;
  if (const Json* g = r.child("eval_generator")) {
    rc.eval_generator = gen_spec_from_json(*g, rc.generator, "eval_generator");
  }
  r.get("n_eval", rc.n_eval);

  if (const Json* m = r.child("model")) rc.model = model_config_from_json(*m);

  if (const Json* t = r.child("train")) {
    ObjectReader tr(*t, "train");
    tr.get("epochs", rc.train.epochs);
    tr.get("batch_size", rc.train.batch_size);
    tr.get("clip_len", rc.train.clip_len);
    tr.get("poison_alpha", rc.train.poison_alpha);
    if (const Json* a = tr.child("augment")) rc.train.augment = augment_from_json(*a, rc.train.augment, "train.augment");
    if (const Json* a = tr.child("adam")) rc.train.adam = adam_from_json(*a, rc.train.adam, "train.adam");
    if (const Json* w = tr.child("weights")) rc.train.weights = weights_from_json(*w, rc.train.weights, "train.weights");
    tr.finish();
  }

  rc.subject = rc.generator;
  if (const Json* p = r.child("personalize")) {
    ObjectReader pr(*p, "personalize");
    pr.get("epochs", rc.personalize.epochs);
    pr.get("batch_size", rc.personalize.batch_size);
    pr.get("window", rc.personalize.window);
    pr.get("stride", rc.personalize.stride);
    pr.get("duration_s", rc.personalize.duration_s);
    if (const Json* a = pr.child("augment")) {
      rc.personalize.augment = augment_from_json(*a, rc.personalize.augment, "personalize.augment");
    }
    if (const Json* a = pr.child("adam")) rc.personalize.adam = adam_from_json(*a, rc.personalize.adam, "personalize.adam");
    if (const Json* w = pr.child("weights")) rc.personalize.weights = weights_from_json(*w, rc.personalize.weights, "personalize.weights");
    if (const Json* g = pr.child("subject")) rc.subject = gen_spec_from_json(*g, rc.generator, "personalize.subject");
    pr.finish();
  }

  rc.stream = rc.generator;
  if (const Json* t = r.child("tta")) {
    ObjectReader tr(*t, "tta");
    tr.get("n_tta", rc.tta.n_tta);
    tr.get("clip_len", rc.tta.clip_len);
    tr.get("stride", rc.tta.stride);
    tr.get("views", rc.tta.views);
    if (const Json* a = tr.child("augment")) rc.tta.augment = augment_from_json(*a, rc.tta.augment, "tta.augment");
    if (const Json* a = tr.child("adam")) rc.tta.adam = adam_from_json(*a, rc.tta.adam, "tta.adam");
    if (const Json* w = tr.child("weights")) rc.tta.weights = weights_from_json(*w, rc.tta.weights, "tta.weights");
    if (const Json* g = tr.child("stream")) rc.stream = gen_spec_from_json(*g, rc.generator, "tta.stream");
    tr.finish();
  }

  rc.sweep.cross_spec = rc.generator;
  if (const Json* s = r.child("sweep")) {
    ObjectReader sr(*s, "sweep");
    sr.get("alphas", rc.sweep.alphas);
    sr.get("folds", rc.sweep.folds);
    sr.get("seeds_per_fold", rc.sweep.seeds_per_fold);
    sr.get("n_cross", rc.sweep.n_cross);
    if (const Json* g = sr.child("cross_generator")) {
      rc.sweep.cross_spec = gen_spec_from_json(*g, rc.generator, "sweep.cross_generator");
    }
    sr.finish();
  }

  if (const Json* p = r.child("paths")) {
    ObjectReader pr(*p, "paths");
    std::string dataset;
    std::string checkpoint;
    pr.get("dataset", dataset);
    pr.get("checkpoint", checkpoint);
    pr.finish();
    if (!dataset.empty()) rc.dataset = dataset;
    if (!checkpoint.empty()) rc.checkpoint = checkpoint;
  }
  r.finish();
  rc.resolve();
  return rc;
}

void RunConfig::resolve() {
  generator.seed = derive_seed(seed, "gen");
  eval_generator.seed = derive_seed(seed, "gen.eval");
  subject.seed = derive_seed(seed, "gen.subject");
  stream.seed = derive_seed(seed, "gen.stream");
  model.seed = derive_seed(seed, "model");

  train.seed = derive_seed(seed, "train");
  train.band = band;
  train.spectral = spectral;

  personalize.seed = derive_seed(seed, "personalize");
  personalize.band = band;
  personalize.spectral = spectral;

  tta.seed = derive_seed(seed, "tta");

  sweep.seed = derive_seed(seed, "sweep");
  sweep.dataset_spec = generator;
  sweep.n_clips = n_clips;
  sweep.source_len_factor = source_len_factor;
  sweep.cross_spec.seed = derive_seed(seed, "gen.cross");
  sweep.model = model;
  sweep.train = train;

  try {
    band.validate(spectral.fs);
  } catch (const InvalidInput& e) {
    throw ConfigError(std::string("band: ") + e.what());
  }
  const auto check_generator = [&](const GenSpec& g, const char* name) {
    g.validate();
    if (g.width != model.width || g.height != model.height || g.channels != model.channels) {
      throw ConfigError(std::string(name) + " frame shape does not match the model's input shape");
    }
    if (g.fps != spectral.fs) {
      throw ConfigError(std::string(name) + ".fps must equal spectral.fs");
    }
  };
  check_generator(generator, "generator");
  check_generator(eval_generator, "eval_generator");
  check_generator(subject, "personalize.subject");
  check_generator(stream, "tta.stream");
  check_generator(sweep.cross_spec, "sweep.cross_generator");
  model.validate();
  train.validate();
  personalize.validate();
  tta.validate();
}

RunConfig load_run_config(const std::filesystem::path& path) {
  Json j;
  try {
    j = Json::parse(read_file(path));
  } catch (const Json::parse_error& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  try {
    return run_config_from_json(j);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace sinc
