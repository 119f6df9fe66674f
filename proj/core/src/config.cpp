#include "addm/config.hpp"

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <set>

#include "addm/error.hpp"

namespace addm {

namespace {

using nlohmann::json;

const std::set<std::string> kKnownKeys = {
    "T", "lambda", "epochs", "batch_size", "base_lr", "lr_decay_factor", "lr_decay_every",
    "sigma_mode", "seed", "checkpoint_every", "beta_start", "beta_end", "image_size",
    "base_width", "depth", "time_embed_dim", "disc_base_width", "disc_n_layers",
    "skull_radius_range", "n_internal_blobs", "blob_intensity_range", "lesion_radius_range",
    "lesion_contrast", "n_normal", "n_anomalous", "t_ad", "quantile", "n_recon"};

template <typename T>
T get_as(const json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config key \"" + key + "\": wrong type");
  }
}

template <typename T>
void read_scalar(const json& doc, const std::string& key, T& out) {
  if (!doc.contains(key)) return;
  const json& v = doc.at(key);
  if constexpr (std::is_same_v<T, double>) {
    if (!v.is_number()) throw ValidationError("config key \"" + key + "\": expected a number");
  } else if constexpr (std::is_same_v<T, int>) {
    if (!v.is_number_integer())
      throw ValidationError("config key \"" + key + "\": expected an integer");
  } else if constexpr (std::is_same_v<T, uint64_t>) {
    if (!v.is_number_unsigned() && !v.is_number_integer())
      throw ValidationError("config key \"" + key + "\": expected a nonnegative integer");
  } else if constexpr (std::is_same_v<T, std::string>) {
    if (!v.is_string()) throw ValidationError("config key \"" + key + "\": expected a string");
  }
  out = get_as<T>(v, key);
}

void read_range(const json& doc, const std::string& key, double& lo, double& hi) {
  if (!doc.contains(key)) return;
  const json& v = doc.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
    throw ValidationError("config key \"" + key + "\": expected [low, high]");
  lo = v[0].get<double>();
  hi = v[1].get<double>();
}

void read_int_range(const json& doc, const std::string& key, int& lo, int& hi) {
  if (!doc.contains(key)) return;
  const json& v = doc.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
    throw ValidationError("config key \"" + key + "\": expected [low, high] integers");
  lo = v[0].get<int>();
  hi = v[1].get<int>();
}

}  // namespace

int RunConfig::effective_t_ad() const {
  if (t_ad > 0) return t_ad;
  return std::max(1, train.T / 4);
}

void RunConfig::validate() const {
  train.validate();
  phantoms.validate();
  if (phantoms.size != train.denoiser.image_size)
    throw ValidationError("image_size: phantom size must match the model image size");
  if (n_normal < 1) throw ValidationError("n_normal must be >= 1");
  if (n_anomalous < 0) throw ValidationError("n_anomalous must be >= 0");
  if (t_ad < 0 || t_ad > train.T) throw ValidationError("t_ad must lie in 1..T (or 0 for auto)");
  if (!(quantile > 0.0) || !(quantile < 1.0)) throw ValidationError("quantile must lie in (0, 1)");
  if (n_recon < 1) throw ValidationError("n_recon must be >= 1");
}

RunConfig parse_config_text(const std::string& json_text) {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) throw ValidationError("config is not valid JSON");
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");

  for (const auto& [key, value] : doc.items()) {
    (void)value;
    if (!kKnownKeys.contains(key)) throw ValidationError("unknown config key \"" + key + "\"");
  }

  RunConfig c;
  read_scalar(doc, "T", c.train.T);
  read_scalar(doc, "lambda", c.train.lambda);
  read_scalar(doc, "epochs", c.train.epochs);
  read_scalar(doc, "batch_size", c.train.batch_size);
  read_scalar(doc, "base_lr", c.train.base_lr);
  read_scalar(doc, "lr_decay_factor", c.train.lr_decay_factor);
  read_scalar(doc, "lr_decay_every", c.train.lr_decay_every);
  std::string sigma_mode = to_string(c.train.sigma_mode);
  read_scalar(doc, "sigma_mode", sigma_mode);
  c.train.sigma_mode = sigma_mode_from_string(sigma_mode);
  read_scalar(doc, "seed", c.train.seed);
  read_scalar(doc, "checkpoint_every", c.train.checkpoint_every);
  read_scalar(doc, "beta_start", c.train.beta_start);
  read_scalar(doc, "beta_end", c.train.beta_end);

  read_scalar(doc, "image_size", c.train.denoiser.image_size);
  read_scalar(doc, "base_width", c.train.denoiser.base_width);
  read_scalar(doc, "depth", c.train.denoiser.depth);
  read_scalar(doc, "time_embed_dim", c.train.denoiser.time_embed_dim);
  c.train.discriminator.image_size = c.train.denoiser.image_size;
  c.train.discriminator.time_embed_dim = c.train.denoiser.time_embed_dim;
  read_scalar(doc, "disc_base_width", c.train.discriminator.base_width);
  read_scalar(doc, "disc_n_layers", c.train.discriminator.n_layers);

  c.phantoms.size = c.train.denoiser.image_size;
  c.phantoms.seed = c.train.seed;
  read_range(doc, "skull_radius_range", c.phantoms.skull_radius_min, c.phantoms.skull_radius_max);
  read_int_range(doc, "n_internal_blobs", c.phantoms.blobs_min, c.phantoms.blobs_max);
  read_range(doc, "blob_intensity_range", c.phantoms.blob_intensity_min,
             c.phantoms.blob_intensity_max);
  read_range(doc, "lesion_radius_range", c.phantoms.lesion_radius_min,
             c.phantoms.lesion_radius_max);
  read_scalar(doc, "lesion_contrast", c.phantoms.lesion_contrast);

  read_scalar(doc, "n_normal", c.n_normal);
  read_scalar(doc, "n_anomalous", c.n_anomalous);
  read_scalar(doc, "t_ad", c.t_ad);
  read_scalar(doc, "quantile", c.quantile);
  read_scalar(doc, "n_recon", c.n_recon);

  c.validate();
  return c;
}

RunConfig parse_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config file: " + path.string());
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

std::string effective_config_json(const RunConfig& config) {
  json doc{
      {"T", config.train.T},
      {"lambda", config.train.lambda},
      {"epochs", config.train.epochs},
      {"batch_size", config.train.batch_size},
      {"base_lr", config.train.base_lr},
      {"lr_decay_factor", config.train.lr_decay_factor},
      {"lr_decay_every", config.train.lr_decay_every},
      {"sigma_mode", to_string(config.train.sigma_mode)},
      {"seed", config.train.seed},
      {"checkpoint_every", config.train.checkpoint_every},
      {"beta_start", config.train.beta_start},
      {"beta_end", config.train.beta_end},
      {"image_size", config.train.denoiser.image_size},
      {"base_width", config.train.denoiser.base_width},
      {"depth", config.train.denoiser.depth},
      {"time_embed_dim", config.train.denoiser.time_embed_dim},
      {"disc_base_width", config.train.discriminator.base_width},
      {"disc_n_layers", config.train.discriminator.n_layers},
      {"skull_radius_range", {config.phantoms.skull_radius_min, config.phantoms.skull_radius_max}},
      {"n_internal_blobs", {config.phantoms.blobs_min, config.phantoms.blobs_max}},
      {"blob_intensity_range",
       {config.phantoms.blob_intensity_min, config.phantoms.blob_intensity_max}},
      {"lesion_radius_range",
       {config.phantoms.lesion_radius_min, config.phantoms.lesion_radius_max}},
      {"lesion_contrast", config.phantoms.lesion_contrast},
      {"n_normal", config.n_normal},
      {"n_anomalous", config.n_anomalous},
      {"t_ad", config.effective_t_ad()},
      {"quantile", config.quantile},
      {"n_recon", config.n_recon},
  };
  return doc.dump(2) + "\n";
}

}  // namespace addm
