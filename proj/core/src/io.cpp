#include "addm/io.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <vector>

#include "addm/error.hpp"

namespace addm {

namespace {

using nlohmann::json;

constexpr uint32_t kFormatVersion = 1;
const char kAdtfMagic[4] = {'A', 'D', 'T', 'F'};
const char kCkptMagic[4] = {'A', 'D', 'D', 'M'};

// All multi-byte fields are little-endian; this implementation targets
// little-endian hosts and writes native-order scalars directly.
template <typename T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is, const std::string& what) {
  T v;
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("truncated file while reading " + what);
  return v;
}

void put_tensor_payload(std::ostream& os, const Tensor& t) {
  os.write(reinterpret_cast<const char*>(t.data()),
           static_cast<std::streamsize>(t.numel() * sizeof(float)));
}

Tensor get_tensor_payload(std::istream& is, std::vector<int64_t> shape, const std::string& what) {
  Tensor t(std::move(shape));
  is.read(reinterpret_cast<char*>(t.data()),
          static_cast<std::streamsize>(t.numel() * sizeof(float)));
  if (!is) throw IoError("truncated payload while reading " + what);
  return t;
}

void put_dims(std::ostream& os, const Tensor& t) {
  put<uint8_t>(os, static_cast<uint8_t>(t.rank()));
  for (int i = 0; i < t.rank(); ++i) put<uint32_t>(os, static_cast<uint32_t>(t.dim(i)));
}

std::vector<int64_t> get_dims(std::istream& is, const std::string& what) {
  const auto ndim = get<uint8_t>(is, what);
  if (ndim == 0 || ndim > 8) throw IoError(what + ": bad rank " + std::to_string(ndim));
  std::vector<int64_t> shape(ndim);
  for (auto& d : shape) d = get<uint32_t>(is, what);
  return shape;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  return is;
}

void write_named_tensor(std::ostream& os, const std::string& name, const Tensor& t) {
  put<uint16_t>(os, static_cast<uint16_t>(name.size()));
  os.write(name.data(), static_cast<std::streamsize>(name.size()));
  put_dims(os, t);
  put_tensor_payload(os, t);
}

std::pair<std::string, Tensor> read_named_tensor(std::istream& is) {
  const auto name_len = get<uint16_t>(is, "tensor name");
  std::string name(name_len, '\0');
  is.read(name.data(), name_len);
  if (!is) throw IoError("truncated tensor name");
  auto shape = get_dims(is, "tensor " + name);
  Tensor t = get_tensor_payload(is, std::move(shape), "tensor " + name);
  return {std::move(name), std::move(t)};
}

json config_to_json(const DenoiserConfig& c) {
  return json{{"image_size", c.image_size},
              {"base_width", c.base_width},
              {"depth", c.depth},
              {"time_embed_dim", c.time_embed_dim}};
}

json config_to_json(const DiscriminatorConfig& c) {
  return json{{"image_size", c.image_size},
              {"base_width", c.base_width},
              {"n_layers", c.n_layers},
              {"time_embed_dim", c.time_embed_dim}};
}

// Optimizer moments live in double precision in memory; the file stores f32.
Tensor moments_to_f32(const std::vector<double>& v, const Tensor& like) {
  Tensor t(like.shape());
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(v[static_cast<size_t>(i)]);
  return t;
}

void f32_to_moments(const Tensor& t, std::vector<double>& v) {
  v.resize(static_cast<size_t>(t.numel()));
  for (int64_t i = 0; i < t.numel(); ++i) v[static_cast<size_t>(i)] = t[i];
}

}  // namespace

void write_adtf(const std::filesystem::path& path, const Tensor& t) {
  auto os = open_out(path);
  os.write(kAdtfMagic, 4);
  put<uint32_t>(os, kFormatVersion);
  put<uint8_t>(os, 0);  // dtype f32
  put_dims(os, t);
  put_tensor_payload(os, t);
  if (!os) throw IoError("write failed: " + path.string());
}

Tensor read_adtf(const std::filesystem::path& path) {
  auto is = open_in(path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kAdtfMagic, 4) != 0)
    throw IoError("not an ADTF file: " + path.string());
  if (get<uint32_t>(is, "version") != kFormatVersion)
    throw IoError("unsupported ADTF version: " + path.string());
  if (get<uint8_t>(is, "dtype") != 0) throw IoError("unsupported ADTF dtype: " + path.string());
  auto shape = get_dims(is, path.string());
  return get_tensor_payload(is, std::move(shape), path.string());
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json header{{"schedule",
               {{"T", ckpt.T},
                {"beta_start", ckpt.beta_start},
                {"beta_end", ckpt.beta_end},
                {"sigma_mode", to_string(ckpt.sigma_mode)}}},
              {"denoiser", config_to_json(ckpt.denoiser.config)},
              {"discriminator", config_to_json(ckpt.discriminator.config)},
              {"lambda", ckpt.lambda},
              {"epoch", ckpt.epoch},
              {"seed", ckpt.seed},
              {"opt_denoiser_step", ckpt.opt_denoiser.step},
              {"opt_discriminator_step", ckpt.opt_discriminator.step}};
  const std::string header_text = header.dump();

  auto os = open_out(path);
  os.write(kCkptMagic, 4);
  put<uint32_t>(os, kFormatVersion);
  put<uint32_t>(os, static_cast<uint32_t>(header_text.size()));
  os.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));

  const auto count = ckpt.denoiser.params.size() + ckpt.discriminator.params.size() +
                     2 * ckpt.opt_denoiser.m.size() + 2 * ckpt.opt_discriminator.m.size();
  put<uint32_t>(os, static_cast<uint32_t>(count));

  const ParamSet& dn = ckpt.denoiser.params;
  const ParamSet& dc = ckpt.discriminator.params;
  for (size_t i = 0; i < dn.size(); ++i) write_named_tensor(os, "denoiser." + dn.names[i], dn.tensors[i]);
  for (size_t i = 0; i < dc.size(); ++i) write_named_tensor(os, "disc." + dc.names[i], dc.tensors[i]);
  for (size_t i = 0; i < dn.size(); ++i) {
    write_named_tensor(os, "opt_denoiser.m." + dn.names[i], ckpt.opt_denoiser.m[i]);
    write_named_tensor(os, "opt_denoiser.v." + dn.names[i], ckpt.opt_denoiser.v[i]);
  }
  for (size_t i = 0; i < dc.size(); ++i) {
    write_named_tensor(os, "opt_disc.m." + dc.names[i], ckpt.opt_discriminator.m[i]);
    write_named_tensor(os, "opt_disc.v." + dc.names[i], ckpt.opt_discriminator.v[i]);
  }
  if (!os) throw IoError("write failed: " + path.string());
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  auto is = open_in(path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw IoError("not an ADDM checkpoint: " + path.string());
  if (get<uint32_t>(is, "version") != kFormatVersion)
    throw IoError("unsupported checkpoint version: " + path.string());
  const auto header_len = get<uint32_t>(is, "header length");
  std::string header_text(header_len, '\0');
  is.read(header_text.data(), header_len);
  if (!is) throw IoError("truncated checkpoint header: " + path.string());

  json header = json::parse(header_text, nullptr, false);
  if (header.is_discarded()) throw IoError("corrupt checkpoint header: " + path.string());

  Checkpoint ckpt;
  try {
    const json& sch = header.at("schedule");
    ckpt.T = sch.at("T").get<int>();
    ckpt.beta_start = sch.at("beta_start").get<double>();
    ckpt.beta_end = sch.at("beta_end").get<double>();
    ckpt.sigma_mode = sigma_mode_from_string(sch.at("sigma_mode").get<std::string>());
    const json& dn = header.at("denoiser");
    ckpt.denoiser.config = {dn.at("image_size").get<int>(), dn.at("base_width").get<int>(),
                            dn.at("depth").get<int>(), dn.at("time_embed_dim").get<int>()};
    const json& dc = header.at("discriminator");
    ckpt.discriminator.config = {dc.at("image_size").get<int>(), dc.at("base_width").get<int>(),
                                 dc.at("n_layers").get<int>(), dc.at("time_embed_dim").get<int>()};
    ckpt.lambda = header.at("lambda").get<double>();
    ckpt.epoch = header.at("epoch").get<int64_t>();
    ckpt.seed = header.at("seed").get<uint64_t>();
    ckpt.opt_denoiser.step = header.at("opt_denoiser_step").get<int64_t>();
    ckpt.opt_discriminator.step = header.at("opt_discriminator_step").get<int64_t>();
  } catch (const json::exception& e) {
    throw IoError("bad checkpoint header (" + std::string(e.what()) + "): " + path.string());
  }

  const auto count = get<uint32_t>(is, "tensor count");
  // Structural layout comes from the configs; tensors are matched by name.
  DenoiserParams dn_shape = init_denoiser(ckpt.denoiser.config, 0);
  DiscriminatorParams dc_shape = init_discriminator(ckpt.discriminator.config, 0);
  ckpt.denoiser.config = dn_shape.config;
  ckpt.discriminator.config = dc_shape.config;
  ckpt.denoiser.params = std::move(dn_shape.params);
  ckpt.discriminator.params = std::move(dc_shape.params);
  const int64_t dstep = ckpt.opt_denoiser.step;
  const int64_t cstep = ckpt.opt_discriminator.step;
  ckpt.opt_denoiser = AdamState::like(ckpt.denoiser.params);
  ckpt.opt_discriminator = AdamState::like(ckpt.discriminator.params);
  ckpt.opt_denoiser.step = dstep;
  ckpt.opt_discriminator.step = cstep;

  auto store = [&](const std::string& name, Tensor t) {
    auto assign = [&](ParamSet& ps, std::vector<Tensor>* alt, const std::string& rest) -> bool {
      for (size_t i = 0; i < ps.size(); ++i) {
        if (ps.names[i] == rest) {
          Tensor& dst = alt ? (*alt)[i] : ps.tensors[i];
          require_same_shape(dst, t, "checkpoint tensor");
          dst = std::move(t);
          return true;
        }
      }
      return false;
    };
    bool ok = false;
    if (name.starts_with("denoiser."))
      ok = assign(ckpt.denoiser.params, nullptr, name.substr(9));
    else if (name.starts_with("disc."))
      ok = assign(ckpt.discriminator.params, nullptr, name.substr(5));
    else if (name.starts_with("opt_denoiser.m."))
      ok = assign(ckpt.denoiser.params, &ckpt.opt_denoiser.m, name.substr(15));
    else if (name.starts_with("opt_denoiser.v."))
      ok = assign(ckpt.denoiser.params, &ckpt.opt_denoiser.v, name.substr(15));
    else if (name.starts_with("opt_disc.m."))
      ok = assign(ckpt.discriminator.params, &ckpt.opt_discriminator.m, name.substr(11));
    else if (name.starts_with("opt_disc.v."))
      ok = assign(ckpt.discriminator.params, &ckpt.opt_discriminator.v, name.substr(11));
    if (!ok) throw IoError("unknown checkpoint tensor \"" + name + "\": " + path.string());
  };

  for (uint32_t i = 0; i < count; ++i) {
    auto [name, t] = read_named_tensor(is);
    store(name, std::move(t));
  }
  return ckpt;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  json arr = json::array();
  for (const ManifestRecord& r : manifest.records) {
    json rec{{"id", r.id}, {"image_path", r.image_path}, {"label", r.label}, {"seed", r.seed}};
    if (!r.mask_path.empty()) rec["mask_path"] = r.mask_path;
    arr.push_back(std::move(rec));
  }
  std::ofstream os(path);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  os << arr.dump(2) << "\n";
  if (!os) throw IoError("write failed: " + path.string());
}

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  json arr = json::parse(is, nullptr, false);
  if (arr.is_discarded() || !arr.is_array())
    throw IoError("manifest is not a JSON array: " + path.string());
  DatasetManifest m;
  for (const json& rec : arr) {
    try {
      ManifestRecord r;
      r.id = rec.at("id").get<std::string>();
      r.image_path = rec.at("image_path").get<std::string>();
      r.label = rec.at("label").get<std::string>();
      r.seed = rec.at("seed").get<uint64_t>();
      if (rec.contains("mask_path")) r.mask_path = rec.at("mask_path").get<std::string>();
      m.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw IoError("bad manifest record (" + std::string(e.what()) + "): " + path.string());
    }
  }
  m.validate();
  return m;
}

void write_pgm_preview(const std::filesystem::path& path, const Tensor& image) {
  require_rank4(image, "pgm preview");
  const int64_t h = image.dim(2), w = image.dim(3);
  auto os = open_out(path);
  os << "P5\n" << w << " " << h << "\n255\n";
  for (int64_t y = 0; y < h; ++y) {
    for (int64_t x = 0; x < w; ++x) {
      const float v = std::clamp(image.at(0, 0, y, x), -1.0f, 1.0f);
      const auto byte = static_cast<unsigned char>(std::lround((v + 1.0f) * 127.5f));
      os.put(static_cast<char>(byte));
    }
  }
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace addm
