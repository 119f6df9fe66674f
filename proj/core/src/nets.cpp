#include "addm/nets.hpp"

#include <cmath>
#include <utility>

#include "addm/error.hpp"
#include "addm/rng.hpp"

namespace addm {

namespace {

constexpr float kLeakySlope = 0.2f;

void require_positive(int v, const char* what) {
  if (v < 1) throw ValidationError(std::string(what) + " must be positive");
}

/// Walks a ParamSet and its staged tape ids in lockstep, asserting that the
/// graph builder consumes parameters in exactly the construction order.
class ParamCursor {
public:
  ParamCursor(const ParamSet& ps, const StagedParams& staged) : ps_(ps), staged_(staged) {}

  NodeId next(const std::string& expected_name) {
    if (i_ >= ps_.size() || ps_.names[i_] != expected_name)
      throw ValidationError("parameter order mismatch: expected " + expected_name);
    return staged_.ids[i_++];
  }

  void finish() const {
    if (i_ != ps_.size()) throw ValidationError("parameter set has unconsumed tensors");
  }

private:
  const ParamSet& ps_;
  const StagedParams& staged_;
  size_t i_ = 0;
};

struct BlockIds {
  NodeId conv1_w, conv1_b, norm1_g, norm1_b, temb_w, temb_b;
  NodeId conv2_w, conv2_b, norm2_g, norm2_b;
  NodeId skip_w = -1, skip_b = -1;
};

BlockIds take_block(ParamCursor& cur, const std::string& prefix, bool has_skip) {
  BlockIds b;
  b.conv1_w = cur.next(prefix + ".conv1.w");
  b.conv1_b = cur.next(prefix + ".conv1.b");
  b.norm1_g = cur.next(prefix + ".norm1.g");
  b.norm1_b = cur.next(prefix + ".norm1.b");
  b.temb_w = cur.next(prefix + ".temb.w");
  b.temb_b = cur.next(prefix + ".temb.b");
  b.conv2_w = cur.next(prefix + ".conv2.w");
  b.conv2_b = cur.next(prefix + ".conv2.b");
  b.norm2_g = cur.next(prefix + ".norm2.g");
  b.norm2_b = cur.next(prefix + ".norm2.b");
  if (has_skip) {
    b.skip_w = cur.next(prefix + ".skip.w");
    b.skip_b = cur.next(prefix + ".skip.b");
  }
  return b;
}

/// Residual block: conv-norm(+t)-silu-conv-norm-silu plus a shortcut
/// (1x1 projection when the channel count changes).
NodeId res_block(Tape& tape, const BlockIds& ids, NodeId x, NodeId temb, int out_ch) {
  NodeId h = tape.conv2d(x, ids.conv1_w, ids.conv1_b, 1, 1);
  h = tape.group_norm(h, ids.norm1_g, ids.norm1_b, norm_groups(out_ch), kNormEps);
  NodeId tproj = tape.linear(temb, ids.temb_w, ids.temb_b);
  h = tape.add_channel_bias(h, tproj);
  h = tape.silu(h);
  h = tape.conv2d(h, ids.conv2_w, ids.conv2_b, 1, 1);
  h = tape.group_norm(h, ids.norm2_g, ids.norm2_b, norm_groups(out_ch), kNormEps);
  h = tape.silu(h);
  NodeId shortcut = ids.skip_w >= 0 ? tape.conv2d(x, ids.skip_w, ids.skip_b, 1, 0) : x;
  return tape.add(h, shortcut);
}

void add_conv(ParamSet& ps, GaussianRng& rng, const std::string& prefix, int out_ch, int in_ch,
              int k, bool zero_init = false) {
  Tensor w({out_ch, in_ch, k, k});
  if (!zero_init) {
    const double std = std::sqrt(2.0 / (static_cast<double>(in_ch) * k * k));
    for (int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<float>(rng.next() * std);
  }
  ps.add(prefix + ".w", std::move(w));
  ps.add(prefix + ".b", Tensor::zeros({out_ch}));
}

void add_linear(ParamSet& ps, GaussianRng& rng, const std::string& prefix, int out_dim,
                int in_dim) {
  Tensor w({out_dim, in_dim});
  const double std = std::sqrt(2.0 / static_cast<double>(in_dim));
  for (int64_t i = 0; i < w.numel(); ++i) w[i] = static_cast<float>(rng.next() * std);
  ps.add(prefix + ".w", std::move(w));
  ps.add(prefix + ".b", Tensor::zeros({out_dim}));
}

void add_norm(ParamSet& ps, const std::string& prefix, int ch) {
  ps.add(prefix + ".g", Tensor::full({ch}, 1.0f));
  ps.add(prefix + ".b", Tensor::zeros({ch}));
}

void add_block(ParamSet& ps, GaussianRng& rng, const std::string& prefix, int in_ch, int out_ch,
               int temb_dim) {
  add_conv(ps, rng, prefix + ".conv1", out_ch, in_ch, 3);
  add_norm(ps, prefix + ".norm1", out_ch);
  add_linear(ps, rng, prefix + ".temb", out_ch, temb_dim);
  add_conv(ps, rng, prefix + ".conv2", out_ch, out_ch, 3);
  add_norm(ps, prefix + ".norm2", out_ch);
  if (in_ch != out_ch) add_conv(ps, rng, prefix + ".skip", out_ch, in_ch, 1);
}

std::vector<int> level_widths(const DenoiserConfig& cfg) {
  std::vector<int> w(static_cast<size_t>(cfg.depth));
  for (int i = 0; i < cfg.depth; ++i) w[static_cast<size_t>(i)] = cfg.base_width << i;
  return w;
}

int disc_width(const DiscriminatorConfig& cfg, int layer) { return cfg.base_width << layer; }

}  // namespace

void DenoiserConfig::validate() const {
  require_positive(image_size, "image_size");
  require_positive(base_width, "base_width");
  require_positive(depth, "depth");
  require_positive(time_embed_dim, "time_embed_dim");
  if (time_embed_dim % 2 != 0) throw ValidationError("time_embed_dim must be even");
  if (image_size % (1 << depth) != 0)
    throw ValidationError("image_size must be divisible by 2^depth");
}

void DiscriminatorConfig::validate() const {
  require_positive(image_size, "image_size");
  require_positive(base_width, "base_width");
  require_positive(n_layers, "n_layers");
  require_positive(time_embed_dim, "time_embed_dim");
  if (time_embed_dim % 2 != 0) throw ValidationError("time_embed_dim must be even");
  if (image_size % (1 << n_layers) != 0)
    throw ValidationError("image_size must be divisible by 2^n_layers");
}

void ParamSet::add(std::string name, Tensor t) {
  if (find(name) != nullptr) throw ValidationError("duplicate parameter name: " + name);
  names.push_back(std::move(name));
  tensors.push_back(std::move(t));
}

int64_t ParamSet::total_elements() const {
  int64_t n = 0;
  for (const Tensor& t : tensors) n += t.numel();
  return n;
}

const Tensor* ParamSet::find(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return &tensors[i];
  return nullptr;
}

bool ParamSet::all_finite() const {
  for (const Tensor& t : tensors)
    if (!t.all_finite()) return false;
  return true;
}

int norm_groups(int channels) {
  for (int g : {8, 4, 2})
    if (channels % g == 0) return g;
  return 1;
}

Tensor time_embedding(int t, int dim) {
  if (dim < 2 || dim % 2 != 0) throw ValidationError("time_embedding: dim must be even and >= 2");
  if (t < 0) throw ValidationError("time_embedding: t must be nonnegative");
  Tensor e({dim});
  const int half = dim / 2;
  for (int i = 0; i < half; ++i) {
    const double freq = std::pow(10000.0, -2.0 * i / static_cast<double>(dim));
    const double arg = static_cast<double>(t) * freq;
    e[i] = static_cast<float>(std::sin(arg));
    e[half + i] = static_cast<float>(std::cos(arg));
  }
  return e;
}

Tensor time_embedding_batch(std::span<const int> t, int dim) {
  Tensor out({static_cast<int64_t>(t.size()), dim});
  for (size_t b = 0; b < t.size(); ++b) {
    Tensor e = time_embedding(t[b], dim);
    std::copy(e.data(), e.data() + dim, out.data() + static_cast<int64_t>(b) * dim);
  }
  return out;
}

DenoiserParams init_denoiser(const DenoiserConfig& config, uint64_t seed) {
  config.validate();
  GaussianRng rng(seed);
  DenoiserParams dp;
  dp.config = config;
  ParamSet& ps = dp.params;
  const auto widths = level_widths(config);
  const int w0 = widths.front();
  const int wlast = widths.back();
  const int e = config.time_embed_dim;

  add_conv(ps, rng, "stem", w0, 1, 3);
  int ch = w0;
  for (int i = 0; i < config.depth; ++i) {
    add_block(ps, rng, "enc" + std::to_string(i), ch, widths[static_cast<size_t>(i)], e);
    ch = widths[static_cast<size_t>(i)];
  }
  add_block(ps, rng, "mid", wlast, wlast, e);
  ch = wlast;
  for (int i = config.depth - 1; i >= 0; --i) {
    const int wi = widths[static_cast<size_t>(i)];
    add_block(ps, rng, "dec" + std::to_string(i), ch + wi, wi, e);
    ch = wi;
  }
  add_norm(ps, "head.norm", w0);
  add_conv(ps, rng, "head.conv", 1, w0, 3, /*zero_init=*/true);
  return dp;
}

DiscriminatorParams init_discriminator(const DiscriminatorConfig& config, uint64_t seed) {
  config.validate();
  GaussianRng rng(seed);
  DiscriminatorParams dp;
  dp.config = config;
  ParamSet& ps = dp.params;

  add_conv(ps, rng, "conv0", disc_width(config, 0), 1, 3);
  add_linear(ps, rng, "temb", disc_width(config, 0), config.time_embed_dim);
  for (int l = 1; l < config.n_layers; ++l)
    add_conv(ps, rng, "conv" + std::to_string(l), disc_width(config, l), disc_width(config, l - 1),
             3);
  add_linear(ps, rng, "head", 1, disc_width(config, config.n_layers - 1));
  return dp;
}

StagedParams stage_params(Tape& tape, const ParamSet& params) {
  StagedParams staged;
  staged.ids.reserve(params.size());
  for (const Tensor& t : params.tensors) staged.ids.push_back(tape.leaf(t));
  return staged;
}

NodeId denoiser_graph(Tape& tape, const DenoiserParams& dp, const StagedParams& staged, NodeId x,
                      std::span<const int> t) {
  const DenoiserConfig& config = dp.config;
  config.validate();
  if (staged.ids.size() != dp.params.size())
    throw ValidationError("denoiser_graph: staged parameter count mismatch");
  const Tensor& xv = tape.value(x);
  require_rank4(xv, "denoiser input");
  if (xv.dim(1) != 1 || xv.dim(2) != config.image_size || xv.dim(3) != config.image_size)
    throw ValidationError("denoiser input must be (B, 1, image_size, image_size)");
  if (static_cast<int64_t>(t.size()) != xv.dim(0))
    throw ValidationError("denoiser: one timestep per batch item required");

  NodeId temb = tape.leaf(time_embedding_batch(t, config.time_embed_dim));
  const auto widths = level_widths(config);

  ParamCursor cur(dp.params, staged);
  NodeId stem_w = cur.next("stem.w");
  NodeId stem_b = cur.next("stem.b");
  NodeId h = tape.conv2d(x, stem_w, stem_b, 1, 1);

  std::vector<NodeId> skips;
  int ch = widths.front();
  for (int i = 0; i < config.depth; ++i) {
    const int out_ch = widths[static_cast<size_t>(i)];
    BlockIds ids = take_block(cur, "enc" + std::to_string(i), ch != out_ch);
    h = res_block(tape, ids, h, temb, out_ch);
    skips.push_back(h);
    h = tape.avg_pool2(h);
    ch = out_ch;
  }
  {
    BlockIds ids = take_block(cur, "mid", false);
    h = res_block(tape, ids, h, temb, ch);
  }
  for (int i = config.depth - 1; i >= 0; --i) {
    const int wi = widths[static_cast<size_t>(i)];
    h = tape.upsample_nearest2(h);
    h = tape.concat_channels(h, skips[static_cast<size_t>(i)]);
    BlockIds ids = take_block(cur, "dec" + std::to_string(i), true);
    h = res_block(tape, ids, h, temb, wi);
    ch = wi;
  }
  NodeId hg = cur.next("head.norm.g");
  NodeId hb = cur.next("head.norm.b");
  h = tape.group_norm(h, hg, hb, norm_groups(ch), kNormEps);
  h = tape.silu(h);
  NodeId hw = cur.next("head.conv.w");
  NodeId hcb = cur.next("head.conv.b");
  h = tape.conv2d(h, hw, hcb, 1, 1);
  cur.finish();
  return h;
}

NodeId discriminator_graph(Tape& tape, const DiscriminatorParams& dp, const StagedParams& staged,
                           NodeId x, std::span<const int> t) {
  const DiscriminatorConfig& config = dp.config;
  config.validate();
  if (staged.ids.size() != dp.params.size())
    throw ValidationError("discriminator_graph: staged parameter count mismatch");
  const Tensor& xv = tape.value(x);
  require_rank4(xv, "discriminator input");
  if (xv.dim(1) != 1 || xv.dim(2) != config.image_size || xv.dim(3) != config.image_size)
    throw ValidationError("discriminator input must be (B, 1, image_size, image_size)");
  if (static_cast<int64_t>(t.size()) != xv.dim(0))
    throw ValidationError("discriminator: one timestep per batch item required");

  NodeId temb = tape.leaf(time_embedding_batch(t, config.time_embed_dim));

  ParamCursor cur(dp.params, staged);
  NodeId w0 = cur.next("conv0.w");
  NodeId b0 = cur.next("conv0.b");
  NodeId h = tape.conv2d(x, w0, b0, 2, 1);
  NodeId tw = cur.next("temb.w");
  NodeId tb = cur.next("temb.b");
  h = tape.add_channel_bias(h, tape.linear(temb, tw, tb));
  h = tape.leaky_relu(h, kLeakySlope);
  for (int l = 1; l < config.n_layers; ++l) {
    NodeId wl = cur.next("conv" + std::to_string(l) + ".w");
    NodeId bl = cur.next("conv" + std::to_string(l) + ".b");
    h = tape.conv2d(h, wl, bl, 2, 1);
    h = tape.leaky_relu(h, kLeakySlope);
  }
  h = tape.global_avg_pool(h);
  NodeId hw = cur.next("head.w");
  NodeId hb = cur.next("head.b");
  h = tape.linear(h, hw, hb);
  cur.finish();
  return h;
}

Tensor denoiser_forward(const DenoiserParams& dp, const Tensor& x_t, std::span<const int> t) {
  Tape tape;
  StagedParams staged = stage_params(tape, dp.params);
  NodeId x = tape.leaf(x_t);
  NodeId out = denoiser_graph(tape, dp, staged, x, t);
  return tape.value(out);
}

std::vector<double> discriminator_forward(const DiscriminatorParams& dp, const Tensor& x,
                                          std::span<const int> t) {
  Tape tape;
  StagedParams staged = stage_params(tape, dp.params);
  NodeId xid = tape.leaf(x);
  NodeId out = discriminator_graph(tape, dp, staged, xid, t);
  const Tensor& logits = tape.value(out);
  std::vector<double> result(static_cast<size_t>(logits.numel()));
  for (int64_t i = 0; i < logits.numel(); ++i) result[static_cast<size_t>(i)] = logits[i];
  return result;
}

}  // namespace addm
