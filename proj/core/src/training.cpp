#include "addm/training.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "addm/autodiff.hpp"
#include "addm/error.hpp"
#include "addm/io.hpp"

namespace addm {

namespace {

// Stream ids; each stochastic ingredient of the loop owns one.
constexpr uint64_t kStreamDenoiserInit = 1;
constexpr uint64_t kStreamDiscInit = 2;
constexpr uint64_t kStreamTimesteps = 3;
constexpr uint64_t kStreamEps = 4;
constexpr uint64_t kStreamEpsReal = 5;
constexpr uint64_t kStreamZ = 6;
constexpr uint64_t kStreamShuffle = 7;

std::vector<Tensor> collect_grads(Tape& tape, const StagedParams& staged) {
  std::vector<Tensor> grads;
  grads.reserve(staged.ids.size());
  for (NodeId id : staged.ids) grads.push_back(tape.grad(id));
  return grads;
}

void check_finite(double v, const char* term, int64_t step) {
  if (!std::isfinite(v))
    throw NumericalError(std::string("non-finite ") + term + " at step " + std::to_string(step));
}

void validate_batch(const Tensor& batch, const TrainConfig& config) {
  require_rank4(batch, "train batch");
  if (batch.dim(1) != 1 || batch.dim(2) != config.denoiser.image_size ||
      batch.dim(3) != config.denoiser.image_size)
    throw ValidationError("train batch must be (B, 1, image_size, image_size)");
  if (!batch.all_finite()) throw ValidationError("train batch contains non-finite values");
  if (batch.min_value() < -1.0001f || batch.max_value() > 1.0001f)
    throw ValidationError("train batch must be normalized to [-1, 1]");
}

}  // namespace

void TrainConfig::validate() const {
  if (T < 1) throw ValidationError("T must be >= 1");
  if (lambda < 0.0) throw ValidationError("lambda must be nonnegative");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(base_lr > 0.0)) throw ValidationError("base_lr must be positive");
  if (!(lr_decay_factor > 0.0) || lr_decay_factor > 1.0)
    throw ValidationError("lr_decay_factor must be in (0, 1]");
  if (lr_decay_every < 1) throw ValidationError("lr_decay_every must be >= 1");
  if (checkpoint_every < 1) throw ValidationError("checkpoint_every must be >= 1");
  if (!(beta_start > 0.0) || !(beta_start <= beta_end) || !(beta_end < 1.0))
    throw ValidationError("need 0 < beta_start <= beta_end < 1");
  denoiser.validate();
  discriminator.validate();
  if (denoiser.image_size != discriminator.image_size)
    throw ValidationError("denoiser and discriminator image_size must match");
}

double lr_at_epoch(double base_lr, int64_t epoch, double factor, int64_t every) {
  if (every < 1) throw ValidationError("lr_at_epoch: every must be >= 1");
  if (epoch < 0) throw ValidationError("lr_at_epoch: epoch must be nonnegative");
  return base_lr * std::pow(factor, static_cast<double>(epoch / every));
}

TrainState::TrainState()
    : t_sampler(0), noise_eps(0), noise_real(0), noise_z(0), shuffler(0) {}

TrainState init_train_state(const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.schedule = make_linear_schedule(config.T, config.beta_start, config.beta_end);
  s.denoiser = init_denoiser(config.denoiser, derive_seed(config.seed, kStreamDenoiserInit));
  s.discriminator =
      init_discriminator(config.discriminator, derive_seed(config.seed, kStreamDiscInit));
  s.opt_denoiser = AdamState::like(s.denoiser.params);
  s.opt_discriminator = AdamState::like(s.discriminator.params);
  s.t_sampler = Pcg32(derive_seed(config.seed, kStreamTimesteps));
  s.noise_eps = GaussianRng(derive_seed(config.seed, kStreamEps));
  s.noise_real = GaussianRng(derive_seed(config.seed, kStreamEpsReal));
  s.noise_z = GaussianRng(derive_seed(config.seed, kStreamZ));
  s.shuffler = Pcg32(derive_seed(config.seed, kStreamShuffle));
  return s;
}

LossBreakdown train_step(TrainState& state, const Tensor& batch, const TrainConfig& config,
                         const TrainStepOptions& options, double* t_mean_out) {
  validate_batch(batch, config);
  const NoiseSchedule& schedule = state.schedule;
  const int64_t bs = batch.dim(0);
  const int64_t per_item = batch.numel() / bs;
  const double lr =
      lr_at_epoch(config.base_lr, state.epoch, config.lr_decay_factor, config.lr_decay_every);

  // (a) one uniform timestep per example
  std::vector<int> ts(static_cast<size_t>(bs));
  double t_sum = 0.0;
  for (auto& t : ts) {
    t = 1 + static_cast<int>(state.t_sampler.next_below(static_cast<uint32_t>(config.T)));
    t_sum += t;
  }
  if (t_mean_out) *t_mean_out = t_sum / static_cast<double>(bs);

  // (b) x_t from the closed-form marginal; real x_{t-1} with fresh noise
  Tensor eps = state.noise_eps.normal(batch.shape());
  Tensor x_t = forward_marginal_batch(batch, ts, eps, schedule);

  Tensor eps_real = state.noise_real.normal(batch.shape());
  Tensor real_prev(batch.shape());
  for (int64_t b = 0; b < bs; ++b) {
    const int t = ts[static_cast<size_t>(b)];
    const float* x0 = batch.data() + b * per_item;
    const float* er = eps_real.data() + b * per_item;
    float* out = real_prev.data() + b * per_item;
    if (t == 1) {
      std::copy(x0, x0 + per_item, out);
    } else {
      const double abar = schedule.alpha_bar(t - 1);
      const float c1 = static_cast<float>(std::sqrt(abar));
      const float c2 = static_cast<float>(std::sqrt(1.0 - abar));
      for (int64_t i = 0; i < per_item; ++i) out[i] = c1 * x0[i] + c2 * er[i];
    }
  }

  // (c) predicted noise and the fake x_{t-1}; z = 0 where t == 1
  Tensor z = state.noise_z.normal(batch.shape());
  for (int64_t b = 0; b < bs; ++b)
    if (ts[static_cast<size_t>(b)] == 1)
      std::fill(z.data() + b * per_item, z.data() + (b + 1) * per_item, 0.0f);

  std::vector<float> rc_a(static_cast<size_t>(bs)), rc_c(static_cast<size_t>(bs)),
      rc_s(static_cast<size_t>(bs));
  for (int64_t b = 0; b < bs; ++b) {
    const ReverseCoeffs c =
        reverse_coeffs(schedule, ts[static_cast<size_t>(b)], config.sigma_mode);
    rc_a[static_cast<size_t>(b)] = c.inv_sqrt_alpha;
    rc_c[static_cast<size_t>(b)] = c.eps_coeff;
    rc_s[static_cast<size_t>(b)] = c.sigma;
  }

  Tape gen_tape;
  StagedParams staged_den = stage_params(gen_tape, state.denoiser.params);
  NodeId x_t_node = gen_tape.leaf(x_t);
  NodeId eps_pred_node = denoiser_graph(gen_tape, state.denoiser, staged_den, x_t_node, ts);
  NodeId fake_node = gen_tape.reverse_combine(x_t, eps_pred_node, z, rc_a, rc_c, rc_s);

  // Discriminator conditioning: the timestep of the sample it judges.
  std::vector<int> ts_prev(static_cast<size_t>(bs));
  for (int64_t b = 0; b < bs; ++b) ts_prev[static_cast<size_t>(b)] = ts[static_cast<size_t>(b)] - 1;

  LossBreakdown bd;
  bd.lambda = config.lambda;

  // (d) discriminator update on (real, detached fake)
  if (options.update_discriminator) {
    Tape disc_tape;
    StagedParams staged_disc = stage_params(disc_tape, state.discriminator.params);
    NodeId real_node = disc_tape.leaf(real_prev);
    NodeId fake_detached = disc_tape.leaf(gen_tape.value(fake_node));
    NodeId real_logits =
        discriminator_graph(disc_tape, state.discriminator, staged_disc, real_node, ts_prev);
    NodeId fake_logits =
        discriminator_graph(disc_tape, state.discriminator, staged_disc, fake_detached, ts_prev);
    NodeId d_loss = disc_tape.bce_logits(real_logits, fake_logits);

    const Tensor& rl = disc_tape.value(real_logits);
    const Tensor& fl = disc_tape.value(fake_logits);
    std::vector<double> rlv(rl.data(), rl.data() + rl.numel());
    std::vector<double> flv(fl.data(), fl.data() + fl.numel());
    bd.l_disc = discriminator_loss(rlv, flv);
    check_finite(bd.l_disc, "l_disc", state.step);

    disc_tape.backward(d_loss);
    adam_step(state.discriminator.params, collect_grads(disc_tape, staged_disc),
              state.opt_discriminator, lr);
  }

  // (e) denoiser update; discriminator participates frozen (fresh staging of
  // its post-update parameters, gradients discarded)
  NodeId gen_loss = gen_tape.mse_vs(eps_pred_node, eps);
  if (config.lambda > 0.0) {
    StagedParams staged_disc_frozen = stage_params(gen_tape, state.discriminator.params);
    NodeId fake_logits = discriminator_graph(gen_tape, state.discriminator, staged_disc_frozen,
                                             fake_node, ts_prev);
    NodeId adv_loss = gen_tape.mean_softplus_neg(fake_logits);
    const Tensor& fl = gen_tape.value(fake_logits);
    std::vector<double> flv(fl.data(), fl.data() + fl.numel());
    bd.l_adv_gen = adversarial_generator_loss(flv);
    gen_loss = gen_tape.axpy_scalar(gen_loss, config.lambda, adv_loss);
  }

  bd.l_ddpm = ddpm_loss(eps, gen_tape.value(eps_pred_node));
  check_finite(bd.l_ddpm, "l_ddpm", state.step);
  check_finite(bd.l_adv_gen, "l_adv_gen", state.step);
  bd.l_total = addm_generator_objective(bd.l_ddpm, bd.l_adv_gen, config.lambda);
  check_finite(bd.l_total, "l_total", state.step);

  gen_tape.backward(gen_loss);
  adam_step(state.denoiser.params, collect_grads(gen_tape, staged_den), state.opt_denoiser, lr);

  state.step += 1;
  return bd;
}

void run_training(TrainState& state, const std::vector<Tensor>& images, const TrainConfig& config,
                  const StepCallback& on_step, const EpochCallback& on_epoch,
                  const TrainStepOptions& options) {
  config.validate();
  if (images.empty()) throw ValidationError("run_training: empty image set");
  const int64_t s = config.denoiser.image_size;
  for (const Tensor& img : images)
    if (img.rank() != 4 || img.dim(0) != 1 || img.dim(1) != 1 || img.dim(2) != s || img.dim(3) != s)
      throw ValidationError("run_training: images must be (1, 1, image_size, image_size)");

  const int64_t n = static_cast<int64_t>(images.size());
  std::vector<int64_t> order(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) order[static_cast<size_t>(i)] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    // Fisher-Yates with the dedicated shuffle stream
    for (int64_t i = n - 1; i >= 1; --i)
      std::swap(order[static_cast<size_t>(i)],
                order[state.shuffler.next_below(static_cast<uint32_t>(i + 1))]);

    for (int64_t start = 0; start < n; start += config.batch_size) {
      const int64_t bs = std::min<int64_t>(config.batch_size, n - start);
      Tensor batch({bs, 1, s, s});
      for (int64_t b = 0; b < bs; ++b) {
        const Tensor& img = images[static_cast<size_t>(order[static_cast<size_t>(start + b)])];
        std::copy(img.data(), img.data() + img.numel(), batch.data() + b * img.numel());
      }
      double t_mean = 0.0;
      LossBreakdown bd = train_step(state, batch, config, options, &t_mean);
      if (on_step)
        on_step(StepLogEntry{state.step, state.epoch, t_mean, bd,
                             lr_at_epoch(config.base_lr, state.epoch, config.lr_decay_factor,
                                         config.lr_decay_every)});
    }
    state.epoch += 1;
    if (on_epoch) on_epoch(state.epoch, state);
  }
}

namespace {

Checkpoint make_checkpoint(const TrainConfig& config, const TrainState& state) {
  Checkpoint c;
  c.T = config.T;
  c.beta_start = config.beta_start;
  c.beta_end = config.beta_end;
  c.sigma_mode = config.sigma_mode;
  c.lambda = config.lambda;
  c.epoch = state.epoch;
  c.seed = config.seed;
  c.denoiser = state.denoiser;
  c.discriminator = state.discriminator;
  c.opt_denoiser = state.opt_denoiser;
  c.opt_discriminator = state.opt_discriminator;
  return c;
}

std::string format_row(const StepLogEntry& e) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%lld,%lld,%.10g,%.10g,%.10g,%.10g,%.10g,%.10g",
                static_cast<long long>(e.step), static_cast<long long>(e.epoch), e.t_mean,
                e.losses.l_ddpm, e.losses.l_adv_gen, e.losses.l_disc, e.losses.l_total, e.lr);
  return buf;
}

std::string epoch_tag(int64_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%04lld", static_cast<long long>(epoch));
  return buf;
}

}  // namespace

std::filesystem::path train(const TrainConfig& config, const DatasetManifest& manifest,
                            const std::filesystem::path& data_root,
                            const std::filesystem::path& out_dir) {
  config.validate();
  manifest.validate();
  if (!manifest.all_normal())
    throw ValidationError(
        "training manifest contains anomalous-labeled entries (unsupervised protocol violation)");
  if (manifest.records.empty()) throw ValidationError("training manifest is empty");

  std::vector<Tensor> images;
  images.reserve(manifest.records.size());
  for (const ManifestRecord& r : manifest.records) images.push_back(read_adtf(data_root / r.image_path));

  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string());
  std::ofstream log(out_dir / "train_log.csv");
  if (!log) throw IoError("cannot open training log in " + out_dir.string());
  log << "step,epoch,t_mean,l_ddpm,l_adv_gen,l_disc,l_total,lr\n";

  TrainState state = init_train_state(config);
  run_training(
      state, images, config,
      [&](const StepLogEntry& e) { log << format_row(e) << "\n"; },
      [&](int64_t completed, TrainState& st) {
        if (completed % config.checkpoint_every == 0 && completed < config.epochs)
          write_checkpoint(out_dir / ("checkpoint_epoch_" + epoch_tag(completed) + ".addm"),
                           make_checkpoint(config, st));
      });

  const std::filesystem::path final_path = out_dir / "checkpoint_final.addm";
  write_checkpoint(final_path, make_checkpoint(config, state));
  log.flush();
  if (!log) throw IoError("failed writing training log in " + out_dir.string());
  return final_path;
}

}  // namespace addm
