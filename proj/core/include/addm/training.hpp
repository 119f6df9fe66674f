#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include "addm/diffusion.hpp"
#include "addm/losses.hpp"
#include "addm/nets.hpp"
#include "addm/optimizer.hpp"
#include "addm/phantoms.hpp"
#include "addm/rng.hpp"
#include "addm/schedule.hpp"

namespace addm {

struct TrainConfig {
  int T = 300;
  double lambda = 0.05;
  int epochs = 60;
  int batch_size = 8;
  double base_lr = 1e-4;
  double lr_decay_factor = 0.999;
  int lr_decay_every = 200;
  SigmaMode sigma_mode = SigmaMode::kBeta;
  uint64_t seed = 20240901;
  int checkpoint_every = 20;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  DenoiserConfig denoiser;
  DiscriminatorConfig discriminator;

  void validate() const;
};

/// Stepped learning rate: base_lr * factor^floor(epoch / every).
double lr_at_epoch(double base_lr, int64_t epoch, double factor, int64_t every);

/// Mutable training state. Each stochastic ingredient draws from its own
/// seeded stream, so a loop variant that skips one ingredient (for example
/// the pure noise-prediction reference used in the ablation test) consumes
/// identical values from the streams it shares with the full loop.
struct TrainState {
  NoiseSchedule schedule;
  DenoiserParams denoiser;
  DiscriminatorParams discriminator;
  AdamState opt_denoiser;
  AdamState opt_discriminator;
  int64_t epoch = 0;
  int64_t step = 0;

  Pcg32 t_sampler;        // per-example timestep draws
  GaussianRng noise_eps;  // eps defining x_t
  GaussianRng noise_real; // eps' defining the real x_{t-1}
  GaussianRng noise_z;    // z in the fake reverse step
  Pcg32 shuffler;         // epoch shuffling

  TrainState();
};

TrainState init_train_state(const TrainConfig& config);

struct TrainStepOptions {
  /// When false, phase (d) is skipped entirely; with lambda == 0 this yields
  /// the pure noise-prediction reference loop.
  bool update_discriminator = true;
};

/// One optimization step on a batch of normal images in [-1, 1]:
/// (a) t ~ U{1..T} per example, (b) x_t and the real x_{t-1} via the closed
/// form (x_{t-1} = x0 at t = 1), (c) predicted noise and the fake x_{t-1} via
/// one reverse step, (d) Adam update of the discriminator on detached fakes,
/// (e) Adam update of the denoiser on l_ddpm + lambda * l_adv_gen with the
/// discriminator frozen. Throws NumericalError naming the first non-finite
/// loss term. If t_mean_out is nonnull it receives the mean sampled t.
LossBreakdown train_step(TrainState& state, const Tensor& batch, const TrainConfig& config,
                         const TrainStepOptions& options = {}, double* t_mean_out = nullptr);

struct StepLogEntry {
  int64_t step;
  int64_t epoch;
  double t_mean;
  LossBreakdown losses;
  double lr;
};
using StepCallback = std::function<void(const StepLogEntry&)>;
using EpochCallback = std::function<void(int64_t completed_epoch, TrainState& state)>;

/// Epoch loop over in-memory images: shuffles per epoch, assembles batches
/// (last batch may be short), applies lr_at_epoch to both optimizers.
void run_training(TrainState& state, const std::vector<Tensor>& images, const TrainConfig& config,
                  const StepCallback& on_step = {}, const EpochCallback& on_epoch = {},
                  const TrainStepOptions& options = {});

/// File-level entry: loads a normal-only manifest, trains, writes the CSV
/// loss log plus periodic and final checkpoints under out_dir. Returns the
/// path of the final checkpoint.
std::filesystem::path train(const TrainConfig& config, const DatasetManifest& manifest,
                            const std::filesystem::path& data_root,
                            const std::filesystem::path& out_dir);

}  // namespace addm
