#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "addm/autodiff.hpp"
#include "addm/tensor.hpp"

namespace addm {

/// Time-conditioned U-shaped noise predictor configuration.
struct DenoiserConfig {
  int image_size = 16;
  int base_width = 32;
  int depth = 2;  // number of 2x down/up levels
  int time_embed_dim = 64;

  void validate() const;
};

/// Strided-convolution discriminator configuration.
struct DiscriminatorConfig {
  int image_size = 16;
  int base_width = 32;
  int n_layers = 3;
  int time_embed_dim = 64;

  void validate() const;
};

/// Ordered, uniquely named parameter tensors. Order is the construction
/// order and is part of the contract: optimizer state, checkpoints and
/// staged tape leaves all index by it.
struct ParamSet {
  std::vector<std::string> names;
  std::vector<Tensor> tensors;

  void add(std::string name, Tensor t);
  size_t size() const { return tensors.size(); }
  int64_t total_elements() const;
  const Tensor* find(const std::string& name) const;
  bool all_finite() const;
};

struct DenoiserParams {
  DenoiserConfig config;
  ParamSet params;
};

struct DiscriminatorParams {
  DiscriminatorConfig config;
  ParamSet params;
};

/// Sinusoidal timestep embedding: first dim/2 entries sin(t / 10000^(2i/dim)),
/// last dim/2 entries cos of the same arguments. dim must be even and >= 2.
Tensor time_embedding(int t, int dim);

/// Stacked embeddings for a batch of timesteps, shape (B, dim).
Tensor time_embedding_batch(std::span<const int> t, int dim);

/// Fan-in-scaled (He) normal init for kernels, zero biases, unit norm scales.
/// The final output convolution of the denoiser is zero-initialized so an
/// untrained model predicts zero noise. Deterministic given the seed.
DenoiserParams init_denoiser(const DenoiserConfig& config, uint64_t seed);
DiscriminatorParams init_discriminator(const DiscriminatorConfig& config, uint64_t seed);

/// Parameter leaves staged on a tape, in ParamSet order.
struct StagedParams {
  std::vector<NodeId> ids;
};
StagedParams stage_params(Tape& tape, const ParamSet& params);

/// Builds the noise-prediction graph. x must be (B, 1, S, S) with S equal to
/// dp.config.image_size; t holds one timestep per batch item. Output shape
/// equals input shape. `staged` must hold dp.params staged on `tape`.
NodeId denoiser_graph(Tape& tape, const DenoiserParams& dp, const StagedParams& staged, NodeId x,
                      std::span<const int> t);

/// Builds the discriminator graph; returns a (B, 1) logit node.
NodeId discriminator_graph(Tape& tape, const DiscriminatorParams& dp, const StagedParams& staged,
                           NodeId x, std::span<const int> t);

/// Convenience forward passes without gradient bookkeeping exposed.
Tensor denoiser_forward(const DenoiserParams& dp, const Tensor& x_t, std::span<const int> t);
std::vector<double> discriminator_forward(const DiscriminatorParams& dp, const Tensor& x,
                                          std::span<const int> t);

/// Group count used by every normalization layer: largest of {8,4,2,1}
/// dividing the channel count.
int norm_groups(int channels);

/// Epsilon inside every normalization denominator.
inline constexpr float kNormEps = 1e-5f;

}  // namespace addm
