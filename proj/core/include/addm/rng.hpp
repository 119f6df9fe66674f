#pragma once

#include <cstdint>
#include <vector>

#include "addm/tensor.hpp"

namespace addm {

/// splitmix64 avalanche step; used to derive independent stream seeds from a
/// master seed. Deterministic across platforms.
uint64_t splitmix64(uint64_t x);

/// Seed for the `stream`-th child generator of `master`.
inline uint64_t derive_seed(uint64_t master, uint64_t stream) {
  return splitmix64(splitmix64(master) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

/// PCG-XSH-RR 64/32 (O'Neill, pcg-random.org). Small, fast, and fully
/// specified here, so trajectories reproduce bit-for-bit given a seed.
class Pcg32 {
public:
  explicit Pcg32(uint64_t seed, uint64_t stream = 0);

  uint32_t next_u32();
  uint64_t next_u64();
  /// Uniform double in [0, 1) with 53 random bits.
  double next_double();
  /// Unbiased uniform integer in [0, bound) via rejection sampling.
  uint32_t next_below(uint32_t bound);

private:
  uint64_t state_;
  uint64_t inc_;
};

/// Standard normal generator: PCG32 uniforms through the Box-Muller
/// transform, caching the second variate.
class GaussianRng {
public:
  explicit GaussianRng(uint64_t seed, uint64_t stream = 0) : pcg_(seed, stream) {}

  double next();
  /// Overwrites every element of `t` with fresh N(0,1) draws (row-major order).
  void fill_normal(Tensor& t);
  Tensor normal(std::vector<int64_t> shape);

  Pcg32& raw() { return pcg_; }

private:
  Pcg32 pcg_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace addm
