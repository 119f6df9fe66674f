#include "addm/rng.hpp"

#include <cmath>

namespace addm {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Pcg32::Pcg32(uint64_t seed, uint64_t stream) {
  inc_ = (splitmix64(stream ^ 0xda3e39cb94b95bdbULL) << 1u) | 1u;
  state_ = 0u;
  next_u32();
  state_ += splitmix64(seed);
  next_u32();
}

uint32_t Pcg32::next_u32() {
  uint64_t old = state_;
  state_ = old * 6364136223846793005ULL + inc_;
  uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
  uint32_t rot = static_cast<uint32_t>(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

uint64_t Pcg32::next_u64() {
  uint64_t hi = next_u32();
  uint64_t lo = next_u32();
  return (hi << 32) | lo;
}

double Pcg32::next_double() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

uint32_t Pcg32::next_below(uint32_t bound) {
  // Rejection sampling over the largest multiple of bound below 2^32.
  uint32_t threshold = (-bound) % bound;
  for (;;) {
    uint32_t r = next_u32();
    if (r >= threshold) return r % bound;
  }
}

double GaussianRng::next() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; u1 shifted into (0,1] so the log argument never vanishes.
  double u1 = 1.0 - pcg_.next_double();
  double u2 = pcg_.next_double();
  double r = std::sqrt(-2.0 * std::log(u1));
  double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return r * std::cos(theta);
}

void GaussianRng::fill_normal(Tensor& t) {
  float* p = t.data();
  for (int64_t i = 0; i < t.numel(); ++i) p[i] = static_cast<float>(next());
}

Tensor GaussianRng::normal(std::vector<int64_t> shape) {
  Tensor t(std::move(shape));
  fill_normal(t);
  return t;
}

}  // namespace addm
