#pragma once

#include <cstddef>
#include <cstdint>
#include <new>
#include <vector>

namespace addm {

/// Allocator pinning every buffer to one alignment, so vectorized kernels
/// see identical data placement on every run and reductions round
/// identically. Bit-for-bit reproducibility depends on this.
template <typename T, std::size_t Alignment>
struct AlignedAllocator {
  using value_type = T;

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U, Alignment>&) noexcept {}

  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Alignment)));
  }
  void deallocate(T* p, std::size_t n) noexcept {
    ::operator delete(p, n * sizeof(T), std::align_val_t(Alignment));
  }
  template <typename U>
  bool operator==(const AlignedAllocator<U, Alignment>&) const noexcept {
    return true;
  }
};

using AlignedFloatVec = std::vector<float, AlignedAllocator<float, 64>>;

/// Dense row-major float tensor. Rank-4 tensors follow the (batch, channel,
/// height, width) convention used by every image kernel in this library;
/// parameter tensors may have any rank.
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);
  Tensor(std::vector<int64_t> shape, float fill_value);

  static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<int64_t> shape, float v) { return Tensor(std::move(shape), v); }

  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  const std::vector<int64_t>& shape() const { return shape_; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  float* data() { return data_.data(); }
  const float* data() const { return data_.data(); }
  float& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  float operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  /// Rank-4 element access, (b, c, y, x).
  float& at(int64_t b, int64_t c, int64_t y, int64_t x) {
    return data_[static_cast<size_t>(((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
  }
  float at(int64_t b, int64_t c, int64_t y, int64_t x) const {
    return data_[static_cast<size_t>(((b * shape_[1] + c) * shape_[2] + y) * shape_[3] + x)];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  void fill(float v);

  /// Min / max over all elements; tensor must be nonempty.
  float min_value() const;
  float max_value() const;

private:
  std::vector<int64_t> shape_;
  AlignedFloatVec data_;
};

/// Throws ValidationError unless both tensors have identical shapes.
void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

/// Throws ValidationError unless t has rank 4.
void require_rank4(const Tensor& t, const char* what);

}  // namespace addm
