#include "addm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "addm/error.hpp"

namespace addm {

namespace {
int64_t checked_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d <= 0) throw ValidationError("tensor dimensions must be positive");
    n *= d;
  }
  return n;
}
}  // namespace

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(checked_numel(shape_)), 0.0f);
}

Tensor::Tensor(std::vector<int64_t> shape, float fill_value) : shape_(std::move(shape)) {
  data_.assign(static_cast<size_t>(checked_numel(shape_)), fill_value);
}

bool Tensor::all_finite() const {
  for (float v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::fill(float v) { std::fill(data_.begin(), data_.end(), v); }

float Tensor::min_value() const { return *std::min_element(data_.begin(), data_.end()); }

float Tensor::max_value() const { return *std::max_element(data_.begin(), data_.end()); }

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) throw ValidationError(std::string(what) + ": shape mismatch");
}

void require_rank4(const Tensor& t, const char* what) {
  if (t.rank() != 4) throw ValidationError(std::string(what) + ": expected a rank-4 tensor");
}

}  // namespace addm
