#include "wregress/tensor.hpp"

#include <limits>
#include <numeric>
#include <string>

#include "wregress/errors.hpp"

namespace wregress {

Tensor::Tensor(std::vector<std::size_t> shape, double fill) : shape_(std::move(shape)) {
  const std::size_t n = checked_volume(shape_, std::numeric_limits<std::size_t>::max());
  data_.assign(n, fill);
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (checked_volume(shape_, std::numeric_limits<std::size_t>::max()) != data_.size()) {
    throw DimensionError("tensor: data size does not match shape");
  }
}

std::size_t Tensor::flatten(std::span<const std::size_t> index) const {
  if (index.size() != shape_.size()) throw RangeError("tensor: index rank mismatch");
  std::size_t flat = 0;
  for (std::size_t k = 0; k < shape_.size(); ++k) {
    if (index[k] >= shape_[k]) throw RangeError("tensor: index out of range");
    flat = flat * shape_[k] + index[k];
  }
  return flat;
}

void Tensor::unflatten(std::size_t flat, std::span<std::size_t> index) const {
  for (std::size_t k = shape_.size(); k-- > 0;) {
    index[k] = flat % shape_[k];
    flat /= shape_[k];
  }
}

double& Tensor::at(std::span<const std::size_t> index) { return data_[flatten(index)]; }
double Tensor::at(std::span<const std::size_t> index) const { return data_[flatten(index)]; }

double Tensor::sum() const { return std::accumulate(data_.begin(), data_.end(), 0.0); }

std::size_t checked_volume(std::span<const std::size_t> shape, std::size_t cap) {
  std::size_t n = 1;
  for (std::size_t s : shape) {
    if (s != 0 && n > cap / s) {
      throw SizeCapError("tensor volume exceeds cap of " + std::to_string(cap) + " entries");
    }
    n *= s;
  }
  if (n > cap) throw SizeCapError("tensor volume exceeds cap of " + std::to_string(cap) + " entries");
  return n;
}

void for_each_index(std::span<const std::size_t> shape,
                    const std::function<void(std::span<const std::size_t>, std::size_t)>& fn) {
  std::vector<std::size_t> idx(shape.size(), 0);
  const std::size_t n = checked_volume(shape, std::numeric_limits<std::size_t>::max());
  for (std::size_t flat = 0; flat < n; ++flat) {
    fn(idx, flat);
    for (std::size_t k = shape.size(); k-- > 0;) {
      if (++idx[k] < shape[k]) break;
      idx[k] = 0;
    }
  }
}

}  // namespace wregress
