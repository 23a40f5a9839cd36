#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace wregress {

/// Dense row-major array with the last axis varying fastest.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  double& operator[](std::size_t flat) { return data_[flat]; }
  double operator[](std::size_t flat) const { return data_[flat]; }

  double& at(std::span<const std::size_t> index);
  double at(std::span<const std::size_t> index) const;

  std::size_t flatten(std::span<const std::size_t> index) const;
  void unflatten(std::size_t flat, std::span<std::size_t> index) const;

  double sum() const;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

/// Number of entries of a tensor with this shape; throws SizeCapError above cap.
std::size_t checked_volume(std::span<const std::size_t> shape, std::size_t cap);

/// Calls fn(index, flat) for every multi-index in row-major order.
void for_each_index(std::span<const std::size_t> shape,
                    const std::function<void(std::span<const std::size_t>, std::size_t)>& fn);

}  // namespace wregress
