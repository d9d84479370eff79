#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>
#include <vector>

namespace graphmem {

// Dense row-major tensor of 64-bit floats. Tensors are plain values: ops
// return new tensors and never alias inputs.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::int64_t> shape);
  Tensor(std::vector<std::int64_t> shape, std::vector<double> data);

  static Tensor scalar(double v);
  static Tensor zeros(std::vector<std::int64_t> shape);
  static Tensor full(std::vector<std::int64_t> shape, double v);
  // 2-D convenience for literals in tests and fixtures.
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
  static Tensor vector(std::initializer_list<double> entries);

  const std::vector<std::int64_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::int64_t dim(std::size_t i) const;
  std::int64_t numel() const { return static_cast<std::int64_t>(data_.size()); }

  // rank-2 accessors; throw ShapeError on other ranks.
  std::int64_t rows() const;
  std::int64_t cols() const;

  double at(std::int64_t i) const { return data_[static_cast<std::size_t>(i)]; }
  double& at(std::int64_t i) { return data_[static_cast<std::size_t>(i)]; }
  double at(std::int64_t r, std::int64_t c) const;
  double& at(std::int64_t r, std::int64_t c);
  double at(std::int64_t a, std::int64_t b, std::int64_t c) const;
  double& at(std::int64_t a, std::int64_t b, std::int64_t c);

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;

  std::string shape_str() const;

 private:
  std::vector<std::int64_t> shape_;
  std::vector<double> data_;
};

// Throws ShapeError with a readable message when shapes differ.
void check_same_shape(const Tensor& a, const Tensor& b, const char* op);

}  // namespace graphmem
