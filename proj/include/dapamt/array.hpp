#pragma once

#include <cmath>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dapamt {

/// Dense real array in row-major order. Rank 1 (vector) and rank 2 (matrix)
/// cover everything the model needs; a scalar is a length-1 vector.
struct Array {
  std::vector<int> shape;
  std::vector<double> data;

  Array() = default;
  Array(std::vector<int> s, std::vector<double> d)
      : shape(std::move(s)), data(std::move(d)) {
    if (static_cast<std::size_t>(numel_of(shape)) != data.size())
      throw std::invalid_argument("Array: shape/data size mismatch");
  }

  static long numel_of(const std::vector<int>& s) {
    long n = 1;
    for (int d : s) {
      if (d <= 0) throw std::invalid_argument("Array: nonpositive dimension");
      n *= d;
    }
    return n;
  }

  static Array zeros(std::vector<int> s) {
    long n = numel_of(s);
    return Array(std::move(s), std::vector<double>(static_cast<std::size_t>(n), 0.0));
  }
  static Array scalar(double v) { return Array({1}, {v}); }
  static Array vec(std::vector<double> d) {
    int n = static_cast<int>(d.size());
    return Array({n}, std::move(d));
  }
  static Array matrix(int rows, int cols, std::vector<double> d) {
    return Array({rows, cols}, std::move(d));
  }

  int rank() const { return static_cast<int>(shape.size()); }
  long numel() const { return static_cast<long>(data.size()); }
  int rows() const { return shape.at(0); }
  int cols() const { return rank() == 2 ? shape.at(1) : 1; }

  double& operator[](std::size_t i) { return data[i]; }
  double operator[](std::size_t i) const { return data[i]; }
  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * shape[1] + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * shape[1] + c]; }

  bool same_shape(const Array& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline std::string shape_str(const std::vector<int>& s) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ')';
  return os.str();
}

/// Thrown when primitive inputs have incompatible shapes; carries the
/// primitive name and both offending shapes.
class ShapeError : public std::runtime_error {
 public:
  ShapeError(const std::string& primitive, const std::vector<int>& a,
             const std::vector<int>& b)
      : std::runtime_error(primitive + ": incompatible shapes " + shape_str(a) +
                           " and " + shape_str(b)),
        primitive_(primitive), shape_a_(a), shape_b_(b) {}

  const std::string& primitive() const { return primitive_; }
  const std::vector<int>& shape_a() const { return shape_a_; }
  const std::vector<int>& shape_b() const { return shape_b_; }

 private:
  std::string primitive_;
  std::vector<int> shape_a_, shape_b_;
};

}  // namespace dapamt
