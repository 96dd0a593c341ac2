#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "deepfgs/error.hpp"

namespace dfgs {

// All arrays in the pipeline are rank-4 (n, c, h, w); vectors and matrices
// ride along as degenerate shapes, e.g. a per-channel bias is (1, c, 1, 1).
struct Shape {
  int n = 1, c = 1, h = 1, w = 1;

  Shape() = default;
  Shape(int n_, int c_, int h_, int w_) : n(n_), c(c_), h(h_), w(w_) {}

  std::int64_t numel() const {
    return std::int64_t(n) * c * h * w;
  }
  bool operator==(const Shape& o) const {
    return n == o.n && c == o.c && h == o.h && w == o.w;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }
  std::string str() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" +
           std::to_string(h) + "x" + std::to_string(w);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape s) : shape(s), v(static_cast<size_t>(s.numel()), 0.0) {}
  Tensor(Shape s, double fill)
      : shape(s), v(static_cast<size_t>(s.numel()), fill) {}

  static Tensor zeros(Shape s) { return Tensor(s); }
  static Tensor full(Shape s, double x) { return Tensor(s, x); }
  static Tensor scalar(double x) { return Tensor(Shape(1, 1, 1, 1), x); }

  std::int64_t numel() const { return shape.numel(); }
  bool empty() const { return v.empty(); }

  double* data() { return v.data(); }
  const double* data() const { return v.data(); }

  double& at(int n, int c, int h, int w) {
    return v[((static_cast<size_t>(n) * shape.c + c) * shape.h + h) * shape.w + w];
  }
  double at(int n, int c, int h, int w) const {
    return v[((static_cast<size_t>(n) * shape.c + c) * shape.h + h) * shape.w + w];
  }

  double item() const {
    if (numel() != 1) throw DataError("Tensor::item on non-scalar " + shape.str());
    return v[0];
  }

  void fill(double x) { std::fill(v.begin(), v.end(), x); }
  void zero() { fill(0.0); }

  void add_scaled(const Tensor& t, double a) {
    for (size_t i = 0; i < v.size(); ++i) v[i] += a * t.v[i];
  }

  bool all_finite() const {
    for (double x : v)
      if (!std::isfinite(x)) return false;
    return true;
  }

  double max_abs() const {
    double m = 0.0;
    for (double x : v) m = std::max(m, std::fabs(x));
    return m;
  }

  Shape shape;
  std::vector<double> v;
};

// nearest integer, ties to even (current rounding mode is never touched)
double round_ties_even(double x);
Tensor round_ties_even(const Tensor& t);

void check_shape(const Tensor& t, Shape s, const char* what);

}  // namespace dfgs
