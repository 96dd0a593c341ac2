#include "deepfgs/tensor.hpp"

#include <cfenv>
#include <cmath>

#include "deepfgs/error.hpp"

namespace dfgs {

double round_ties_even(double x) {
  // nearbyint honours the current rounding mode; the default mode is
  // round-to-nearest with ties to even, which is exactly what quantization
  // needs (llround would round halves away from zero).
  return std::nearbyint(x);
}

Tensor round_ties_even(const Tensor& t) {
  Tensor out = t;
  for (double& x : out.v) x = std::nearbyint(x);
  return out;
}

void check_shape(const Tensor& t, Shape want, const char* what) {
  if (!(t.shape == want)) {
    throw DataError(std::string(what) + ": shape " + t.shape.str() + ", want " + want.str());
  }
}

}  // namespace dfgs
