#include "deepfgs/detmath.hpp"

#include <cmath>
#include <limits>

// Fixed-iteration series and continued fractions over IEEE doubles. Every
// constant below is a pinned double literal; every loop runs a fixed number
// of iterations (no convergence tests), so the operation sequence — and with
// contraction disabled, the result — is identical everywhere.

namespace dfgs::det {

namespace {

constexpr double kLn2Hi = 0.6931471675634384;     // high 27 bits of ln 2
constexpr double kLn2Lo = 1.299650687069942e-08;  // ln 2 − kLn2Hi
constexpr double kInvLn2 = 1.4426950408889634;
constexpr double kSqrt1_2 = 0.7071067811865476;
constexpr double kTwoInvSqrtPi = 1.1283791670955126;  // 2/√π
constexpr double kInvSqrtPi = 0.5641895835477563;     // 1/√π

// reciprocal factorials 1/0! .. 1/13!
constexpr double kInvFact[14] = {
    1.0,
    1.0,
    0.5,
    0.16666666666666666,
    0.041666666666666664,
    0.008333333333333333,
    0.001388888888888889,
    0.0001984126984126984,
    2.48015873015873e-05,
    2.755731922398589e-06,
    2.755731922398589e-07,
    2.505210838544172e-08,
    2.08767569878681e-09,
    1.6059043836821613e-10,
};

// exp(r) for |r| ≤ 0.3467 by a degree-13 Taylor polynomial (Horner)
double exp_reduced(double r) {
  double p = kInvFact[13];
  for (int n = 12; n >= 0; --n) p = p * r + kInvFact[n];
  return p;
}

// Σ_{n≥1} r^n / n!  (expm1 on the reduced range)
double expm1_reduced(double r) {
  double p = kInvFact[13];
  for (int n = 12; n >= 1; --n) p = p * r + kInvFact[n];
  return p * r;
}

// 2·atanh(s) = 2s·(1 + s²/3 + s⁴/5 + …), 13 odd terms, |s| ≤ 0.1716
double atanh2(double s) {
  const double s2 = s * s;
  double p = 1.0 / 25.0;
  for (int j = 11; j >= 0; --j) p = p * s2 + 1.0 / double(2 * j + 1);
  return 2.0 * s * p;
}

}  // namespace

double exp(double x) {
  if (std::isnan(x)) return x;
  if (x > 709.0) return std::numeric_limits<double>::infinity();
  if (x < -745.0) return 0.0;
  // Cody–Waite reduction: x = k·ln2 + r. Round-half-away via cast keeps the
  // reduction independent of the FP rounding-mode state.
  double kd = x * kInvLn2 + (x >= 0.0 ? 0.5 : -0.5);
  long long k = (long long)kd;
  double r = (x - double(k) * kLn2Hi) - double(k) * kLn2Lo;
  return std::ldexp(exp_reduced(r), int(k));
}

double expm1(double x) {
  if (std::isnan(x)) return x;
  if (x >= -0.34 && x <= 0.34) return expm1_reduced(x);
  return det::exp(x) - 1.0;
}

double log(double x) {
  if (std::isnan(x)) return x;
  if (x < 0.0) return std::numeric_limits<double>::quiet_NaN();
  if (x == 0.0) return -std::numeric_limits<double>::infinity();
  if (std::isinf(x)) return x;
  int e = 0;
  double m = std::frexp(x, &e);  // m ∈ [0.5, 1)
  if (m < kSqrt1_2) {
    m *= 2.0;
    e -= 1;
  }
  const double s = (m - 1.0) / (m + 1.0);  // |s| ≤ 0.1716
  return (atanh2(s) + double(e) * kLn2Lo) + double(e) * kLn2Hi;
}

double log1p(double x) {
  if (std::isnan(x)) return x;
  if (x <= -1.0) {
    if (x == -1.0) return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  // the atanh form is exact-cancellation-free near zero; outside the window
  // where |s| stays ≤ 0.1716, fall back to log(1+x)
  if (x > 0.4142135623730951 || x < -0.2928932188134525) return det::log(1.0 + x);
  return atanh2(x / (2.0 + x));
}

double erf(double x) {
  if (std::isnan(x)) return x;
  const double ax = std::fabs(x);
  double r;
  if (ax >= 6.0) {
    r = 1.0;  // erfc(6) ≈ 2e-17: below double resolution of 1 − erfc
  } else if (ax <= 2.0) {
    // Taylor: (2/√π) Σ (−1)^n ax^{2n+1} / (n!(2n+1)), 45 fixed terms
    const double x2 = ax * ax;
    double term = ax;
    double sum = ax;
    for (int n = 1; n <= 45; ++n) {
      term *= -x2 / double(n);
      sum += term / double(2 * n + 1);
    }
    r = kTwoInvSqrtPi * sum;
  } else {
    // Legendre continued fraction for erfc, evaluated backward with a fixed
    // depth of 96: erfc(a) = e^{−a²}/√π · 1/(a + ½/(a + 1/(a + 3/2/(a + …))))
    double f = ax;
    for (int n = 96; n >= 1; --n) f = ax + (0.5 * double(n)) / f;
    const double erfc = det::exp(-ax * ax) * kInvSqrtPi / f;
    r = 1.0 - erfc;
  }
  return x < 0.0 ? -r : r;
}

double tanh(double x) {
  if (std::isnan(x)) return x;
  const double ax = std::fabs(x);
  double r;
  if (ax > 20.0) {
    r = 1.0;
  } else {
    const double u = det::expm1(-2.0 * ax);  // ∈ (−1, 0]
    r = -u / (u + 2.0);
  }
  return x < 0.0 ? -r : r;
}

double sigmoid(double x) {
  if (std::isnan(x)) return x;
  if (x >= 0.0) {
    return 1.0 / (1.0 + det::exp(-x));
  }
  const double e = det::exp(x);
  return e / (1.0 + e);
}

double softplus(double x) {
  if (std::isnan(x)) return x;
  if (x > 34.0) return x;             // + e^{−x} < 2e-15: below resolution
  if (x < -34.0) return det::exp(x);  // log1p(e^x) to full precision
  if (x >= 0.0) return x + det::log1p(det::exp(-x));
  return det::log1p(det::exp(x));
}

double normal_cdf(double x) { return 0.5 * (1.0 + det::erf(x * kSqrt1_2)); }

}  // namespace dfgs::det
