#include <array>
#include <cmath>
#include <string>

#include "deepfgs/coder.hpp"
#include "deepfgs/detmath.hpp"
#include "deepfgs/error.hpp"
#include "deepfgs/model.hpp"

// Deterministic CDF table construction. This translation unit is built with
// FP contraction disabled; all transcendentals come from det::. Operation
// order here is part of the bitstream format — do not "simplify" arithmetic.

namespace dfgs {

namespace {

constexpr double kLnSigmaMin = -2.2072749131897207;  // log(0.11)
constexpr double kLnSigmaMax = 4.1588830833596715;   // log(64)
constexpr double kInvSqrt2 = 0.7071067811865476;

const std::array<double, kSigmaBins>& rep_table() {
  static const std::array<double, kSigmaBins> reps = [] {
    std::array<double, kSigmaBins> r{};
    for (int k = 0; k < kSigmaBins; ++k) {
      r[size_t(k)] = det::exp(kLnSigmaMin + (kLnSigmaMax - kLnSigmaMin) * (double(k) / 63.0));
    }
    r[0] = 0.11;  // pin the endpoints exactly
    r[kSigmaBins - 1] = 64.0;
    return r;
  }();
  return reps;
}

}  // namespace

CdfTable cdf_from_probabilities(const double* value_probs, double escape_prob) {
  std::array<long long, kTableSymbols> counts{};
  long long sum = 0;
  for (int i = 0; i < kValueSymbols; ++i) {
    double q = value_probs[i] > 0.0 ? value_probs[i] : 0.0;
    counts[size_t(i)] = std::max(1ll, std::llround(q * double(kCdfTotal)));
    sum += counts[size_t(i)];
  }
  double qe = escape_prob > 0.0 ? escape_prob : 0.0;
  counts[kEscapeSymbol] = std::max(1ll, std::llround(qe * double(kCdfTotal)));
  sum += counts[kEscapeSymbol];

  // Absorb rounding drift into the heaviest symbol. Ties prefer the escape
  // slot, then symbols closest to the center of the value range: a symmetric
  // distribution always has its heaviest value symbol at the center, so the
  // adjustment never lands on one side of a mirrored pair and the table stays
  // bitwise symmetric whenever the input probabilities are.
  int big = kEscapeSymbol;
  for (int d = 0; d <= kSupportRadius; ++d) {
    for (int i : {kSupportRadius - d, kSupportRadius + d}) {
      if (counts[size_t(i)] > counts[size_t(big)]) big = i;
    }
  }
  counts[size_t(big)] += (long long)kCdfTotal - sum;
  if (counts[size_t(big)] < 1) {
    throw NumericError("cdf: probability mass collapsed while normalizing counts");
  }

  CdfTable t;
  t.cum.resize(kTableSymbols + 1);
  t.cum[0] = 0;
  std::uint32_t acc = 0;
  for (int i = 0; i < kTableSymbols; ++i) {
    acc += std::uint32_t(counts[size_t(i)]);
    t.cum[size_t(i) + 1] = acc;
  }
  if (t.cum.back() != kCdfTotal) {
    throw NumericError("cdf: counts do not sum to 2^16");
  }
  return t;
}

double sigma_rep(int bin) {
  if (bin < 0 || bin >= kSigmaBins) {
    throw UsageError("sigma_rep: bin " + std::to_string(bin) + " outside [0, 63]");
  }
  return rep_table()[size_t(bin)];
}

int sigma_bin(double sigma) {
  if (!(sigma > 0.0)) throw UsageError("sigma_bin: sigma must be positive");
  const auto& reps = rep_table();
  if (sigma <= reps.front()) return 0;
  if (sigma >= reps.back()) return kSigmaBins - 1;
  double t = 63.0 * (det::log(sigma) - kLnSigmaMin) / (kLnSigmaMax - kLnSigmaMin);
  int k = int(std::ceil(t));
  if (k < 0) k = 0;
  if (k > kSigmaBins - 1) k = kSigmaBins - 1;
  // the log is ~1e-15 accurate; these exact comparisons pin the round-up
  // contract (smallest representative ≥ σ) regardless of that residue
  while (k > 0 && reps[size_t(k) - 1] >= sigma) --k;
  while (k < kSigmaBins - 1 && reps[size_t(k)] < sigma) ++k;
  return k;
}

const CdfTable& gaussian_table(int bin) {
  if (bin < 0 || bin >= kSigmaBins) {
    throw UsageError("gaussian_table: bin " + std::to_string(bin) + " outside [0, 63]");
  }
  static const std::array<CdfTable, kSigmaBins> bank = [] {
    std::array<CdfTable, kSigmaBins> b{};
    for (int k = 0; k < kSigmaBins; ++k) {
      const double sr = rep_table()[size_t(k)];
      std::array<double, kValueSymbols> q{};
      double mass = 0.0;
      for (int s = -kSupportRadius; s <= kSupportRadius; ++s) {
        // ½(erf(hi) − erf(lo)); the boundary arguments of +s and −s negate
        // exactly, and det::erf is bitwise odd, so the table is symmetric
        const double hi = det::erf((double(s) + 0.5) / sr * kInvSqrt2);
        const double lo = det::erf((double(s) - 0.5) / sr * kInvSqrt2);
        q[size_t(s + kSupportRadius)] = 0.5 * (hi - lo);
        mass += q[size_t(s + kSupportRadius)];
      }
      b[size_t(k)] = cdf_from_probabilities(q.data(), 1.0 - mass);
    }
    return b;
  }();
  return bank[size_t(bin)];
}

std::pair<CdfTable, int> build_cdf(double mu, double sigma) {
  if (!(sigma >= kSigmaMin)) {
    throw UsageError("build_cdf: sigma below the model floor of 0.11");
  }
  if (!(std::fabs(mu) <= 1e9)) {
    throw NumericError("build_cdf: non-finite or absurd mean");
  }
  return {gaussian_table(sigma_bin(sigma)), int(std::nearbyint(mu))};
}

std::vector<CdfTable> prior_tables(const Model& m, std::string_view prior) {
  const int hc = m.cfg.hyper_channels;
  std::vector<CdfTable> out;
  out.reserve(size_t(hc));
  for (int c = 0; c < hc; ++c) {
    const std::string base = std::string(prior) + ".c" + std::to_string(c);
    auto vals = [&](const char* leaf) -> const std::vector<double>& {
      return m.params.value(base + leaf).v;
    };
    // mirror of the learned monotone CDF chain (width 3), in det:: math
    double w0[3], b0[3], a0[3], w1[9], b1[3], a1[3], w2[3];
    for (int j = 0; j < 3; ++j) {
      w0[j] = det::softplus(vals(".h0")[size_t(j)]);
      b0[j] = vals(".b0")[size_t(j)];
      a0[j] = det::tanh(vals(".a0")[size_t(j)]);
      b1[j] = vals(".b1")[size_t(j)];
      a1[j] = det::tanh(vals(".a1")[size_t(j)]);
      w2[j] = det::softplus(vals(".h2")[size_t(j)]);
    }
    for (int j = 0; j < 9; ++j) w1[j] = det::softplus(vals(".h1")[size_t(j)]);
    const double b2 = vals(".b2")[0];

    auto cdf = [&](double v) {
      double t[3], u[3];
      for (int j = 0; j < 3; ++j) {
        t[j] = w0[j] * v + b0[j];
        t[j] += a0[j] * det::tanh(t[j]);
      }
      for (int i = 0; i < 3; ++i) {
        u[i] = b1[i];
        for (int j = 0; j < 3; ++j) u[i] += w1[i * 3 + j] * t[j];
        u[i] += a1[i] * det::tanh(u[i]);
      }
      double z = b2;
      for (int j = 0; j < 3; ++j) z += w2[j] * u[j];
      return det::sigmoid(z);
    };

    std::array<double, kValueSymbols> q{};
    double mass = 0.0;
    for (int s = -kSupportRadius; s <= kSupportRadius; ++s) {
      double p = cdf(double(s) + 0.5) - cdf(double(s) - 0.5);
      q[size_t(s + kSupportRadius)] = p;
      mass += p > 0.0 ? p : 0.0;
    }
    out.push_back(cdf_from_probabilities(q.data(), 1.0 - mass));
  }
  return out;
}

}  // namespace dfgs
