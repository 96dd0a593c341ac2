#pragma once

// Bit-reproducible scalar math for entropy-coding table construction.
//
// Encoder and decoder must derive identical integer CDF tables from the same
// checkpoint on any machine, so none of these functions may depend on the
// host libm (whose results differ between implementations). Each one is a
// fixed sequence of IEEE-754 double operations — basic arithmetic, ldexp/
// frexp, and comparisons only — and the translation units that implement and
// consume them are built with FP contraction disabled. Identical inputs
// therefore produce bit-identical outputs on every conforming platform.
//
// Accuracy is ~1e-15 relative, far beyond what 16-bit tables resolve. Do not
// reorder operations inside these functions: any change alters coded streams.

namespace dfgs::det {

double exp(double x);
double expm1(double x);
double log(double x);    // x > 0
double log1p(double x);  // x > -1
double erf(double x);
double tanh(double x);
double sigmoid(double x);
double softplus(double x);
double normal_cdf(double x);  // Φ(x) for the standard normal

}  // namespace dfgs::det
