#pragma once

#include "deepfgs/graph.hpp"
#include "deepfgs/tensor.hpp"

namespace dfgs {

// mean squared error over all elements; shapes must match
double mse(const Tensor& a, const Tensor& b);

// −10·log10(mse) for signals in [0,1]; +infinity when the inputs are equal
double psnr(const Tensor& a, const Tensor& b);

// Multi-scale structural similarity in (0, 1] for a single image pair
// (n = 1), values nominally in [0,1]. Uses an 11×11 Gaussian window
// (σ = 1.5) with valid-only support, 2× average-pool downsampling between
// scales, and the canonical five scale weights (0.0448, 0.2856, 0.3001,
// 0.2363, 0.1333). Images too small for all five scales use however many
// scales keep at least one 11×11 window, with the leading weights
// renormalized to sum to 1. Requires min(H, W) ≥ 11.
double ms_ssim(const Tensor& a, const Tensor& b);

// Differentiable form of the same computation; returns one value per batch
// image, shape (n,1,1,1). Contrast terms are floored at 1e-6 before the
// fractional powers so gradients stay finite on adversarial pairs.
Val ms_ssim_graph(Graph& g, Val a, Val b);

// number of usable scales (1..5) for an image of the given extent
int ms_ssim_scales(int h, int w);

}  // namespace dfgs
