#include "deepfgs/metrics.hpp"

#include <cmath>
#include <limits>

#include "deepfgs/error.hpp"

namespace dfgs {

namespace {

constexpr int kWin = 11;
constexpr double kWinSigma = 1.5;
constexpr double kStabilityC1 = 0.01 * 0.01;  // (K1·L)², L = 1
constexpr double kStabilityC2 = 0.03 * 0.03;  // (K2·L)²
constexpr double kScaleWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
constexpr double kTermFloor = 1e-6;  // keeps fractional powers off negative bases

Tensor gaussian_window() {
  Tensor w({1, 1, kWin, kWin});
  double sum = 0.0;
  for (int i = 0; i < kWin; ++i)
    for (int j = 0; j < kWin; ++j) {
      double di = i - (kWin - 1) / 2.0;
      double dj = j - (kWin - 1) / 2.0;
      double v = std::exp(-(di * di + dj * dj) / (2.0 * kWinSigma * kWinSigma));
      w.at(0, 0, i, j) = v;
      sum += v;
    }
  for (double& v : w.v) v /= sum;
  return w;
}

}  // namespace

int ms_ssim_scales(int h, int w) {
  if (h < kWin || w < kWin) {
    throw DataError("ms_ssim: image smaller than the 11x11 analysis window: " +
                    std::to_string(h) + "x" + std::to_string(w));
  }
  int scales = 1;
  int ch = h, cw = w;
  while (scales < 5) {
    ch = (ch + 1) / 2;  // ceil-mode 2x pooling
    cw = (cw + 1) / 2;
    if (ch < kWin || cw < kWin) break;
    ++scales;
  }
  return scales;
}

Val ms_ssim_graph(Graph& g, Val a, Val b) {
  Shape s = g.val(a).shape;
  check_shape(g.val(b), s, "ms_ssim");
  int scales = ms_ssim_scales(s.h, s.w);
  double wsum = 0.0;
  for (int i = 0; i < scales; ++i) wsum += kScaleWeights[i];
  Tensor win = gaussian_window();

  Val result{};
  for (int i = 0; i < scales; ++i) {
    Val mu_a = g.blur_depthwise(a, win);
    Val mu_b = g.blur_depthwise(b, win);
    Val mu_a2 = g.square(mu_a);
    Val mu_b2 = g.square(mu_b);
    Val mu_ab = g.mul(mu_a, mu_b);
    Val var_a = g.sub(g.blur_depthwise(g.square(a), win), mu_a2);
    Val var_b = g.sub(g.blur_depthwise(g.square(b), win), mu_b2);
    Val cov = g.sub(g.blur_depthwise(g.mul(a, b), win), mu_ab);

    Val cs = g.div(g.add_scalar(g.mul_scalar(cov, 2.0), kStabilityC2),
                   g.add_scalar(g.add(var_a, var_b), kStabilityC2));
    Val cs_red = g.channel_mean(g.spatial_mean(cs));  // -> (n,1,1,1)
    double wi = kScaleWeights[i] / wsum;
    Val term = g.pow_scalar(g.max_scalar(cs_red, kTermFloor), wi);
    result = result.ok() ? g.mul(result, term) : term;

    if (i == scales - 1) {
      // luminance enters only at the coarsest scale
      Val l = g.div(g.add_scalar(g.mul_scalar(mu_ab, 2.0), kStabilityC1),
                    g.add_scalar(g.add(mu_a2, mu_b2), kStabilityC1));
      Val l_red = g.channel_mean(g.spatial_mean(l));
      result = g.mul(result, g.pow_scalar(g.max_scalar(l_red, kTermFloor), wi));
    } else {
      a = g.avg_pool2(a);
      b = g.avg_pool2(b);
    }
  }
  return result;
}

double mse(const Tensor& a, const Tensor& b) {
  check_shape(b, a.shape, "mse");
  double sum = 0.0;
  for (size_t i = 0; i < a.v.size(); ++i) {
    double d = a.v[i] - b.v[i];
    sum += d * d;
  }
  return sum / double(a.numel());
}

double psnr(const Tensor& a, const Tensor& b) {
  double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(m);
}

double ms_ssim(const Tensor& a, const Tensor& b) {
  if (a.shape.n != 1) throw DataError("ms_ssim: expects a single image, got " + a.shape.str());
  Graph g;
  return g.val(ms_ssim_graph(g, g.constant(a), g.constant(b))).item();
}

}  // namespace dfgs
