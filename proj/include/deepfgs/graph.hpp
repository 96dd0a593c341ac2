#pragma once

#include <functional>
#include <vector>

#include "deepfgs/tensor.hpp"

namespace dfgs {

struct Val {
  int id = -1;
  bool ok() const { return id >= 0; }
};

// Reverse-mode tape. One Graph per forward pass; ops append nodes, backward()
// walks the tape once in reverse. Parameters are leaves with an external
// gradient sink so the same stored tensors accumulate across batch items.
class Graph {
 public:
  Val constant(Tensor t);
  Val param(const Tensor& value, Tensor* grad_sink);

  const Tensor& val(Val v) const { return nodes_[v.id].val; }
  Tensor& grad(Val v);
  bool needs_grad(Val v) const { return nodes_[v.id].needs_grad; }

  // elementwise, shapes must match
  Val add(Val a, Val b);
  Val sub(Val a, Val b);
  Val mul(Val a, Val b);
  Val div(Val a, Val b);

  Val add_scalar(Val a, double c);
  Val mul_scalar(Val a, double c);

  Val square(Val a);
  Val pow_scalar(Val a, double p);  // positive base
  Val exp(Val a);
  Val log(Val a);
  Val sigmoid(Val a);
  Val tanh(Val a);
  Val erf(Val a);
  Val softplus(Val a);
  Val leaky_relu(Val a, double slope);
  Val max_scalar(Val a, double c);  // gradient passes where a >= c
  Val min_scalar(Val a, double c);  // gradient passes where a <= c

  Val sum_all(Val a);   // -> (1,1,1,1)
  Val mean_all(Val a);  // -> (1,1,1,1)

  Val spatial_mean(Val a);  // (n,c,h,w) -> (n,c,1,1)
  Val channel_mean(Val a);  // (n,c,h,w) -> (n,1,h,w)

  Val bmul_c(Val x, Val gate);   // gate (n,c,1,1)
  Val bmul_s(Val x, Val gate);   // gate (n,1,h,w)
  Val mul_cwise(Val x, Val s);   // s (1,c,1,1): per-channel scale shared by the batch

  Val add_bias(Val x, Val b);  // b (1,c,1,1)

  Val concat_c(Val a, Val b);
  Val slice_c(Val a, int c0, int c1);  // channels [c0, c1)
  Val reshape(Val a, Shape s);

  // weight (cout, cin, k, k); explicit bias; zero padding
  Val conv2d(Val x, Val w, Val b, int stride, int pad);
  // weight (cin, cout, k, k); output spatial size passed explicitly since
  // stride-2 stages lose the parity of the input
  Val conv_transpose2d(Val x, Val w, Val b, int stride, int pad, int out_h, int out_w);
  // x (n, c, 1, 1), w (cout, cin, 1, 1), b (1, cout, 1, 1)
  Val linear(Val x, Val w, Val b);

  // fixed depthwise kernel, valid range only (no padding), no kernel grad
  Val blur_depthwise(Val x, const Tensor& kernel);
  // 2x2 stride-2 average pool; odd sizes zero-padded on the bottom/right and
  // the pad cells still count in the average
  Val avg_pool2(Val x);

  void backward(Val root);

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor val;
    Tensor grad;
    bool needs_grad = false;
    bool grad_live = false;
    std::function<void(Graph&)> back;
    Tensor* sink = nullptr;
  };

  int push(Tensor t, bool needs_grad, std::function<void(Graph&)> back);
  Node& node(int id) { return nodes_[id]; }
  void accum(int id, const Tensor& g);

  std::vector<Node> nodes_;
  int cur_ = -1;  // node whose backward closure is currently running
};

}  // namespace dfgs
