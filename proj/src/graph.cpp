#include "deepfgs/graph.hpp"

#include <cmath>
#include <utility>

#include "deepfgs/error.hpp"

namespace dfgs {

namespace {

constexpr double kTwoOverSqrtPi = 1.1283791670955126;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (!(a.shape == b.shape)) {
    throw DataError(std::string(op) + ": shape mismatch " + a.shape.str() + " vs " + b.shape.str());
  }
}

}  // namespace

int Graph::push(Tensor t, bool needs_grad, std::function<void(Graph&)> back) {
  Node n;
  n.val = std::move(t);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return int(nodes_.size()) - 1;
}

void Graph::accum(int id, const Tensor& g) {
  Node& n = nodes_[id];
  if (!n.needs_grad) return;
  if (!n.grad_live) {
    n.grad = Tensor::zeros(n.val.shape);
    n.grad_live = true;
  }
  require_same_shape(n.grad, g, "grad accumulate");
  for (size_t i = 0; i < g.v.size(); ++i) n.grad.v[i] += g.v[i];
}

Tensor& Graph::grad(Val v) {
  Node& n = nodes_[v.id];
  if (!n.grad_live) {
    n.grad = Tensor::zeros(n.val.shape);
    n.grad_live = true;
  }
  return n.grad;
}

Val Graph::constant(Tensor t) { return {push(std::move(t), false, nullptr)}; }

Val Graph::param(const Tensor& value, Tensor* grad_sink) {
  int id = push(value, true, nullptr);
  if (grad_sink) {
    require_same_shape(value, *grad_sink, "param sink");
    nodes_[id].sink = grad_sink;
    nodes_[id].back = [id](Graph& g) {
      Node& n = g.nodes_[id];
      for (size_t i = 0; i < n.grad.v.size(); ++i) n.sink->v[i] += n.grad.v[i];
    };
  }
  return {id};
}

// ---------------------------------------------------------------------------
// elementwise binary

Val Graph::add(Val a, Val b) {
  const Tensor& ta = nodes_[a.id].val;
  const Tensor& tb = nodes_[b.id].val;
  require_same_shape(ta, tb, "add");
  Tensor out = ta;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] += tb.v[i];
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  int ai = a.id, bi = b.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai, bi](Graph& g) {
    const Tensor& go = g.nodes_[g.cur_].grad;
    g.accum(ai, go);
    g.accum(bi, go);
  });
  return {id};
}

Val Graph::sub(Val a, Val b) {
  const Tensor& ta = nodes_[a.id].val;
  const Tensor& tb = nodes_[b.id].val;
  require_same_shape(ta, tb, "sub");
  Tensor out = ta;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] -= tb.v[i];
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  int ai = a.id, bi = b.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai, bi](Graph& g) {
    const Tensor& go = g.nodes_[g.cur_].grad;
    g.accum(ai, go);
    if (g.nodes_[bi].needs_grad) {
      Tensor neg = go;
      for (double& x : neg.v) x = -x;
      g.accum(bi, neg);
    }
  });
  return {id};
}

Val Graph::mul(Val a, Val b) {
  const Tensor& ta = nodes_[a.id].val;
  const Tensor& tb = nodes_[b.id].val;
  require_same_shape(ta, tb, "mul");
  Tensor out = ta;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] *= tb.v[i];
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  int ai = a.id, bi = b.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai, bi](Graph& g) {
    const Tensor& go = g.nodes_[g.cur_].grad;
    if (g.nodes_[ai].needs_grad) {
      Tensor da = go;
      const Tensor& tb2 = g.nodes_[bi].val;
      for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= tb2.v[i];
      g.accum(ai, da);
    }
    if (g.nodes_[bi].needs_grad) {
      Tensor db = go;
      const Tensor& ta2 = g.nodes_[ai].val;
      for (size_t i = 0; i < db.v.size(); ++i) db.v[i] *= ta2.v[i];
      g.accum(bi, db);
    }
  });
  return {id};
}

Val Graph::div(Val a, Val b) {
  const Tensor& ta = nodes_[a.id].val;
  const Tensor& tb = nodes_[b.id].val;
  require_same_shape(ta, tb, "div");
  Tensor out = ta;
  for (size_t i = 0; i < out.v.size(); ++i) out.v[i] /= tb.v[i];
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  int ai = a.id, bi = b.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai, bi](Graph& g) {
    int self = g.cur_;
    const Tensor& go = g.nodes_[self].grad;
    const Tensor& tb2 = g.nodes_[bi].val;
    if (g.nodes_[ai].needs_grad) {
      Tensor da = go;
      for (size_t i = 0; i < da.v.size(); ++i) da.v[i] /= tb2.v[i];
      g.accum(ai, da);
    }
    if (g.nodes_[bi].needs_grad) {
      const Tensor& o = g.nodes_[self].val;
      Tensor db = go;
      for (size_t i = 0; i < db.v.size(); ++i) db.v[i] *= -o.v[i] / tb2.v[i];
      g.accum(bi, db);
    }
  });
  return {id};
}

// ---------------------------------------------------------------------------
// elementwise unary

namespace {
using Fwd = double (*)(double);
}

Val Graph::add_scalar(Val a, double c) {
  Tensor out = nodes_[a.id].val;
  for (double& x : out.v) x += c;
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai](Graph& g) {
    g.accum(ai, g.nodes_[g.cur_].grad);
  });
  return {id};
}

Val Graph::mul_scalar(Val a, double c) {
  Tensor out = nodes_[a.id].val;
  for (double& x : out.v) x *= c;
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai, c](Graph& g) {
    Tensor da = g.nodes_[g.cur_].grad;
    for (double& x : da.v) x *= c;
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::square(Val a) {
  Tensor out = nodes_[a.id].val;
  for (double& x : out.v) x *= x;
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai](Graph& g) {
    Tensor da = g.nodes_[g.cur_].grad;
    const Tensor& ta = g.nodes_[ai].val;
    for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= 2.0 * ta.v[i];
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::pow_scalar(Val a, double p) {
  Tensor out = nodes_[a.id].val;
  for (double& x : out.v) x = std::pow(x, p);
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai, p](Graph& g) {
    Tensor da = g.nodes_[g.cur_].grad;
    const Tensor& ta = g.nodes_[ai].val;
    for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= p * std::pow(ta.v[i], p - 1.0);
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::exp(Val a) {
  Tensor out = nodes_[a.id].val;
  for (double& x : out.v) x = std::exp(x);
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai](Graph& g) {
    int self = g.cur_;
    Tensor da = g.nodes_[self].grad;
    const Tensor& o = g.nodes_[self].val;
    for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= o.v[i];
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::log(Val a) {
  Tensor out = nodes_[a.id].val;
  for (double& x : out.v) x = std::log(x);
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai](Graph& g) {
    Tensor da = g.nodes_[g.cur_].grad;
    const Tensor& ta = g.nodes_[ai].val;
    for (size_t i = 0; i < da.v.size(); ++i) da.v[i] /= ta.v[i];
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::sigmoid(Val a) {
  Tensor out = nodes_[a.id].val;
  for (double& x : out.v) x = 1.0 / (1.0 + std::exp(-x));
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai](Graph& g) {
    int self = g.cur_;
    Tensor da = g.nodes_[self].grad;
    const Tensor& o = g.nodes_[self].val;
    for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= o.v[i] * (1.0 - o.v[i]);
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::tanh(Val a) {
  Tensor out = nodes_[a.id].val;
  for (double& x : out.v) x = std::tanh(x);
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai](Graph& g) {
    int self = g.cur_;
    Tensor da = g.nodes_[self].grad;
    const Tensor& o = g.nodes_[self].val;
    for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= 1.0 - o.v[i] * o.v[i];
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::erf(Val a) {
  Tensor out = nodes_[a.id].val;
  for (double& x : out.v) x = std::erf(x);
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai](Graph& g) {
    Tensor da = g.nodes_[g.cur_].grad;
    const Tensor& ta = g.nodes_[ai].val;
    for (size_t i = 0; i < da.v.size(); ++i) {
      da.v[i] *= kTwoOverSqrtPi * std::exp(-ta.v[i] * ta.v[i]);
    }
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::softplus(Val a) {
  Tensor out = nodes_[a.id].val;
  for (double& x : out.v) x = (x > 30.0) ? x : std::log1p(std::exp(x));
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai](Graph& g) {
    Tensor da = g.nodes_[g.cur_].grad;
    const Tensor& ta = g.nodes_[ai].val;
    for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= 1.0 / (1.0 + std::exp(-ta.v[i]));
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::leaky_relu(Val a, double slope) {
  Tensor out = nodes_[a.id].val;
  for (double& x : out.v) x = (x >= 0.0) ? x : slope * x;
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai, slope](Graph& g) {
    Tensor da = g.nodes_[g.cur_].grad;
    const Tensor& ta = g.nodes_[ai].val;
    for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= (ta.v[i] >= 0.0) ? 1.0 : slope;
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::max_scalar(Val a, double c) {
  Tensor out = nodes_[a.id].val;
  for (double& x : out.v) x = (x > c) ? x : c;
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai, c](Graph& g) {
    Tensor da = g.nodes_[g.cur_].grad;
    const Tensor& ta = g.nodes_[ai].val;
    for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= (ta.v[i] >= c) ? 1.0 : 0.0;
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::min_scalar(Val a, double c) {
  Tensor out = nodes_[a.id].val;
  for (double& x : out.v) x = (x < c) ? x : c;
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai, c](Graph& g) {
    Tensor da = g.nodes_[g.cur_].grad;
    const Tensor& ta = g.nodes_[ai].val;
    for (size_t i = 0; i < da.v.size(); ++i) da.v[i] *= (ta.v[i] <= c) ? 1.0 : 0.0;
    g.accum(ai, da);
  });
  return {id};
}

// ---------------------------------------------------------------------------
// reductions and broadcasts

Val Graph::sum_all(Val a) {
  double s = 0.0;
  for (double x : nodes_[a.id].val.v) s += x;
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(Tensor::scalar(s), ng, !ng ? std::function<void(Graph&)>() : [ai](Graph& g) {
    double go = g.nodes_[g.cur_].grad.v[0];
    Tensor da = Tensor::full(g.nodes_[ai].val.shape, go);
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::mean_all(Val a) {
  const Tensor& ta = nodes_[a.id].val;
  double s = 0.0;
  for (double x : ta.v) s += x;
  double inv = 1.0 / double(ta.shape.numel());
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(Tensor::scalar(s * inv), ng, !ng ? std::function<void(Graph&)>() : [ai, inv](Graph& g) {
    double go = g.nodes_[g.cur_].grad.v[0];
    Tensor da = Tensor::full(g.nodes_[ai].val.shape, go * inv);
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::spatial_mean(Val a) {
  const Tensor& ta = nodes_[a.id].val;
  Shape s = ta.shape;
  Tensor out = Tensor::zeros({s.n, s.c, 1, 1});
  double inv = 1.0 / double(s.h * s.w);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      double acc = 0.0;
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) acc += ta.at(n, c, h, w);
      out.at(n, c, 0, 0) = acc * inv;
    }
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai, inv](Graph& g) {
    const Tensor& go = g.nodes_[g.cur_].grad;
    Shape sa = g.nodes_[ai].val.shape;
    Tensor da = Tensor::zeros(sa);
    for (int n = 0; n < sa.n; ++n)
      for (int c = 0; c < sa.c; ++c) {
        double v = go.at(n, c, 0, 0) * inv;
        for (int h = 0; h < sa.h; ++h)
          for (int w = 0; w < sa.w; ++w) da.at(n, c, h, w) = v;
      }
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::channel_mean(Val a) {
  const Tensor& ta = nodes_[a.id].val;
  Shape s = ta.shape;
  Tensor out = Tensor::zeros({s.n, 1, s.h, s.w});
  double inv = 1.0 / double(s.c);
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) out.at(n, 0, h, w) += ta.at(n, c, h, w) * inv;
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai, inv](Graph& g) {
    const Tensor& go = g.nodes_[g.cur_].grad;
    Shape sa = g.nodes_[ai].val.shape;
    Tensor da = Tensor::zeros(sa);
    for (int n = 0; n < sa.n; ++n)
      for (int c = 0; c < sa.c; ++c)
        for (int h = 0; h < sa.h; ++h)
          for (int w = 0; w < sa.w; ++w) da.at(n, c, h, w) = go.at(n, 0, h, w) * inv;
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::bmul_c(Val x, Val gate) {
  const Tensor& tx = nodes_[x.id].val;
  const Tensor& tg = nodes_[gate.id].val;
  Shape s = tx.shape;
  check_shape(tg, {s.n, s.c, 1, 1}, "bmul_c gate");
  Tensor out = tx;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      double gch = tg.at(n, c, 0, 0);
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) out.at(n, c, h, w) *= gch;
    }
  bool ng = nodes_[x.id].needs_grad || nodes_[gate.id].needs_grad;
  int xi = x.id, gi = gate.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [xi, gi](Graph& g) {
    const Tensor& go = g.nodes_[g.cur_].grad;
    const Tensor& tx2 = g.nodes_[xi].val;
    const Tensor& tg2 = g.nodes_[gi].val;
    Shape s2 = tx2.shape;
    if (g.nodes_[xi].needs_grad) {
      Tensor dx = go;
      for (int n = 0; n < s2.n; ++n)
        for (int c = 0; c < s2.c; ++c) {
          double gch = tg2.at(n, c, 0, 0);
          for (int h = 0; h < s2.h; ++h)
            for (int w = 0; w < s2.w; ++w) dx.at(n, c, h, w) *= gch;
        }
      g.accum(xi, dx);
    }
    if (g.nodes_[gi].needs_grad) {
      Tensor dg = Tensor::zeros(tg2.shape);
      for (int n = 0; n < s2.n; ++n)
        for (int c = 0; c < s2.c; ++c) {
          double acc = 0.0;
          for (int h = 0; h < s2.h; ++h)
            for (int w = 0; w < s2.w; ++w) acc += go.at(n, c, h, w) * tx2.at(n, c, h, w);
          dg.at(n, c, 0, 0) = acc;
        }
      g.accum(gi, dg);
    }
  });
  return {id};
}

Val Graph::bmul_s(Val x, Val gate) {
  const Tensor& tx = nodes_[x.id].val;
  const Tensor& tg = nodes_[gate.id].val;
  Shape s = tx.shape;
  check_shape(tg, {s.n, 1, s.h, s.w}, "bmul_s gate");
  Tensor out = tx;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) out.at(n, c, h, w) *= tg.at(n, 0, h, w);
  bool ng = nodes_[x.id].needs_grad || nodes_[gate.id].needs_grad;
  int xi = x.id, gi = gate.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [xi, gi](Graph& g) {
    const Tensor& go = g.nodes_[g.cur_].grad;
    const Tensor& tx2 = g.nodes_[xi].val;
    const Tensor& tg2 = g.nodes_[gi].val;
    Shape s2 = tx2.shape;
    if (g.nodes_[xi].needs_grad) {
      Tensor dx = go;
      for (int n = 0; n < s2.n; ++n)
        for (int c = 0; c < s2.c; ++c)
          for (int h = 0; h < s2.h; ++h)
            for (int w = 0; w < s2.w; ++w) dx.at(n, c, h, w) *= tg2.at(n, 0, h, w);
      g.accum(xi, dx);
    }
    if (g.nodes_[gi].needs_grad) {
      Tensor dg = Tensor::zeros(tg2.shape);
      for (int n = 0; n < s2.n; ++n)
        for (int c = 0; c < s2.c; ++c)
          for (int h = 0; h < s2.h; ++h)
            for (int w = 0; w < s2.w; ++w) dg.at(n, 0, h, w) += go.at(n, c, h, w) * tx2.at(n, c, h, w);
      g.accum(gi, dg);
    }
  });
  return {id};
}

Val Graph::mul_cwise(Val x, Val s) {
  const Tensor& tx = nodes_[x.id].val;
  const Tensor& ts = nodes_[s.id].val;
  Shape sh = tx.shape;
  check_shape(ts, {1, sh.c, 1, 1}, "mul_cwise scale");
  Tensor out = tx;
  for (int n = 0; n < sh.n; ++n)
    for (int c = 0; c < sh.c; ++c) {
      double sc = ts.at(0, c, 0, 0);
      for (int h = 0; h < sh.h; ++h)
        for (int w = 0; w < sh.w; ++w) out.at(n, c, h, w) *= sc;
    }
  bool ng = nodes_[x.id].needs_grad || nodes_[s.id].needs_grad;
  int xi = x.id, si = s.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [xi, si](Graph& g) {
    const Tensor& go = g.nodes_[g.cur_].grad;
    const Tensor& tx2 = g.nodes_[xi].val;
    const Tensor& ts2 = g.nodes_[si].val;
    Shape s2 = tx2.shape;
    if (g.nodes_[xi].needs_grad) {
      Tensor dx = go;
      for (int n = 0; n < s2.n; ++n)
        for (int c = 0; c < s2.c; ++c) {
          double sc = ts2.at(0, c, 0, 0);
          for (int h = 0; h < s2.h; ++h)
            for (int w = 0; w < s2.w; ++w) dx.at(n, c, h, w) *= sc;
        }
      g.accum(xi, dx);
    }
    if (g.nodes_[si].needs_grad) {
      Tensor ds = Tensor::zeros(ts2.shape);
      for (int n = 0; n < s2.n; ++n)
        for (int c = 0; c < s2.c; ++c) {
          double acc = 0.0;
          for (int h = 0; h < s2.h; ++h)
            for (int w = 0; w < s2.w; ++w) acc += go.at(n, c, h, w) * tx2.at(n, c, h, w);
          ds.at(0, c, 0, 0) += acc;
        }
      g.accum(si, ds);
    }
  });
  return {id};
}

Val Graph::add_bias(Val x, Val b) {
  const Tensor& tx = nodes_[x.id].val;
  const Tensor& tb = nodes_[b.id].val;
  Shape s = tx.shape;
  check_shape(tb, {1, s.c, 1, 1}, "bias");
  Tensor out = tx;
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c) {
      double bc = tb.at(0, c, 0, 0);
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) out.at(n, c, h, w) += bc;
    }
  bool ng = nodes_[x.id].needs_grad || nodes_[b.id].needs_grad;
  int xi = x.id, bi = b.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [xi, bi](Graph& g) {
    const Tensor& go = g.nodes_[g.cur_].grad;
    g.accum(xi, go);
    if (g.nodes_[bi].needs_grad) {
      Shape s2 = go.shape;
      Tensor db = Tensor::zeros({1, s2.c, 1, 1});
      for (int n = 0; n < s2.n; ++n)
        for (int c = 0; c < s2.c; ++c)
          for (int h = 0; h < s2.h; ++h)
            for (int w = 0; w < s2.w; ++w) db.at(0, c, 0, 0) += go.at(n, c, h, w);
      g.accum(bi, db);
    }
  });
  return {id};
}

// ---------------------------------------------------------------------------
// layout

Val Graph::concat_c(Val a, Val b) {
  const Tensor& ta = nodes_[a.id].val;
  const Tensor& tb = nodes_[b.id].val;
  Shape sa = ta.shape, sb = tb.shape;
  if (sa.n != sb.n || sa.h != sb.h || sa.w != sb.w) {
    throw DataError("concat_c: incompatible shapes " + sa.str() + " vs " + sb.str());
  }
  Tensor out = Tensor::zeros({sa.n, sa.c + sb.c, sa.h, sa.w});
  for (int n = 0; n < sa.n; ++n) {
    for (int c = 0; c < sa.c; ++c)
      for (int h = 0; h < sa.h; ++h)
        for (int w = 0; w < sa.w; ++w) out.at(n, c, h, w) = ta.at(n, c, h, w);
    for (int c = 0; c < sb.c; ++c)
      for (int h = 0; h < sa.h; ++h)
        for (int w = 0; w < sa.w; ++w) out.at(n, sa.c + c, h, w) = tb.at(n, c, h, w);
  }
  bool ng = nodes_[a.id].needs_grad || nodes_[b.id].needs_grad;
  int ai = a.id, bi = b.id;
  int ca = sa.c;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai, bi, ca](Graph& g) {
    const Tensor& go = g.nodes_[g.cur_].grad;
    Shape so = go.shape;
    if (g.nodes_[ai].needs_grad) {
      Tensor da = Tensor::zeros({so.n, ca, so.h, so.w});
      for (int n = 0; n < so.n; ++n)
        for (int c = 0; c < ca; ++c)
          for (int h = 0; h < so.h; ++h)
            for (int w = 0; w < so.w; ++w) da.at(n, c, h, w) = go.at(n, c, h, w);
      g.accum(ai, da);
    }
    if (g.nodes_[bi].needs_grad) {
      int cb = so.c - ca;
      Tensor db = Tensor::zeros({so.n, cb, so.h, so.w});
      for (int n = 0; n < so.n; ++n)
        for (int c = 0; c < cb; ++c)
          for (int h = 0; h < so.h; ++h)
            for (int w = 0; w < so.w; ++w) db.at(n, c, h, w) = go.at(n, ca + c, h, w);
      g.accum(bi, db);
    }
  });
  return {id};
}

Val Graph::slice_c(Val a, int c0, int c1) {
  const Tensor& ta = nodes_[a.id].val;
  Shape s = ta.shape;
  if (c0 < 0 || c1 > s.c || c0 >= c1) {
    throw DataError("slice_c: bad channel range");
  }
  Tensor out = Tensor::zeros({s.n, c1 - c0, s.h, s.w});
  for (int n = 0; n < s.n; ++n)
    for (int c = c0; c < c1; ++c)
      for (int h = 0; h < s.h; ++h)
        for (int w = 0; w < s.w; ++w) out.at(n, c - c0, h, w) = ta.at(n, c, h, w);
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai, c0, c1](Graph& g) {
    const Tensor& go = g.nodes_[g.cur_].grad;
    Shape sa = g.nodes_[ai].val.shape;
    Tensor da = Tensor::zeros(sa);
    for (int n = 0; n < sa.n; ++n)
      for (int c = c0; c < c1; ++c)
        for (int h = 0; h < sa.h; ++h)
          for (int w = 0; w < sa.w; ++w) da.at(n, c, h, w) = go.at(n, c - c0, h, w);
    g.accum(ai, da);
  });
  return {id};
}

Val Graph::reshape(Val a, Shape s) {
  const Tensor& ta = nodes_[a.id].val;
  if (ta.shape.numel() != s.numel()) {
    throw DataError("reshape: element count mismatch " + ta.shape.str() + " -> " + s.str());
  }
  Tensor out = ta;
  out.shape = s;
  bool ng = nodes_[a.id].needs_grad;
  int ai = a.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [ai](Graph& g) {
    Tensor da = g.nodes_[g.cur_].grad;
    da.shape = g.nodes_[ai].val.shape;
    g.accum(ai, da);
  });
  return {id};
}

// ---------------------------------------------------------------------------
// backward driver

void Graph::backward(Val root) {
  Node& r = nodes_[root.id];
  if (r.val.shape.numel() != 1) {
    throw DataError("backward: root must be scalar, got " + r.val.shape.str());
  }
  if (!r.needs_grad) return;
  accum(root.id, Tensor::scalar(1.0));
  for (int i = root.id; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.grad_live || !n.back) continue;
    cur_ = i;
    n.back(*this);
    n.back = nullptr;  // one-shot: free captured state as we go
  }
}

}  // namespace dfgs
