#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "deepfgs/error.hpp"
#include "deepfgs/graph.hpp"

namespace dfgs {

namespace {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvGeom {
  int k = 1, s = 1, p = 0;
  int c = 0, h = 0, w = 0;    // big (image-side) plane
  int oh = 0, ow = 0;         // small (column-side) plane

  static ConvGeom downsample(int c, int h, int w, int k, int s, int p) {
    ConvGeom g;
    g.k = k;
    g.s = s;
    g.p = p;
    g.c = c;
    g.h = h;
    g.w = w;
    int eh = h + 2 * p - k;
    int ew = w + 2 * p - k;
    if (eh < 0 || ew < 0) {
      throw DataError("conv: kernel larger than padded input");
    }
    g.oh = eh / s + 1;
    g.ow = ew / s + 1;
    return g;
  }

  // Same relation, but the caller names both planes; used by the transpose
  // direction where the big plane's size is not implied by the small one.
  static ConvGeom linked(int c, int h, int w, int k, int s, int p, int oh, int ow) {
    ConvGeom g = downsample(c, h, w, k, s, p);
    if (g.oh != oh || g.ow != ow) {
      throw DataError("transpose conv: output size incompatible with stride/pad");
    }
    return g;
  }
};

// Gather kernel patches of the big plane into a (c*k*k, oh*ow) matrix whose
// row order matches a row-major (c, k, k) weight slab.
MatRM im2col(const double* img, const ConvGeom& g) {
  MatRM cols(g.c * g.k * g.k, g.oh * g.ow);
  for (int c = 0; c < g.c; ++c) {
    const double* plane = img + size_t(c) * g.h * g.w;
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        int row = (c * g.k + ki) * g.k + kj;
        double* dst = cols.data() + size_t(row) * g.oh * g.ow;
        for (int oh = 0; oh < g.oh; ++oh) {
          int ih = oh * g.s + ki - g.p;
          for (int ow = 0; ow < g.ow; ++ow) {
            int iw = ow * g.s + kj - g.p;
            bool in = ih >= 0 && ih < g.h && iw >= 0 && iw < g.w;
            dst[oh * g.ow + ow] = in ? plane[ih * g.w + iw] : 0.0;
          }
        }
      }
    }
  }
  return cols;
}

// Adjoint of im2col: scatter-add columns back onto the big plane.
void col2im_add(const MatRM& cols, double* img, const ConvGeom& g) {
  for (int c = 0; c < g.c; ++c) {
    double* plane = img + size_t(c) * g.h * g.w;
    for (int ki = 0; ki < g.k; ++ki) {
      for (int kj = 0; kj < g.k; ++kj) {
        int row = (c * g.k + ki) * g.k + kj;
        const double* src = cols.data() + size_t(row) * g.oh * g.ow;
        for (int oh = 0; oh < g.oh; ++oh) {
          int ih = oh * g.s + ki - g.p;
          if (ih < 0 || ih >= g.h) continue;
          for (int ow = 0; ow < g.ow; ++ow) {
            int iw = ow * g.s + kj - g.p;
            if (iw < 0 || iw >= g.w) continue;
            plane[ih * g.w + iw] += src[oh * g.ow + ow];
          }
        }
      }
    }
  }
}

bool is_identity_patch(const ConvGeom& g) { return g.k == 1 && g.s == 1 && g.p == 0; }

// Copy mapped tensor storage into a freshly allocated (and therefore
// always identically aligned) matrix. Eigen's product and reduction kernels
// pick their scalar/packet split from the runtime alignment of the operands,
// so feeding them maps over arbitrary heap offsets makes results vary by
// ulps from run to run. Products in this file only ever see fresh matrices.
MatRM owned(const double* data, int rows, int cols) {
  MatRM m(rows, cols);
  std::copy(data, data + size_t(rows) * cols, m.data());
  return m;
}

// Elementwise accumulate a product result back onto tensor storage.
void add_to(double* dst, const MatRM& src) {
  const double* s = src.data();
  for (size_t i = 0, n = size_t(src.rows()) * size_t(src.cols()); i < n; ++i) dst[i] += s[i];
}

}  // namespace

Val Graph::conv2d(Val x, Val w, Val b, int stride, int pad) {
  const Tensor& tx = nodes_[x.id].val;
  const Tensor& tw = nodes_[w.id].val;
  const Tensor& tb = nodes_[b.id].val;
  Shape sx = tx.shape, sw = tw.shape;
  if (sw.h != sw.w) throw DataError("conv2d: kernel must be square");
  if (sw.c != sx.c) throw DataError("conv2d: weight expects " + std::to_string(sw.c) +
                                    " input channels, got " + std::to_string(sx.c));
  check_shape(tb, {1, sw.n, 1, 1}, "conv2d bias");
  ConvGeom g = ConvGeom::downsample(sx.c, sx.h, sx.w, sw.h, stride, pad);
  int cout = sw.n;
  Tensor out = Tensor::zeros({sx.n, cout, g.oh, g.ow});

  const MatRM wm = owned(tw.v.data(), cout, sx.c * g.k * g.k);
  for (int n = 0; n < sx.n; ++n) {
    const double* img = tx.v.data() + size_t(n) * sx.c * sx.h * sx.w;
    MatRM xm = is_identity_patch(g) ? owned(img, sx.c, g.oh * g.ow) : im2col(img, g);
    MatRM ym = wm * xm;
    double* dst = out.v.data() + size_t(n) * cout * g.oh * g.ow;
    const double* src = ym.data();
    for (int c = 0; c < cout; ++c) {
      double bias = tb.at(0, c, 0, 0);
      for (int i = 0; i < g.oh * g.ow; ++i) {
        dst[size_t(c) * g.oh * g.ow + i] = src[size_t(c) * g.oh * g.ow + i] + bias;
      }
    }
  }

  bool ng = nodes_[x.id].needs_grad || nodes_[w.id].needs_grad || nodes_[b.id].needs_grad;
  int xi = x.id, wi = w.id, bi = b.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [xi, wi, bi, g, cout](Graph& gr) {
    const Tensor& go = gr.nodes_[gr.cur_].grad;
    const Tensor& tx2 = gr.nodes_[xi].val;
    const Tensor& tw2 = gr.nodes_[wi].val;
    bool need_x = gr.nodes_[xi].needs_grad;
    bool need_w = gr.nodes_[wi].needs_grad;
    bool need_b = gr.nodes_[bi].needs_grad;
    int ckk = g.c * g.k * g.k;
    const MatRM wm = owned(tw2.v.data(), cout, ckk);
    Tensor dx = need_x ? Tensor::zeros(tx2.shape) : Tensor();
    Tensor dw = need_w ? Tensor::zeros(tw2.shape) : Tensor();
    Tensor db = need_b ? Tensor::zeros({1, cout, 1, 1}) : Tensor();
    for (int n = 0; n < tx2.shape.n; ++n) {
      const double* img = tx2.v.data() + size_t(n) * g.c * g.h * g.w;
      const MatRM dym = owned(go.v.data() + size_t(n) * cout * g.oh * g.ow, cout, g.oh * g.ow);
      if (need_w) {
        MatRM xm = is_identity_patch(g) ? owned(img, g.c, g.oh * g.ow) : im2col(img, g);
        MatRM prod = dym * xm.transpose();
        add_to(dw.v.data(), prod);
      }
      if (need_x) {
        double* dimg = dx.v.data() + size_t(n) * g.c * g.h * g.w;
        MatRM dcols = wm.transpose() * dym;
        if (is_identity_patch(g)) {
          add_to(dimg, dcols);
        } else {
          col2im_add(dcols, dimg, g);
        }
      }
      if (need_b) {
        // fixed-order accumulation: Eigen's vectorized redux would make the
        // result depend on the buffer's runtime alignment
        const double* dy = go.v.data() + size_t(n) * cout * g.oh * g.ow;
        for (int c = 0; c < cout; ++c) {
          double acc = 0.0;
          for (int i = 0; i < g.oh * g.ow; ++i) acc += dy[size_t(c) * g.oh * g.ow + i];
          db.at(0, c, 0, 0) += acc;
        }
      }
    }
    if (need_x) gr.accum(xi, dx);
    if (need_w) gr.accum(wi, dw);
    if (need_b) gr.accum(bi, db);
  });
  return {id};
}

Val Graph::conv_transpose2d(Val x, Val w, Val b, int stride, int pad, int out_h, int out_w) {
  const Tensor& tx = nodes_[x.id].val;
  const Tensor& tw = nodes_[w.id].val;
  const Tensor& tb = nodes_[b.id].val;
  Shape sx = tx.shape, sw = tw.shape;
  if (sw.h != sw.w) throw DataError("conv_transpose2d: kernel must be square");
  if (sw.n != sx.c) throw DataError("conv_transpose2d: weight expects " + std::to_string(sw.n) +
                                    " input channels, got " + std::to_string(sx.c));
  int cout = sw.c;
  check_shape(tb, {1, cout, 1, 1}, "conv_transpose2d bias");
  // The output is the big plane; the input sits on the column side.
  ConvGeom g = ConvGeom::linked(cout, out_h, out_w, sw.h, stride, pad, sx.h, sx.w);
  Tensor out = Tensor::zeros({sx.n, cout, out_h, out_w});

  int ckk = cout * g.k * g.k;
  const MatRM wm = owned(tw.v.data(), sx.c, ckk);  // (cin, cout*k*k)
  for (int n = 0; n < sx.n; ++n) {
    const MatRM xm = owned(tx.v.data() + size_t(n) * sx.c * sx.h * sx.w, sx.c, sx.h * sx.w);
    double* img = out.v.data() + size_t(n) * cout * out_h * out_w;
    MatRM cols = wm.transpose() * xm;  // (cout*k*k, h*w)
    col2im_add(cols, img, g);
    for (int c = 0; c < cout; ++c) {
      double bias = tb.at(0, c, 0, 0);
      for (int i = 0; i < out_h * out_w; ++i) img[size_t(c) * out_h * out_w + i] += bias;
    }
  }

  bool ng = nodes_[x.id].needs_grad || nodes_[w.id].needs_grad || nodes_[b.id].needs_grad;
  int xi = x.id, wi = w.id, bi = b.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [xi, wi, bi, g](Graph& gr) {
    const Tensor& go = gr.nodes_[gr.cur_].grad;
    const Tensor& tx2 = gr.nodes_[xi].val;
    const Tensor& tw2 = gr.nodes_[wi].val;
    bool need_x = gr.nodes_[xi].needs_grad;
    bool need_w = gr.nodes_[wi].needs_grad;
    bool need_b = gr.nodes_[bi].needs_grad;
    Shape sx2 = tx2.shape;
    int cin = sx2.c;
    int ckk2 = g.c * g.k * g.k;
    const MatRM wm = owned(tw2.v.data(), cin, ckk2);
    Tensor dx = need_x ? Tensor::zeros(sx2) : Tensor();
    Tensor dw = need_w ? Tensor::zeros(tw2.shape) : Tensor();
    Tensor db = need_b ? Tensor::zeros({1, g.c, 1, 1}) : Tensor();
    for (int n = 0; n < sx2.n; ++n) {
      const double* dimg = go.v.data() + size_t(n) * g.c * g.h * g.w;
      // Patch view of the upstream gradient: the same gather that the
      // forward's scatter adjoins.
      MatRM dcols = im2col(dimg, g);  // (cout*k*k, h*w)
      if (need_x) {
        MatRM prod = wm * dcols;
        add_to(dx.v.data() + size_t(n) * cin * sx2.h * sx2.w, prod);
      }
      if (need_w) {
        const MatRM xm = owned(tx2.v.data() + size_t(n) * cin * sx2.h * sx2.w, cin, sx2.h * sx2.w);
        MatRM prod = xm * dcols.transpose();
        add_to(dw.v.data(), prod);
      }
      if (need_b) {
        // fixed-order accumulation, as in conv2d's bias gradient
        for (int c = 0; c < g.c; ++c) {
          double acc = 0.0;
          for (int i = 0; i < g.h * g.w; ++i) acc += dimg[size_t(c) * g.h * g.w + i];
          db.at(0, c, 0, 0) += acc;
        }
      }
    }
    if (need_x) gr.accum(xi, dx);
    if (need_w) gr.accum(wi, dw);
    if (need_b) gr.accum(bi, db);
  });
  return {id};
}

Val Graph::linear(Val x, Val w, Val b) {
  const Tensor& tx = nodes_[x.id].val;
  const Tensor& tw = nodes_[w.id].val;
  const Tensor& tb = nodes_[b.id].val;
  Shape sx = tx.shape, sw = tw.shape;
  if (sx.h != 1 || sx.w != 1) throw DataError("linear: input must be (n,c,1,1), got " + sx.str());
  if (sw.c != sx.c || sw.h != 1 || sw.w != 1) throw DataError("linear: weight shape " + sw.str());
  int cout = sw.n;
  check_shape(tb, {1, cout, 1, 1}, "linear bias");
  Tensor out = Tensor::zeros({sx.n, cout, 1, 1});
  for (int n = 0; n < sx.n; ++n)
    for (int o = 0; o < cout; ++o) {
      double acc = tb.at(0, o, 0, 0);
      for (int i = 0; i < sx.c; ++i) acc += tw.at(o, i, 0, 0) * tx.at(n, i, 0, 0);
      out.at(n, o, 0, 0) = acc;
    }
  bool ng = nodes_[x.id].needs_grad || nodes_[w.id].needs_grad || nodes_[b.id].needs_grad;
  int xi = x.id, wi = w.id, bi = b.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [xi, wi, bi](Graph& g) {
    const Tensor& go = g.nodes_[g.cur_].grad;
    const Tensor& tx2 = g.nodes_[xi].val;
    const Tensor& tw2 = g.nodes_[wi].val;
    int nN = tx2.shape.n, cin = tx2.shape.c, cout2 = tw2.shape.n;
    if (g.nodes_[xi].needs_grad) {
      Tensor dx = Tensor::zeros(tx2.shape);
      for (int n = 0; n < nN; ++n)
        for (int i = 0; i < cin; ++i) {
          double acc = 0.0;
          for (int o = 0; o < cout2; ++o) acc += go.at(n, o, 0, 0) * tw2.at(o, i, 0, 0);
          dx.at(n, i, 0, 0) = acc;
        }
      g.accum(xi, dx);
    }
    if (g.nodes_[wi].needs_grad) {
      Tensor dw = Tensor::zeros(tw2.shape);
      for (int n = 0; n < nN; ++n)
        for (int o = 0; o < cout2; ++o)
          for (int i = 0; i < cin; ++i) dw.at(o, i, 0, 0) += go.at(n, o, 0, 0) * tx2.at(n, i, 0, 0);
      g.accum(wi, dw);
    }
    if (g.nodes_[bi].needs_grad) {
      Tensor db = Tensor::zeros({1, cout2, 1, 1});
      for (int n = 0; n < nN; ++n)
        for (int o = 0; o < cout2; ++o) db.at(0, o, 0, 0) += go.at(n, o, 0, 0);
      g.accum(bi, db);
    }
  });
  return {id};
}

Val Graph::blur_depthwise(Val x, const Tensor& kernel) {
  const Tensor& tx = nodes_[x.id].val;
  Shape s = tx.shape;
  Shape ks = kernel.shape;
  if (ks.n != 1 || ks.c != 1 || ks.h != ks.w) throw DataError("blur: kernel must be (1,1,k,k)");
  int k = ks.h;
  if (s.h < k || s.w < k) throw DataError("blur: input smaller than kernel");
  int oh = s.h - k + 1, ow = s.w - k + 1;
  Tensor out = Tensor::zeros({s.n, s.c, oh, ow});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < oh; ++y)
        for (int xw = 0; xw < ow; ++xw) {
          double acc = 0.0;
          for (int ki = 0; ki < k; ++ki)
            for (int kj = 0; kj < k; ++kj) acc += tx.at(n, c, y + ki, xw + kj) * kernel.at(0, 0, ki, kj);
          out.at(n, c, y, xw) = acc;
        }
  bool ng = nodes_[x.id].needs_grad;
  int xi = x.id;
  Tensor ker = kernel;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [xi, ker, k](Graph& g) {
    const Tensor& go = g.nodes_[g.cur_].grad;
    Shape sx = g.nodes_[xi].val.shape;
    Shape so = go.shape;
    Tensor dx = Tensor::zeros(sx);
    for (int n = 0; n < so.n; ++n)
      for (int c = 0; c < so.c; ++c)
        for (int y = 0; y < so.h; ++y)
          for (int xw = 0; xw < so.w; ++xw) {
            double gv = go.at(n, c, y, xw);
            for (int ki = 0; ki < k; ++ki)
              for (int kj = 0; kj < k; ++kj) dx.at(n, c, y + ki, xw + kj) += gv * ker.at(0, 0, ki, kj);
          }
    g.accum(xi, dx);
  });
  return {id};
}

Val Graph::avg_pool2(Val x) {
  const Tensor& tx = nodes_[x.id].val;
  Shape s = tx.shape;
  int oh = (s.h + 1) / 2, ow = (s.w + 1) / 2;
  Tensor out = Tensor::zeros({s.n, s.c, oh, ow});
  for (int n = 0; n < s.n; ++n)
    for (int c = 0; c < s.c; ++c)
      for (int y = 0; y < oh; ++y)
        for (int xw = 0; xw < ow; ++xw) {
          double acc = 0.0;
          for (int dy = 0; dy < 2; ++dy)
            for (int dx2 = 0; dx2 < 2; ++dx2) {
              int iy = 2 * y + dy, ix = 2 * xw + dx2;
              if (iy < s.h && ix < s.w) acc += tx.at(n, c, iy, ix);
            }
          out.at(n, c, y, xw) = acc * 0.25;
        }
  bool ng = nodes_[x.id].needs_grad;
  int xi = x.id;
  int id = push(std::move(out), ng, !ng ? std::function<void(Graph&)>() : [xi](Graph& g) {
    const Tensor& go = g.nodes_[g.cur_].grad;
    Shape sx = g.nodes_[xi].val.shape;
    Tensor dx = Tensor::zeros(sx);
    for (int n = 0; n < sx.n; ++n)
      for (int c = 0; c < sx.c; ++c)
        for (int y = 0; y < sx.h; ++y)
          for (int xw = 0; xw < sx.w; ++xw) dx.at(n, c, y, xw) = 0.25 * go.at(n, c, y / 2, xw / 2);
    g.accum(xi, dx);
  });
  return {id};
}

}  // namespace dfgs
