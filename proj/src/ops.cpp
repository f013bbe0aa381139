#include "uda/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace uda::ops {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using ConstVec = Eigen::Map<const Eigen::VectorXd>;

Tensor& grad_of(Node& self, std::size_t i) { return self.parents[i]->grad_buffer(); }
bool wants(Node& self, std::size_t i) { return self.parents[i]->requires_grad; }

template <typename F, typename G>
Var unary(const Var& x, F&& fwd, G&& dfdx_from_x_y) {
  const Tensor& in = x.value();
  Tensor out = Tensor::uninitialized(in.shape());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fwd(in[i]);
  return make_node(std::move(out), {x}, [dfdx_from_x_y](Node& self) {
    const Tensor& xin = self.parents[0]->value;
    Tensor& g = self.parents[0]->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * dfdx_from_x_y(xin[i], self.value[i]);
    }
  });
}

// A k x k convolution with zero padding k / 2 is evaluated on a padded
// copy of the input. Output pixel (y, x) lives at y * wp + x of a grid as
// wide as the padded plane, and tap (ky, kx) reads the padded plane at that
// index plus ky * wp + kx, so every tap is a shifted contiguous stream. The
// extra columns per output row are discarded. Work proceeds in blocks of
// kBlock grid cells whose accumulators stay in registers.
constexpr std::size_t kBlock = 32;

std::size_t round_up(std::size_t v) { return (v + kBlock - 1) / kBlock * kBlock; }

struct PaddedGeometry {
  int k, pad, h, w, wp;
  std::size_t plane;   // padded plane
  std::size_t span;    // output grid, h * wp, rounded up to whole blocks
  std::size_t reach;   // largest tap offset
  std::size_t stride;  // distance between planes in the padded buffers

  PaddedGeometry(int k_, int h_, int w_)
      : k(k_), pad(k_ / 2), h(h_), w(w_), wp(w_ + 2 * (k_ / 2)),
        plane(static_cast<std::size_t>(h_ + 2 * (k_ / 2)) * wp),
        span(round_up(static_cast<std::size_t>(h_) * wp)),
        reach(static_cast<std::size_t>(k_ - 1) * wp + (k_ - 1)),
        stride(round_up(std::max(plane, span + reach))) {}
  std::size_t tap(int ky, int kx) const { return static_cast<std::size_t>(ky) * wp + kx; }
};

void pad_sample(const double* img, int channels, const PaddedGeometry& g, double* dst) {
  for (int c = 0; c < channels; ++c) {
    for (int y = 0; y < g.h; ++y) {
      const double* src = img + (static_cast<std::size_t>(c) * g.h + y) * g.w;
      std::copy(src, src + g.w, dst + c * g.stride + g.tap(y + g.pad, g.pad));
    }
  }
}

// grid[o][i] = sum over c, taps of w[o][c][tap] * padded[c][i + tap].
void conv_forward_sample(const double* padded, const double* weight, int cin, int cout,
                         const PaddedGeometry& g, double* grid) {
  const int kk = g.k * g.k;
  for (std::size_t t0 = 0; t0 < g.span; t0 += kBlock) {
    for (int o = 0; o < cout; ++o) {
      double acc[kBlock] = {};
      for (int c = 0; c < cin; ++c) {
        const double* wk = weight + (static_cast<std::size_t>(o) * cin + c) * kk;
        const double* base = padded + c * g.stride + t0;
        for (int ky = 0; ky < g.k; ++ky) {
          for (int kx = 0; kx < g.k; ++kx) {
            const double wv = wk[ky * g.k + kx];
            const double* src = base + g.tap(ky, kx);
            for (std::size_t i = 0; i < kBlock; ++i) acc[i] += wv * src[i];
          }
        }
      }
      std::copy(acc, acc + kBlock, grid + o * g.span + t0);
    }
  }
}

void conv_weight_grad_sample(const double* padded, const double* dgrid, std::size_t rows, int cin,
                             int cout, const PaddedGeometry& g, double* gweight) {
  const int kk = g.k * g.k;
  const auto n = static_cast<Eigen::Index>(g.span);
  for (int o = 0; o < cout; ++o) {
    const ConstVec d(dgrid + o * rows, n);
    for (int c = 0; c < cin; ++c) {
      double* gk = gweight + (static_cast<std::size_t>(o) * cin + c) * kk;
      const double* base = padded + c * g.stride;
      for (int tap = 0; tap < kk; ++tap) {
        gk[tap] += d.dot(ConstVec(base + g.tap(tap / g.k, tap % g.k), n));
      }
    }
  }
}

// dpadded[c][j] = sum over o, taps of w[o][c][tap] * dgrid[o][j - tap], with
// dgrid stored after `reach` leading zeros so that j - tap never goes negative.
void conv_input_grad_sample(const double* weight, const double* dgrid_front, int cin, int cout,
                            const PaddedGeometry& g, double* dpadded) {
  const int kk = g.k * g.k;
  const std::size_t rows = g.span + g.reach;
  for (std::size_t t0 = 0; t0 < g.plane; t0 += kBlock) {
    for (int c = 0; c < cin; ++c) {
      double acc[kBlock] = {};
      for (int o = 0; o < cout; ++o) {
        const double* wk = weight + (static_cast<std::size_t>(o) * cin + c) * kk;
        const double* base = dgrid_front + o * rows + g.reach + t0;
        for (int ky = 0; ky < g.k; ++ky) {
          for (int kx = 0; kx < g.k; ++kx) {
            const double wv = wk[ky * g.k + kx];
            const double* src = base - g.tap(ky, kx);
            for (std::size_t i = 0; i < kBlock; ++i) acc[i] += wv * src[i];
          }
        }
      }
      std::copy(acc, acc + kBlock, dpadded + c * g.stride + t0);
    }
  }
}

}  // namespace

Var add(const Var& a, const Var& b) {
  require_same_shape(a.shape(), b.shape(), "add");
  Tensor out = Tensor::uninitialized(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] + b.value()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    for (std::size_t p = 0; p < 2; ++p) {
      if (!wants(self, p)) continue;
      Tensor& g = grad_of(self, p);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a.shape(), b.shape(), "sub");
  Tensor out = Tensor::uninitialized(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] - b.value()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    if (wants(self, 0)) {
      Tensor& g = grad_of(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
    if (wants(self, 1)) {
      Tensor& g = grad_of(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a.shape(), b.shape(), "mul");
  Tensor out = Tensor::uninitialized(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.value()[i] * b.value()[i];
  return make_node(std::move(out), {a, b}, [](Node& self) {
    const Tensor& av = self.parents[0]->value;
    const Tensor& bv = self.parents[1]->value;
    if (wants(self, 0)) {
      Tensor& g = grad_of(self, 0);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (wants(self, 1)) {
      Tensor& g = grad_of(self, 1);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Var scale(const Var& a, double s) {
  return unary(a, [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var add_scalar(const Var& a, double s) {
  return unary(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

Var relu(const Var& x) {
  return unary(
      x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(const Var& x) {
  return unary(
      x,
      [](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var exp(const Var& x) {
  return unary(x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
}

Var clamp(const Var& x, double lo, double hi) {
  return unary(
      x, [lo, hi](double v) { return std::clamp(v, lo, hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

Var conv2d(const Var& x, const Var& weight, const Var& bias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (ws.h != ws.w || ws.h % 2 == 0) {
    throw DimensionError("conv2d: kernel must be square and odd, got " + ws.str());
  }
  if (ws.c != xs.c) {
    throw DimensionError("conv2d: input has " + std::to_string(xs.c) + " channels, weight expects " +
                         std::to_string(ws.c));
  }
  if (!(bias.shape() == Shape{1, ws.n, 1, 1})) {
    throw DimensionError("conv2d: bias shape " + bias.shape().str());
  }
  const int k = ws.h;
  const int cout = ws.n;
  const int kk = xs.c * k * k;
  const int hw = xs.h * xs.w;
  Tensor out = Tensor::uninitialized(Shape{xs.n, cout, xs.h, xs.w});
  const double* b = bias.value().data();
  if (k == 1) {
    ConstMapMat wmat(weight.value().data(), cout, kk);
    for (int n = 0; n < xs.n; ++n) {
      ConstMapMat cmat(x.value().plane(n, 0), kk, hw);
      MapMat omat(out.plane(n, 0), cout, hw);
      omat.noalias() = wmat * cmat;
      for (int o = 0; o < cout; ++o) omat.row(o).array() += b[o];
    }
  } else {
    const PaddedGeometry g(k, xs.h, xs.w);
    std::vector<double> padded(xs.c * g.stride + g.stride, 0.0);
    std::vector<double> grid(cout * g.span);
    for (int n = 0; n < xs.n; ++n) {
      pad_sample(x.value().plane(n, 0), xs.c, g, padded.data());
      conv_forward_sample(padded.data(), weight.value().data(), xs.c, cout, g, grid.data());
      for (int o = 0; o < cout; ++o) {
        double* dst = out.plane(n, o);
        for (int y = 0; y < xs.h; ++y) {
          const double* src = grid.data() + o * g.span + g.tap(y, 0);
          for (int xx = 0; xx < xs.w; ++xx) dst[y * xs.w + xx] = src[xx] + b[o];
        }
      }
    }
  }
  return make_node(std::move(out), {x, weight, bias}, [k, kk, hw, cout](Node& self) {
    const Tensor& xin = self.parents[0]->value;
    const Tensor& wv = self.parents[1]->value;
    const Shape xs = xin.shape();
    const bool gx = wants(self, 0);
    const bool gw = wants(self, 1);
    const bool gb = wants(self, 2);
    if (gb) {
      Tensor& g = grad_of(self, 2);
      for (int n = 0; n < xs.n; ++n) {
        for (int o = 0; o < cout; ++o) {
          const double* src = self.grad.plane(n, o);
          g[o] += std::accumulate(src, src + hw, 0.0);
        }
      }
    }
    if (k == 1) {
      ConstMapMat wmat(wv.data(), cout, kk);
      for (int n = 0; n < xs.n; ++n) {
        ConstMapMat gout(self.grad.plane(n, 0), cout, hw);
        if (gw) {
          ConstMapMat cmat(xin.plane(n, 0), kk, hw);
          MapMat gwm(grad_of(self, 1).data(), cout, kk);
          gwm.noalias() += gout * cmat.transpose();
        }
        if (gx) {
          MapMat gxm(grad_of(self, 0).plane(n, 0), kk, hw);
          gxm.noalias() += wmat.transpose() * gout;
        }
      }
      return;
    }
    const PaddedGeometry g(k, xs.h, xs.w);
    std::vector<double> padded(gw ? xs.c * g.stride + g.stride : 0, 0.0);
    std::vector<double> dpadded(gx ? xs.c * g.stride : 0);
    // Gradient grid with `reach` leading zeros per channel; discarded columns
    // and the block tail stay zero.
    const std::size_t rows = g.span + g.reach;
    std::vector<double> dgrid(cout * rows + g.stride, 0.0);
    for (int n = 0; n < xs.n; ++n) {
      for (int o = 0; o < cout; ++o) {
        const double* src = self.grad.plane(n, o);
        double* dst = dgrid.data() + o * rows + g.reach;
        for (int y = 0; y < xs.h; ++y) std::copy(src + y * xs.w, src + (y + 1) * xs.w, dst + g.tap(y, 0));
      }
      if (gw) {
        pad_sample(xin.plane(n, 0), xs.c, g, padded.data());
        conv_weight_grad_sample(padded.data(), dgrid.data() + g.reach, rows, xs.c, cout, g,
                                grad_of(self, 1).data());
      }
      if (gx) {
        conv_input_grad_sample(wv.data(), dgrid.data(), xs.c, cout, g, dpadded.data());
        double* gxp = grad_of(self, 0).plane(n, 0);
        for (int c = 0; c < xs.c; ++c) {
          for (int y = 0; y < xs.h; ++y) {
            const double* src = dpadded.data() + c * g.stride + g.tap(y + g.pad, g.pad);
            double* dst = gxp + (static_cast<std::size_t>(c) * xs.h + y) * xs.w;
            for (int xx = 0; xx < xs.w; ++xx) dst[xx] += src[xx];
          }
        }
      }
    }
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  const Shape xs = x.shape();
  const Shape ws = weight.shape();
  if (xs.h != 1 || xs.w != 1 || ws.h != 1 || ws.w != 1 || ws.c != xs.c) {
    throw DimensionError("linear: input " + xs.str() + " weight " + ws.str());
  }
  if (!(bias.shape() == Shape{1, ws.n, 1, 1})) {
    throw DimensionError("linear: bias shape " + bias.shape().str());
  }
  const int in = xs.c;
  const int outc = ws.n;
  Tensor out = Tensor::uninitialized(Shape{xs.n, outc, 1, 1});
  ConstMapMat xm(x.value().data(), xs.n, in);
  ConstMapMat wm(weight.value().data(), outc, in);
  MapMat om(out.data(), xs.n, outc);
  om.noalias() = xm * wm.transpose();
  for (int n = 0; n < xs.n; ++n) {
    for (int o = 0; o < outc; ++o) om(n, o) += bias.value()[o];
  }
  return make_node(std::move(out), {x, weight, bias}, [in, outc](Node& self) {
    const int n = self.value.shape().n;
    ConstMapMat gout(self.grad.data(), n, outc);
    if (wants(self, 0)) {
      ConstMapMat wm(self.parents[1]->value.data(), outc, in);
      MapMat gx(grad_of(self, 0).data(), n, in);
      gx.noalias() += gout * wm;
    }
    if (wants(self, 1)) {
      ConstMapMat xm(self.parents[0]->value.data(), n, in);
      MapMat gw(grad_of(self, 1).data(), outc, in);
      gw.noalias() += gout.transpose() * xm;
    }
    if (wants(self, 2)) {
      Tensor& gb = grad_of(self, 2);
      for (int o = 0; o < outc; ++o) gb[o] += gout.col(o).sum();
    }
  });
}

Var max_pool2(const Var& x) {
  const Shape s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw DimensionError("max_pool2: odd spatial size " + s.str());
  }
  Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor out = Tensor::uninitialized(os);
  auto argmax = std::make_shared<std::vector<std::size_t>>(os.size());
  const Tensor& in = x.value();
  std::size_t o = 0;
  for (int n = 0; n < s.n; ++n) {
    for (int c = 0; c < s.c; ++c) {
      const std::size_t base = (static_cast<std::size_t>(n) * s.c + c) * s.plane();
      for (int y = 0; y < os.h; ++y) {
        for (int xx = 0; xx < os.w; ++xx, ++o) {
          std::size_t best = base + static_cast<std::size_t>(2 * y) * s.w + 2 * xx;
          for (std::size_t cand : {best + 1, best + s.w, best + s.w + 1}) {
            if (in[cand] > in[best]) best = cand;
          }
          out[o] = in[best];
          (*argmax)[o] = best;
        }
      }
    }
  }
  return make_node(std::move(out), {x}, [argmax](Node& self) {
    Tensor& g = grad_of(self, 0);
    for (std::size_t i = 0; i < argmax->size(); ++i) g[(*argmax)[i]] += self.grad[i];
  });
}

Var avg_pool2(const Var& x) {
  const Shape s = x.shape();
  if (s.h % 2 != 0 || s.w % 2 != 0) {
    throw DimensionError("avg_pool2: odd spatial size " + s.str());
  }
  Shape os{s.n, s.c, s.h / 2, s.w / 2};
  Tensor out = Tensor::uninitialized(os);
  const Tensor& in = x.value();
  for (int p = 0; p < s.n * s.c; ++p) {
    const double* src = in.data() + p * s.plane();
    double* dst = out.data() + p * os.plane();
    for (int y = 0; y < os.h; ++y) {
      for (int xx = 0; xx < os.w; ++xx) {
        const double* q = src + 2 * y * s.w + 2 * xx;
        dst[y * os.w + xx] = 0.25 * (q[0] + q[1] + q[s.w] + q[s.w + 1]);
      }
    }
  }
  return make_node(std::move(out), {x}, [](Node& self) {
    Tensor& g = grad_of(self, 0);
    const Shape s = g.shape();
    const Shape os = self.value.shape();
    for (int p = 0; p < s.n * s.c; ++p) {
      double* dst = g.data() + p * s.plane();
      const double* src = self.grad.data() + p * os.plane();
      for (int y = 0; y < os.h; ++y) {
        for (int xx = 0; xx < os.w; ++xx) {
          const double v = 0.25 * src[y * os.w + xx];
          double* q = dst + 2 * y * s.w + 2 * xx;
          q[0] += v;
          q[1] += v;
          q[s.w] += v;
          q[s.w + 1] += v;
        }
      }
    }
  });
}

Var upsample_nearest2(const Var& x) {
  const Shape s = x.shape();
  Shape os{s.n, s.c, s.h * 2, s.w * 2};
  Tensor out = Tensor::uninitialized(os);
  const Tensor& in = x.value();
  for (int p = 0; p < s.n * s.c; ++p) {
    const double* src = in.data() + p * s.plane();
    double* dst = out.data() + p * os.plane();
    for (int y = 0; y < os.h; ++y) {
      for (int xx = 0; xx < os.w; ++xx) dst[y * os.w + xx] = src[(y / 2) * s.w + xx / 2];
    }
  }
  return make_node(std::move(out), {x}, [](Node& self) {
    Tensor& g = grad_of(self, 0);
    const Shape s = g.shape();
    const Shape os = self.value.shape();
    for (int p = 0; p < s.n * s.c; ++p) {
      double* dst = g.data() + p * s.plane();
      const double* src = self.grad.data() + p * os.plane();
      for (int y = 0; y < os.h; ++y) {
        for (int xx = 0; xx < os.w; ++xx) dst[(y / 2) * s.w + xx / 2] += src[y * os.w + xx];
      }
    }
  });
}

Var concat_channels(const std::vector<Var>& parts) {
  if (parts.empty()) throw DimensionError("concat_channels: no inputs");
  Shape s = parts.front().shape();
  int channels = 0;
  for (const auto& p : parts) {
    const Shape ps = p.shape();
    if (ps.n != s.n || ps.h != s.h || ps.w != s.w) {
      throw DimensionError("concat_channels: " + ps.str() + " vs " + s.str());
    }
    channels += ps.c;
  }
  Shape os{s.n, channels, s.h, s.w};
  Tensor out = Tensor::uninitialized(os);
  const std::size_t plane = s.plane();
  for (int n = 0; n < s.n; ++n) {
    int c0 = 0;
    for (const auto& p : parts) {
      const int pc = p.shape().c;
      std::copy_n(p.value().plane(n, 0), pc * plane, out.plane(n, c0));
      c0 += pc;
    }
  }
  return make_node(std::move(out), parts, [](Node& self) {
    const Shape os = self.value.shape();
    const std::size_t plane = os.plane();
    for (int n = 0; n < os.n; ++n) {
      int c0 = 0;
      for (std::size_t i = 0; i < self.parents.size(); ++i) {
        const int pc = self.parents[i]->value.shape().c;
        if (self.parents[i]->requires_grad) {
          double* dst = self.parents[i]->grad_buffer().plane(n, 0);
          const double* src = self.grad.plane(n, c0);
          for (std::size_t j = 0; j < pc * plane; ++j) dst[j] += src[j];
        }
        c0 += pc;
      }
    }
  });
}

Var softmax_channels(const Var& x) {
  const Shape s = x.shape();
  const std::size_t plane = s.plane();
  Tensor out = Tensor::uninitialized(s);
  const Tensor& in = x.value();
  for (int n = 0; n < s.n; ++n) {
    const double* src = in.plane(n, 0);
    double* dst = out.plane(n, 0);
    for (std::size_t p = 0; p < plane; ++p) {
      double m = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < s.c; ++c) m = std::max(m, src[c * plane + p]);
      double z = 0.0;
      for (int c = 0; c < s.c; ++c) {
        const double e = std::exp(src[c * plane + p] - m);
        dst[c * plane + p] = e;
        z += e;
      }
      for (int c = 0; c < s.c; ++c) dst[c * plane + p] /= z;
    }
  }
  return make_node(std::move(out), {x}, [](Node& self) {
    const Shape s = self.value.shape();
    const std::size_t plane = s.plane();
    Tensor& g = grad_of(self, 0);
    for (int n = 0; n < s.n; ++n) {
      const double* y = self.value.plane(n, 0);
      const double* gy = self.grad.plane(n, 0);
      double* gx = g.plane(n, 0);
      for (std::size_t p = 0; p < plane; ++p) {
        double dot = 0.0;
        for (int c = 0; c < s.c; ++c) dot += y[c * plane + p] * gy[c * plane + p];
        for (int c = 0; c < s.c; ++c) gx[c * plane + p] += y[c * plane + p] * (gy[c * plane + p] - dot);
      }
    }
  });
}

Var global_avg_pool(const Var& x) {
  const Shape s = x.shape();
  Tensor out = Tensor::uninitialized(Shape{s.n, s.c, 1, 1});
  const std::size_t plane = s.plane();
  for (int p = 0; p < s.n * s.c; ++p) {
    const double* src = x.value().data() + p * plane;
    double acc = 0.0;
    for (std::size_t i = 0; i < plane; ++i) acc += src[i];
    out[p] = acc / static_cast<double>(plane);
  }
  return make_node(std::move(out), {x}, [](Node& self) {
    Tensor& g = grad_of(self, 0);
    const std::size_t plane = g.shape().plane();
    const double inv = 1.0 / static_cast<double>(plane);
    for (std::size_t p = 0; p < self.value.size(); ++p) {
      double* dst = g.data() + p * plane;
      const double v = self.grad[p] * inv;
      for (std::size_t i = 0; i < plane; ++i) dst[i] += v;
    }
  });
}

Var broadcast_spatial(const Var& x, int h, int w) {
  const Shape s = x.shape();
  if (s.h != 1 || s.w != 1) throw DimensionError("broadcast_spatial: input " + s.str());
  Shape os{s.n, s.c, h, w};
  Tensor out = Tensor::uninitialized(os);
  const std::size_t plane = os.plane();
  for (std::size_t p = 0; p < x.value().size(); ++p) {
    std::fill_n(out.data() + p * plane, plane, x.value()[p]);
  }
  return make_node(std::move(out), {x}, [](Node& self) {
    Tensor& g = grad_of(self, 0);
    const std::size_t plane = self.value.shape().plane();
    for (std::size_t p = 0; p < g.size(); ++p) {
      const double* src = self.grad.data() + p * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += src[i];
      g[p] += acc;
    }
  });
}

Var roll_batch(const Var& x, int shift) {
  const Shape s = x.shape();
  const std::size_t per = static_cast<std::size_t>(s.c) * s.plane();
  Tensor out = Tensor::uninitialized(s);
  auto src_index = [n = s.n, shift](int i) { return ((i + shift) % n + n) % n; };
  for (int i = 0; i < s.n; ++i) {
    std::copy_n(x.value().data() + src_index(i) * per, per, out.data() + i * per);
  }
  return make_node(std::move(out), {x}, [src_index, per](Node& self) {
    Tensor& g = grad_of(self, 0);
    for (int i = 0; i < self.value.shape().n; ++i) {
      double* dst = g.data() + src_index(i) * per;
      const double* src = self.grad.data() + i * per;
      for (std::size_t j = 0; j < per; ++j) dst[j] += src[j];
    }
  });
}

Var sum_all(const Var& x) {
  double acc = 0.0;
  for (double v : x.value().values()) acc += v;
  return make_node(Tensor::scalar(acc), {x}, [](Node& self) {
    Tensor& g = grad_of(self, 0);
    const double v = self.grad[0];
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += v;
  });
}

Var mean_all(const Var& x) {
  return scale(sum_all(x), 1.0 / static_cast<double>(x.value().size()));
}

namespace {
thread_local bool g_reversal_bypassed = false;
}

ReversalBypass::ReversalBypass() : previous_(g_reversal_bypassed) { g_reversal_bypassed = true; }
ReversalBypass::~ReversalBypass() { g_reversal_bypassed = previous_; }

Var gradient_reversal(const Var& x) {
  const double sign = g_reversal_bypassed ? 1.0 : -1.0;
  return unary(x, [](double v) { return v; }, [sign](double, double) { return sign; });
}

}  // namespace uda::ops
