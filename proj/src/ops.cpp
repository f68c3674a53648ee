#include "dg/ops.hpp"

#include <algorithm>
#include <string>
#include <vector>
#include <utility>

#include "dg/error.hpp"

namespace dg {
namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

struct ConvDims {
  std::size_t batch, cin, h, w, cout, ho, wo;
};

ConvDims conv_dims(const Tensor& kernel, const Tensor& x) {
  require(kernel.rank() == 4 && kernel.dim(2) == 3 && kernel.dim(3) == 3,
          "conv2d kernel must be [co x ci x 3 x 3], got " + to_string(kernel.shape()));
  require(x.rank() == 3 || x.rank() == 4, "conv2d input must be [ci x H x W] or [B x ci x H x W]");
  const std::size_t off = x.rank() == 4 ? 1 : 0;
  ConvDims d{};
  d.batch = off ? x.dim(0) : 1;
  d.cin = x.dim(off);
  d.h = x.dim(off + 1);
  d.w = x.dim(off + 2);
  d.cout = kernel.dim(0);
  require(kernel.dim(1) == d.cin, "conv2d channel mismatch: kernel " + to_string(kernel.shape()) +
                                      " vs input " + to_string(x.shape()));
  require(d.h >= 3 && d.w >= 3, "conv2d needs spatial extent >= 3, got " + to_string(x.shape()));
  d.ho = d.h - 2;
  d.wo = d.w - 2;
  return d;
}

Var conv2d_impl(Var kernel, const Var* bias, Var x) {
  const Tensor& K = kernel.value();
  const Tensor& X = x.value();
  const ConvDims d = conv_dims(K, X);
  if (bias) {
    require(bias->value().rank() == 1 && bias->value().dim(0) == d.cout, "conv2d bias must be [co]");
  }
  Shape out_shape = X.rank() == 4 ? Shape{d.batch, d.cout, d.ho, d.wo} : Shape{d.cout, d.ho, d.wo};
  Tensor out(out_shape, 0.0);
  const double* kp = K.data().data();
  const double* xp = X.data().data();
  double* op = out.data().data();
  const std::size_t in_plane = d.h * d.w, out_plane = d.ho * d.wo;
  for (std::size_t b = 0; b < d.batch; ++b) {
    for (std::size_t o = 0; o < d.cout; ++o) {
      double* oplane = op + (b * d.cout + o) * out_plane;
      if (bias) {
        const double bv = bias->value()[o];
        for (std::size_t i = 0; i < out_plane; ++i) oplane[i] = bv;
      }
      for (std::size_t c = 0; c < d.cin; ++c) {
        const double* iplane = xp + (b * d.cin + c) * in_plane;
        const double* kc = kp + (o * d.cin + c) * 9;
        for (std::size_t ky = 0; ky < 3; ++ky) {
          for (std::size_t kx = 0; kx < 3; ++kx) {
            const double kv = kc[ky * 3 + kx];
            for (std::size_t y = 0; y < d.ho; ++y) {
              const double* irow = iplane + (y + ky) * d.w + kx;
              double* orow = oplane + y * d.wo;
              for (std::size_t xx = 0; xx < d.wo; ++xx) orow[xx] += kv * irow[xx];
            }
          }
        }
      }
    }
  }

  Var bias_var = bias ? *bias : Var{};
  auto rule = [kernel, bias_var, x, d](const Tensor& up, Gradients& grads) {
    const double* upp = up.data().data();
    const std::size_t in_plane = d.h * d.w, out_plane = d.ho * d.wo;
    if (bias_var.valid() && grads.wants(bias_var)) {
      Tensor& gb = grads.slot(bias_var);
      for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t o = 0; o < d.cout; ++o) {
          const double* uplane = upp + (b * d.cout + o) * out_plane;
          double s = 0.0;
          for (std::size_t i = 0; i < out_plane; ++i) s += uplane[i];
          gb[o] += s;
        }
    }
    const double* xp = x.value().data().data();
    const double* kp = kernel.value().data().data();
    if (grads.wants(kernel)) {
      double* gk = grads.slot(kernel).data().data();
      for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t o = 0; o < d.cout; ++o) {
          const double* uplane = upp + (b * d.cout + o) * out_plane;
          for (std::size_t c = 0; c < d.cin; ++c) {
            const double* iplane = xp + (b * d.cin + c) * in_plane;
            double* gkc = gk + (o * d.cin + c) * 9;
            for (std::size_t ky = 0; ky < 3; ++ky)
              for (std::size_t kx = 0; kx < 3; ++kx) {
                double s = 0.0;
                for (std::size_t y = 0; y < d.ho; ++y) {
                  const double* irow = iplane + (y + ky) * d.w + kx;
                  const double* urow = uplane + y * d.wo;
                  for (std::size_t xx = 0; xx < d.wo; ++xx) s += urow[xx] * irow[xx];
                }
                gkc[ky * 3 + kx] += s;
              }
          }
        }
    }
    if (grads.wants(x)) {
      double* gx = grads.slot(x).data().data();
      for (std::size_t b = 0; b < d.batch; ++b)
        for (std::size_t o = 0; o < d.cout; ++o) {
          const double* uplane = upp + (b * d.cout + o) * out_plane;
          for (std::size_t c = 0; c < d.cin; ++c) {
            double* gplane = gx + (b * d.cin + c) * in_plane;
            const double* kc = kp + (o * d.cin + c) * 9;
            for (std::size_t ky = 0; ky < 3; ++ky)
              for (std::size_t kx = 0; kx < 3; ++kx) {
                const double kv = kc[ky * 3 + kx];
                for (std::size_t y = 0; y < d.ho; ++y) {
                  double* grow = gplane + (y + ky) * d.w + kx;
                  const double* urow = uplane + y * d.wo;
                  for (std::size_t xx = 0; xx < d.wo; ++xx) grow[xx] += kv * urow[xx];
                }
              }
          }
        }
    }
  };
  Tape& tape = x.tape();
  if (bias) return tape.record(std::move(out), {kernel, *bias, x}, std::move(rule));
  return tape.record(std::move(out), {kernel, x}, std::move(rule));
}

}  // namespace

Var dense(Var weight, Var bias, Var x) {
  const Tensor& W = weight.value();
  const Tensor& B = bias.value();
  const Tensor& X = x.value();
  require(W.rank() == 2, "dense weight must be a matrix, got " + to_string(W.shape()));
  const std::size_t out_dim = W.dim(0), in_dim = W.dim(1);
  require(B.rank() == 1 && B.dim(0) == out_dim,
          "dense bias " + to_string(B.shape()) + " does not match weight " + to_string(W.shape()));
  require((X.rank() == 1 && X.dim(0) == in_dim) || (X.rank() == 2 && X.dim(1) == in_dim),
          "dense input " + to_string(X.shape()) + " does not match weight " + to_string(W.shape()));
  const bool batched = X.rank() == 2;
  const std::size_t rows = batched ? X.dim(0) : 1;
  Tensor out(batched ? Shape{rows, out_dim} : Shape{out_dim});
  const double* wp = W.data().data();
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = X.data().data() + r * in_dim;
    double* yr = out.data().data() + r * out_dim;
    for (std::size_t o = 0; o < out_dim; ++o) {
      const double* wr = wp + o * in_dim;
      double s = B[o];
      for (std::size_t i = 0; i < in_dim; ++i) s += wr[i] * xr[i];
      yr[o] = s;
    }
  }
  auto rule = [weight, bias, x, rows, in_dim, out_dim](const Tensor& up, Gradients& grads) {
    const double* xp = x.value().data().data();
    const double* wp = weight.value().data().data();
    const double* upp = up.data().data();
    if (grads.wants(weight)) {
      double* gw = grads.slot(weight).data().data();
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out_dim; ++o) {
          const double u = upp[r * out_dim + o];
          if (u == 0.0) continue;
          double* gwr = gw + o * in_dim;
          const double* xr = xp + r * in_dim;
          for (std::size_t i = 0; i < in_dim; ++i) gwr[i] += u * xr[i];
        }
    }
    if (grads.wants(bias)) {
      Tensor& gb = grads.slot(bias);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t o = 0; o < out_dim; ++o) gb[o] += upp[r * out_dim + o];
    }
    if (grads.wants(x)) {
      // Row sums are formed locally and then added once, so the result does
      // not depend on what else already accumulated into x's gradient.
      double* gx = grads.slot(x).data().data();
      std::vector<double> row(in_dim);
      for (std::size_t r = 0; r < rows; ++r) {
        std::fill(row.begin(), row.end(), 0.0);
        for (std::size_t o = 0; o < out_dim; ++o) {
          const double u = upp[r * out_dim + o];
          if (u == 0.0) continue;
          const double* wr = wp + o * in_dim;
          for (std::size_t i = 0; i < in_dim; ++i) row[i] += u * wr[i];
        }
        double* gxr = gx + r * in_dim;
        for (std::size_t i = 0; i < in_dim; ++i) gxr[i] += row[i];
      }
    }
  };
  return x.tape().record(std::move(out), {weight, bias, x}, std::move(rule));
}

Var conv2d(Var kernel, Var x) { return conv2d_impl(kernel, nullptr, x); }

Var conv2d(Var kernel, Var bias, Var x) { return conv2d_impl(kernel, &bias, x); }

Var relu(Var x) {
  Tensor out = x.value();
  for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  return x.tape().record(std::move(out), {x}, [x](const Tensor& up, Gradients& grads) {
    const Tensor& in = x.value();
    Tensor& g = grads.slot(x);
    for (std::size_t i = 0; i < in.size(); ++i) {
      if (in[i] > 0.0) g[i] += up[i];
    }
  });
}

Var mean_pool2x2(Var x) {
  const Tensor& X = x.value();
  require(X.rank() >= 2, "mean_pool2x2 needs at least 2 axes");
  const std::size_t h = X.dim(X.rank() - 2), w = X.dim(X.rank() - 1);
  require(h >= 2 && w >= 2, "mean_pool2x2 needs spatial extent >= 2, got " + to_string(X.shape()));
  const std::size_t ho = h / 2, wo = w / 2;
  const std::size_t planes = X.size() / (h * w);
  Shape shape = X.shape();
  shape[shape.size() - 2] = ho;
  shape[shape.size() - 1] = wo;
  Tensor out(shape);
  for (std::size_t p = 0; p < planes; ++p) {
    const double* ip = X.data().data() + p * h * w;
    double* op = out.data().data() + p * ho * wo;
    for (std::size_t y = 0; y < ho; ++y)
      for (std::size_t xx = 0; xx < wo; ++xx) {
        const double* a = ip + 2 * y * w + 2 * xx;
        op[y * wo + xx] = 0.25 * (a[0] + a[1] + a[w] + a[w + 1]);
      }
  }
  return x.tape().record(std::move(out), {x}, [x, planes, h, w, ho, wo](const Tensor& up, Gradients& grads) {
    Tensor& g = grads.slot(x);
    for (std::size_t p = 0; p < planes; ++p) {
      double* gp = g.data().data() + p * h * w;
      const double* upp = up.data().data() + p * ho * wo;
      for (std::size_t y = 0; y < ho; ++y)
        for (std::size_t xx = 0; xx < wo; ++xx) {
          const double v = 0.25 * upp[y * wo + xx];
          double* a = gp + 2 * y * w + 2 * xx;
          a[0] += v;
          a[1] += v;
          a[w] += v;
          a[w + 1] += v;
        }
    }
  });
}

Var add(Var a, Var b) {
  require(a.shape() == b.shape(), "add shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](const Tensor& up, Gradients& grads) {
    for (Var v : {a, b}) {
      if (!grads.wants(v)) continue;
      Tensor& g = grads.slot(v);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i];
    }
  });
}

Var mul(Var a, Var b) {
  require(a.shape() == b.shape(), "mul shape mismatch " + to_string(a.shape()) + " vs " + to_string(b.shape()));
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  return a.tape().record(std::move(out), {a, b}, [a, b](const Tensor& up, Gradients& grads) {
    if (grads.wants(a)) {
      Tensor& g = grads.slot(a);
      const Tensor& other = b.value();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * other[i];
    }
    if (grads.wants(b)) {
      Tensor& g = grads.slot(b);
      const Tensor& other = a.value();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i] * other[i];
    }
  });
}

Var scale(Var x, double factor) {
  Tensor out = x.value();
  for (double& v : out.data()) v *= factor;
  return x.tape().record(std::move(out), {x}, [x, factor](const Tensor& up, Gradients& grads) {
    Tensor& g = grads.slot(x);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * up[i];
  });
}

Var sum(Var x) {
  double s = 0.0;
  for (double v : x.value().data()) s += v;
  return x.tape().record(Tensor::scalar(s), {x}, [x](const Tensor& up, Gradients& grads) {
    Tensor& g = grads.slot(x);
    const double u = up[0];
    for (double& v : g.data()) v += u;
  });
}

Var mean(Var x) {
  const std::size_t n = x.value().size();
  require(n > 0, "mean of empty tensor");
  return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var reshape(Var x, Shape shape) {
  Tensor out = x.value().reshaped(std::move(shape));
  return x.tape().record(std::move(out), {x}, [x](const Tensor& up, Gradients& grads) {
    Tensor& g = grads.slot(x);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += up[i];
  });
}

Var flatten_batch(Var x) {
  require(x.value().rank() >= 1, "flatten_batch needs a batch axis");
  const std::size_t b = x.value().dim(0);
  return reshape(x, Shape{b, b ? x.value().size() / b : 0});
}

Var pick(Var x, std::span<const std::uint32_t> index) {
  const Tensor& X = x.value();
  require(X.rank() == 2 && X.dim(0) == index.size(),
          "pick needs [B x K] and B indices, got " + to_string(X.shape()));
  const std::size_t k = X.dim(1);
  std::vector<std::uint32_t> idx(index.begin(), index.end());
  Tensor out(Shape{idx.size()});
  for (std::size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] < k, "pick index out of range");
    out[r] = X[r * k + idx[r]];
  }
  return x.tape().record(std::move(out), {x}, [x, idx = std::move(idx), k](const Tensor& up, Gradients& grads) {
    Tensor& g = grads.slot(x);
    for (std::size_t r = 0; r < idx.size(); ++r) g[r * k + idx[r]] += up[r];
  });
}

}  // namespace dg
