#include "shadowae/ops.hpp"

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "shadowae/kernels.hpp"

namespace shadowae {

std::string shape_str(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += "x";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

void require_same_shape(const Shape& a, const Shape& b, const char* what) {
  if (a != b) {
    throw std::invalid_argument(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " +
                                shape_str(b));
  }
}

template <typename T>
bool Tensor<T>::all_finite() const {
  for (T v : data_)
    if (!std::isfinite(v)) return false;
  if (grad_)
    for (T v : *grad_)
      if (!std::isfinite(v)) return false;
  return true;
}
template class Tensor<float>;
template class Tensor<double>;

std::size_t conv_out_extent(std::size_t in, std::size_t kernel, ConvGeometry g) {
  if (kernel == 0 || g.stride == 0) {
    throw std::invalid_argument("conv2d: kernel extent and stride must be >= 1");
  }
  const std::size_t padded = in + 2 * g.padding;
  if (padded < kernel) {
    throw std::invalid_argument("conv2d: kernel " + std::to_string(kernel) +
                                " larger than padded input " + std::to_string(padded));
  }
  if ((padded - kernel) % g.stride != 0) {
    throw std::invalid_argument("conv2d: output extent (" + std::to_string(in) + " + 2*" +
                                std::to_string(g.padding) + " - " + std::to_string(kernel) +
                                ")/" + std::to_string(g.stride) + " + 1 is not an integer");
  }
  return (padded - kernel) / g.stride + 1;
}

std::size_t deconv_out_extent(std::size_t in, std::size_t kernel, ConvGeometry g) {
  if (kernel == 0 || g.stride == 0 || in == 0) {
    throw std::invalid_argument("deconv2d: kernel, stride and input extents must be >= 1");
  }
  const std::size_t grown = (in - 1) * g.stride + kernel;
  if (grown <= 2 * g.padding) {
    throw std::invalid_argument("deconv2d: output extent (" + std::to_string(in) + " - 1)*" +
                                std::to_string(g.stride) + " - 2*" + std::to_string(g.padding) +
                                " + " + std::to_string(kernel) + " is not positive");
  }
  return grown - 2 * g.padding;
}

namespace detail {

template <typename T>
void im2col(const T* image, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kh, std::size_t kw, ConvGeometry geom, std::size_t out_h,
            std::size_t out_w, T* columns) {
  const auto pad = static_cast<std::ptrdiff_t>(geom.padding);
  const auto stride = static_cast<std::ptrdiff_t>(geom.stride);
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    const T* plane = image + c * height * width;
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        T* row = columns + ((c * kh + ki) * kw + kj) * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad +
                                    static_cast<std::ptrdiff_t>(ki);
          T* dst = row + oy * out_w;
          if (iy < 0 || iy >= h) {
            std::fill_n(dst, out_w, T{0});
            continue;
          }
          const T* src = plane + iy * w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * stride - pad +
                                      static_cast<std::ptrdiff_t>(kj);
            dst[ox] = (ix < 0 || ix >= w) ? T{0} : src[ix];
          }
        }
      }
    }
  }
}

template <typename T>
void col2im(const T* columns, std::size_t channels, std::size_t height, std::size_t width,
            std::size_t kh, std::size_t kw, ConvGeometry geom, std::size_t out_h,
            std::size_t out_w, T* image) {
  const auto pad = static_cast<std::ptrdiff_t>(geom.padding);
  const auto stride = static_cast<std::ptrdiff_t>(geom.stride);
  const auto h = static_cast<std::ptrdiff_t>(height);
  const auto w = static_cast<std::ptrdiff_t>(width);
  for (std::size_t c = 0; c < channels; ++c) {
    T* plane = image + c * height * width;
    for (std::size_t ki = 0; ki < kh; ++ki) {
      for (std::size_t kj = 0; kj < kw; ++kj) {
        const T* row = columns + ((c * kh + ki) * kw + kj) * out_h * out_w;
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy) * stride - pad +
                                    static_cast<std::ptrdiff_t>(ki);
          if (iy < 0 || iy >= h) continue;
          const T* src = row + oy * out_w;
          T* dst = plane + iy * w;
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox) * stride - pad +
                                      static_cast<std::ptrdiff_t>(kj);
            if (ix >= 0 && ix < w) dst[ix] += src[ox];
          }
        }
      }
    }
  }
}

template void im2col<float>(const float*, std::size_t, std::size_t, std::size_t, std::size_t,
                            std::size_t, ConvGeometry, std::size_t, std::size_t, float*);
template void im2col<double>(const double*, std::size_t, std::size_t, std::size_t, std::size_t,
                             std::size_t, ConvGeometry, std::size_t, std::size_t, double*);
template void col2im<float>(const float*, std::size_t, std::size_t, std::size_t, std::size_t,
                            std::size_t, ConvGeometry, std::size_t, std::size_t, float*);
template void col2im<double>(const double*, std::size_t, std::size_t, std::size_t, std::size_t,
                             std::size_t, ConvGeometry, std::size_t, std::size_t, double*);

}  // namespace detail

namespace {

template <typename T>
std::vector<T>& scratch(int slot) {
  thread_local std::vector<T> bufs[2];
  return bufs[slot];
}

void require_rank(const Shape& s, std::size_t rank, const char* op, const char* what) {
  if (s.size() != rank) {
    throw std::invalid_argument(std::string(op) + ": " + what + " must have rank " +
                                std::to_string(rank) + ", got " + shape_str(s));
  }
}

// Spatial layout shared by conv2d and deconv2d: the "image" side is the
// larger tensor that the kernel window slides over.
struct ConvPlan {
  std::size_t batch, img_c, img_h, img_w;  // tensor the window slides over
  std::size_t col_c, col_h, col_w;         // the other side (one value per window)
  std::size_t kh, kw;
  ConvGeometry geom;
  std::size_t patch() const { return img_c * kh * kw; }
  std::size_t windows() const { return col_h * col_w; }
};

}  // namespace

template <typename T>
Var conv2d(Graph<T>& g, Var input, Var weight, Var bias, ConvGeometry geom) {
  const Shape& xs = g.shape(input);
  const Shape& ws = g.shape(weight);
  const Shape& bs = g.shape(bias);
  require_rank(xs, 4, "conv2d", "input");
  require_rank(ws, 4, "conv2d", "weight");
  require_rank(bs, 1, "conv2d", "bias");
  if (ws[1] != xs[1]) {
    throw std::invalid_argument("conv2d: input has " + std::to_string(xs[1]) +
                                " channels but weight expects " + std::to_string(ws[1]) +
                                " (weight " + shape_str(ws) + ")");
  }
  if (bs[0] != ws[0]) {
    throw std::invalid_argument("conv2d: bias length " + std::to_string(bs[0]) +
                                " does not match " + std::to_string(ws[0]) + " output channels");
  }
  const ConvPlan plan{xs[0],
                      xs[1],
                      xs[2],
                      xs[3],
                      ws[0],
                      conv_out_extent(xs[2], ws[2], geom),
                      conv_out_extent(xs[3], ws[3], geom),
                      ws[2],
                      ws[3],
                      geom};

  const std::size_t patch = plan.patch(), win = plan.windows();
  const std::size_t img_sz = plan.img_c * plan.img_h * plan.img_w;
  const std::size_t out_sz = plan.col_c * win;
  Tensor<T> out(Shape{plan.batch, plan.col_c, plan.col_h, plan.col_w});
  {
    const auto& x = g.value(input).storage();
    const auto& w = g.value(weight).storage();
    const auto& b = g.value(bias).storage();
    auto& col = scratch<T>(0);
    col.resize(patch * win);
    for (std::size_t n = 0; n < plan.batch; ++n) {
      detail::im2col(x.data() + n * img_sz, plan.img_c, plan.img_h, plan.img_w, plan.kh, plan.kw,
                     geom, plan.col_h, plan.col_w, col.data());
      T* o = out.storage().data() + n * out_sz;
      kernels::gemm({false, false, plan.col_c, win, patch, patch, win, win, false}, w.data(),
                    col.data(), o);
      for (std::size_t k = 0; k < plan.col_c; ++k)
        for (std::size_t i = 0; i < win; ++i) o[k * win + i] += b[k];
    }
  }

  return g.record(std::move(out), {input, weight, bias},
                  [=](Graph<T>& gr, std::size_t self) {
                    const auto gout = gr.out_grad(self);
                    const auto& x = gr.value(input).storage();
                    const auto& w = gr.value(weight).storage();
                    auto& col = scratch<T>(0);
                    auto& dcol = scratch<T>(1);
                    col.resize(patch * win);
                    dcol.resize(patch * win);
                    if (gr.requires_grad(bias)) {
                      auto db = gr.grad_buffer(bias);
                      for (std::size_t n = 0; n < plan.batch; ++n)
                        for (std::size_t k = 0; k < plan.col_c; ++k) {
                          double acc = 0.0;
                          const T* go = gout.data() + n * out_sz + k * win;
                          for (std::size_t i = 0; i < win; ++i) acc += go[i];
                          db[k] += static_cast<T>(acc);
                        }
                    }
                    const bool need_w = gr.requires_grad(weight);
                    const bool need_x = gr.requires_grad(input);
                    for (std::size_t n = 0; n < plan.batch; ++n) {
                      const T* go = gout.data() + n * out_sz;
                      if (need_w) {
                        detail::im2col(x.data() + n * img_sz, plan.img_c, plan.img_h, plan.img_w,
                                       plan.kh, plan.kw, geom, plan.col_h, plan.col_w,
                                       col.data());
                        kernels::gemm({false, true, plan.col_c, patch, win, win, win, patch, true},
                                      go, col.data(), gr.grad_buffer(weight).data());
                      }
                      if (need_x) {
                        kernels::gemm({true, false, patch, win, plan.col_c, patch, win, win, false},
                                      w.data(), go, dcol.data());
                        detail::col2im(dcol.data(), plan.img_c, plan.img_h, plan.img_w, plan.kh,
                                       plan.kw, geom, plan.col_h, plan.col_w,
                                       gr.grad_buffer(input).data() + n * img_sz);
                      }
                    }
                  });
}

template <typename T>
Var deconv2d(Graph<T>& g, Var input, Var weight, Var bias, ConvGeometry geom) {
  const Shape& xs = g.shape(input);
  const Shape& ws = g.shape(weight);
  const Shape& bs = g.shape(bias);
  require_rank(xs, 4, "deconv2d", "input");
  require_rank(ws, 4, "deconv2d", "weight");
  require_rank(bs, 1, "deconv2d", "bias");
  if (ws[0] != xs[1]) {
    throw std::invalid_argument("deconv2d: input has " + std::to_string(xs[1]) +
                                " channels but weight expects " + std::to_string(ws[0]) +
                                " (weight " + shape_str(ws) + ")");
  }
  if (bs[0] != ws[1]) {
    throw std::invalid_argument("deconv2d: bias length " + std::to_string(bs[0]) +
                                " does not match " + std::to_string(ws[1]) + " output channels");
  }
  const std::size_t out_h = deconv_out_extent(xs[2], ws[2], geom);
  const std::size_t out_w = deconv_out_extent(xs[3], ws[3], geom);
  // The output is the "image" side of the equivalent convolution.
  const ConvPlan plan{xs[0], ws[1], out_h, out_w, xs[1], xs[2], xs[3], ws[2], ws[3], geom};

  const std::size_t patch = plan.patch(), win = plan.windows();
  const std::size_t img_sz = plan.img_c * plan.img_h * plan.img_w;
  const std::size_t in_sz = plan.col_c * win;
  Tensor<T> out(Shape{plan.batch, plan.img_c, out_h, out_w});
  {
    const auto& x = g.value(input).storage();
    const auto& w = g.value(weight).storage();
    const auto& b = g.value(bias).storage();
    auto& col = scratch<T>(0);
    col.resize(patch * win);
    for (std::size_t n = 0; n < plan.batch; ++n) {
      // col[patch x win] = W^T [patch x C] * x_n [C x win]
      kernels::gemm({true, false, patch, win, plan.col_c, patch, win, win, false}, w.data(),
                    x.data() + n * in_sz, col.data());
      T* o = out.storage().data() + n * img_sz;
      detail::col2im(col.data(), plan.img_c, plan.img_h, plan.img_w, plan.kh, plan.kw, geom,
                     plan.col_h, plan.col_w, o);
      const std::size_t plane = plan.img_h * plan.img_w;
      for (std::size_t k = 0; k < plan.img_c; ++k)
        for (std::size_t i = 0; i < plane; ++i) o[k * plane + i] += b[k];
    }
  }

  return g.record(std::move(out), {input, weight, bias},
                  [=](Graph<T>& gr, std::size_t self) {
                    const auto gout = gr.out_grad(self);
                    const auto& x = gr.value(input).storage();
                    const auto& w = gr.value(weight).storage();
                    const std::size_t plane = plan.img_h * plan.img_w;
                    if (gr.requires_grad(bias)) {
                      auto db = gr.grad_buffer(bias);
                      for (std::size_t n = 0; n < plan.batch; ++n)
                        for (std::size_t k = 0; k < plan.img_c; ++k) {
                          double acc = 0.0;
                          const T* go = gout.data() + n * img_sz + k * plane;
                          for (std::size_t i = 0; i < plane; ++i) acc += go[i];
                          db[k] += static_cast<T>(acc);
                        }
                    }
                    const bool need_w = gr.requires_grad(weight);
                    const bool need_x = gr.requires_grad(input);
                    if (!need_w && !need_x) return;
                    auto& gcol = scratch<T>(1);
                    gcol.resize(patch * win);
                    for (std::size_t n = 0; n < plan.batch; ++n) {
                      detail::im2col(gout.data() + n * img_sz, plan.img_c, plan.img_h, plan.img_w,
                                     plan.kh, plan.kw, geom, plan.col_h, plan.col_w, gcol.data());
                      if (need_x) {
                        // gx_n [C x win] += W [C x patch] * gcol [patch x win]
                        kernels::gemm({false, false, plan.col_c, win, patch, patch, win, win, true},
                                      w.data(), gcol.data(),
                                      gr.grad_buffer(input).data() + n * in_sz);
                      }
                      if (need_w) {
                        // gW [C x patch] += x_n [C x win] * gcol^T
                        kernels::gemm({false, true, plan.col_c, patch, win, win, win, patch, true},
                                      x.data() + n * in_sz, gcol.data(),
                                      gr.grad_buffer(weight).data());
                      }
                    }
                  });
}

template <typename T>
T stable_sigmoid(T v) {
  T y;
  if (v >= T{0}) {
    y = T{1} / (T{1} + std::exp(-v));
  } else {
    const T e = std::exp(v);
    y = e / (T{1} + e);
  }
  // Rounding can reach the closed endpoints; keep the open range.
  constexpr T lo = std::numeric_limits<T>::min();
  const T hi = std::nextafter(T{1}, T{0});
  return std::min(std::max(y, lo), hi);
}

template <typename T>
Var sigmoid(Graph<T>& g, Var input) {
  const auto& x = g.value(input);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = stable_sigmoid(x[i]);
  return g.record(std::move(out), {input}, [=](Graph<T>& gr, std::size_t self) {
    const auto gout = gr.out_grad(self);
    const auto& y = gr.value(Var{self});
    auto gin = gr.grad_buffer(input);
    for (std::size_t i = 0; i < y.size(); ++i) gin[i] += gout[i] * y[i] * (T{1} - y[i]);
  });
}

template <typename T>
Var hadamard(Graph<T>& g, Var a, Var b) {
  const auto& av = g.value(a);
  const auto& bv = g.value(b);
  require_same_shape(av.shape(), bv.shape(), "hadamard");
  Tensor<T> out(av.shape());
  kernels::mul(av.size(), av.storage().data(), bv.storage().data(), out.storage().data());
  return g.record(std::move(out), {a, b}, [=](Graph<T>& gr, std::size_t self) {
    const auto gout = gr.out_grad(self);
    const std::size_t n = gout.size();
    std::vector<T> tmp(n);
    if (gr.requires_grad(a)) {
      kernels::mul(n, gout.data(), gr.value(b).storage().data(), tmp.data());
      kernels::axpy(n, T{1}, tmp.data(), gr.grad_buffer(a).data());
    }
    if (gr.requires_grad(b)) {
      kernels::mul(n, gout.data(), gr.value(a).storage().data(), tmp.data());
      kernels::axpy(n, T{1}, tmp.data(), gr.grad_buffer(b).data());
    }
  });
}

template <typename T>
Var leaky_relu(Graph<T>& g, Var input, T slope) {
  if (!(slope >= T{0} && slope < T{1})) {
    throw std::invalid_argument("leaky_relu: slope must lie in [0, 1)");
  }
  const auto& x = g.value(input);
  Tensor<T> out(x.shape());
  kernels::leaky_relu(x.size(), slope, x.storage().data(), out.storage().data());
  return g.record(std::move(out), {input}, [=](Graph<T>& gr, std::size_t self) {
    const auto gout = gr.out_grad(self);
    kernels::leaky_relu_backward(gout.size(), slope, gr.value(input).storage().data(),
                                 gout.data(), gr.grad_buffer(input).data());
  });
}

template <typename T>
Var sum(Graph<T>& g, Var input) {
  double acc = 0.0;
  for (T v : g.value(input).storage()) acc += static_cast<double>(v);
  return g.record(Tensor<T>::scalar(static_cast<T>(acc)), {input},
                  [=](Graph<T>& gr, std::size_t self) {
                    const T go = gr.out_grad(self)[0];
                    for (T& v : gr.grad_buffer(input)) v += go;
                  });
}

template <typename T>
Var weighted_sum(Graph<T>& g, std::span<const Var> terms, std::span<const double> weights) {
  if (terms.size() != weights.size() || terms.empty()) {
    throw std::invalid_argument("weighted_sum: need one weight per term and at least one term");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    const auto& t = g.value(terms[i]);
    if (t.size() != 1) throw std::invalid_argument("weighted_sum: terms must be scalars");
    acc += weights[i] * static_cast<double>(t[0]);
  }
  std::vector<Var> ts(terms.begin(), terms.end());
  std::vector<double> ws(weights.begin(), weights.end());
  auto adjoint = [ts, ws](Graph<T>& gr, std::size_t self) {
    const T go = gr.out_grad(self)[0];
    for (std::size_t i = 0; i < ts.size(); ++i) {
      if (!gr.requires_grad(ts[i])) continue;
      gr.grad_buffer(ts[i])[0] += static_cast<T>(ws[i] * static_cast<double>(go));
    }
  };
  return g.record(Tensor<T>::scalar(static_cast<T>(acc)), std::span<const Var>(ts), adjoint);
}

#define SHADOWAE_INSTANTIATE(T)                                                    \
  template Var conv2d<T>(Graph<T>&, Var, Var, Var, ConvGeometry);                  \
  template Var deconv2d<T>(Graph<T>&, Var, Var, Var, ConvGeometry);                \
  template Var sigmoid<T>(Graph<T>&, Var);                                         \
  template Var hadamard<T>(Graph<T>&, Var, Var);                                   \
  template Var leaky_relu<T>(Graph<T>&, Var, T);                                   \
  template Var sum<T>(Graph<T>&, Var);                                             \
  template Var weighted_sum<T>(Graph<T>&, std::span<const Var>, std::span<const double>); \
  template T stable_sigmoid<T>(T);

SHADOWAE_INSTANTIATE(float)
SHADOWAE_INSTANTIATE(double)

}  // namespace shadowae
