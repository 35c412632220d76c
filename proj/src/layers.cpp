#include "cgdetect/layers.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

namespace cgd {
namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

struct ConvGeometry {
  std::size_t channels, height, width, kernel, stride, pad, out_h, out_w;

  std::size_t rows() const { return channels * kernel * kernel; }
  std::size_t cols() const { return out_h * out_w; }
};

// Lays out every receptive field of one image as a column:
// row (c*k + ky)*k + kx, column oy*out_w + ox.
template <typename T>
void im2col(const T* img, const ConvGeometry& g, T* col) {
  const auto h = static_cast<std::ptrdiff_t>(g.height);
  const auto w = static_cast<std::ptrdiff_t>(g.width);
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto stride = static_cast<std::ptrdiff_t>(g.stride);
  const auto ow = static_cast<std::ptrdiff_t>(g.out_w);
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* src = img + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        T* row = col + ((c * g.kernel + ky) * g.kernel + kx) * g.cols();
        // valid ox satisfy 0 <= ox*stride + kx - pad < w
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kx) - pad;
        std::ptrdiff_t lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
        std::ptrdiff_t hi = w - off <= 0 ? 0 : (w - off + stride - 1) / stride;
        lo = std::min(lo, ow);
        hi = std::clamp(hi, lo, ow);
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          T* dst = row + oy * g.out_w;
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy) * stride + static_cast<std::ptrdiff_t>(ky) - pad;
          if (iy < 0 || iy >= h) {
            std::fill_n(dst, g.out_w, T{0});
            continue;
          }
          std::fill_n(dst, lo, T{0});
          const T* line = src + iy * w;
          if (stride == 1) {
            std::memcpy(dst + lo, line + lo + off, static_cast<std::size_t>(hi - lo) * sizeof(T));
          } else {
            for (std::ptrdiff_t ox = lo; ox < hi; ++ox) dst[ox] = line[ox * stride + off];
          }
          std::fill(dst + hi, dst + ow, T{0});
        }
      }
    }
  }
}

// Adjoint of im2col: scatters columns back, accumulating into img.
template <typename T>
void col2im(const T* col, const ConvGeometry& g, T* img) {
  const auto h = static_cast<std::ptrdiff_t>(g.height);
  const auto w = static_cast<std::ptrdiff_t>(g.width);
  const auto pad = static_cast<std::ptrdiff_t>(g.pad);
  const auto stride = static_cast<std::ptrdiff_t>(g.stride);
  const auto ow = static_cast<std::ptrdiff_t>(g.out_w);
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* dst = img + c * g.height * g.width;
    for (std::size_t ky = 0; ky < g.kernel; ++ky) {
      for (std::size_t kx = 0; kx < g.kernel; ++kx) {
        const T* row = col + ((c * g.kernel + ky) * g.kernel + kx) * g.cols();
        const std::ptrdiff_t off = static_cast<std::ptrdiff_t>(kx) - pad;
        std::ptrdiff_t lo = off >= 0 ? 0 : (-off + stride - 1) / stride;
        std::ptrdiff_t hi = w - off <= 0 ? 0 : (w - off + stride - 1) / stride;
        lo = std::min(lo, ow);
        hi = std::clamp(hi, lo, ow);
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::ptrdiff_t iy =
              static_cast<std::ptrdiff_t>(oy) * stride + static_cast<std::ptrdiff_t>(ky) - pad;
          if (iy < 0 || iy >= h) continue;
          const T* s = row + oy * g.out_w;
          T* line = dst + iy * w;
          for (std::ptrdiff_t ox = lo; ox < hi; ++ox) line[ox * stride + off] += s[ox];
        }
      }
    }
  }
}

template <typename T>
ConvGeometry conv_geometry(const Tensor4<T>& x, const Tensor4<T>& weight, std::size_t stride,
                           std::size_t pad) {
  if (weight.h() != weight.w()) throw ShapeError("conv2d: kernel must be square");
  if (weight.c() != x.c()) {
    throw ShapeError("conv2d: input has " + std::to_string(x.c()) + " channels, kernel expects " +
                     std::to_string(weight.c()));
  }
  if (stride == 0) throw ShapeError("conv2d: stride must be positive");
  const std::size_t k = weight.h();
  return {x.c(),
          x.h(),
          x.w(),
          k,
          stride,
          pad,
          conv_output_extent(x.h(), k, stride, pad),
          conv_output_extent(x.w(), k, stride, pad)};
}

void require_vector(const Shape4& s, std::size_t len, const char* what) {
  if (s != Shape4{len, 1, 1, 1}) {
    throw ShapeError(std::string(what) + ": expected vector of length " + std::to_string(len) +
                     ", got " + s.str());
  }
}

bool is_identity_geometry(const ConvGeometry& g) {
  return g.kernel == 1 && g.stride == 1 && g.pad == 0;
}

}  // namespace

std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t pad) {
  if (in + 2 * pad < kernel || stride == 0) {
    throw ShapeError("conv2d: non-positive output size for extent " + std::to_string(in));
  }
  return (in + 2 * pad - kernel) / stride + 1;
}

template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Tensor4<T>& weight, const Tensor4<T>& bias,
                          std::size_t stride, std::size_t pad) {
  const ConvGeometry g = conv_geometry(x, weight, stride, pad);
  const std::size_t oc = weight.n();
  require_vector(bias.shape(), oc, "conv2d bias");

  Tensor4<T> out({x.n(), oc, g.out_h, g.out_w});
  AlignedVector<T> col(is_identity_geometry(g) ? 0 : g.rows() * g.cols());
  ConstMatMap<T> wmat(weight.data(), oc, g.rows());
  for (std::size_t n = 0; n < x.n(); ++n) {
    const T* cols = x.plane(n, 0);
    if (!col.empty()) {
      im2col(x.plane(n, 0), g, col.data());
      cols = col.data();
    }
    ConstMatMap<T> cmat(cols, g.rows(), g.cols());
    MatMap<T> omat(out.plane(n, 0), oc, g.cols());
    omat.noalias() = wmat * cmat;
    for (std::size_t o = 0; o < oc; ++o) omat.row(o).array() += bias[o];
  }
  require_finite(out, "conv2d_forward");
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor4<T>& grad_out, const Tensor4<T>& x,
                               const Tensor4<T>& weight, std::size_t stride, std::size_t pad,
                               bool input_grad) {
  const ConvGeometry g = conv_geometry(x, weight, stride, pad);
  const std::size_t oc = weight.n();
  require_shape(grad_out, {x.n(), oc, g.out_h, g.out_w}, "conv2d_backward grad_out");

  Conv2dGrads<T> grads{input_grad ? Tensor4<T>(x.shape()) : Tensor4<T>(),
                       Tensor4<T>(weight.shape()), Tensor4<T>::vector(oc)};
  const bool identity = is_identity_geometry(g);
  AlignedVector<T> col(identity ? 0 : g.rows() * g.cols());
  AlignedVector<T> gcol(identity || !input_grad ? 0 : g.rows() * g.cols());
  ConstMatMap<T> wmat(weight.data(), oc, g.rows());
  MatMap<T> gw(grads.weight.data(), oc, g.rows());

  for (std::size_t n = 0; n < x.n(); ++n) {
    const T* cols = x.plane(n, 0);
    if (!identity) {
      im2col(x.plane(n, 0), g, col.data());
      cols = col.data();
    }
    ConstMatMap<T> cmat(cols, g.rows(), g.cols());
    ConstMatMap<T> go(grad_out.plane(n, 0), oc, g.cols());
    gw.noalias() += go * cmat.transpose();
    for (std::size_t o = 0; o < oc; ++o) grads.bias[o] += go.row(o).sum();
    if (input_grad) {
      if (identity) {
        MatMap<T> gx(grads.x.plane(n, 0), g.rows(), g.cols());
        gx.noalias() = wmat.transpose() * go;
      } else {
        MatMap<T> gc(gcol.data(), g.rows(), g.cols());
        gc.noalias() = wmat.transpose() * go;
        col2im(gcol.data(), g, grads.x.plane(n, 0));
      }
    }
  }
  if (input_grad) require_finite(grads.x, "conv2d_backward");
  require_finite(grads.weight, "conv2d_backward");
  return grads;
}

template <typename T>
Tensor4<T> batchnorm2d_forward(const Tensor4<T>& x, const Tensor4<T>& gamma,
                               const Tensor4<T>& beta, Tensor4<T>& running_mean,
                               Tensor4<T>& running_var, Mode mode, const BatchNormOptions& opt,
                               BatchNormCache<T>* cache) {
  const std::size_t channels = x.c();
  require_vector(gamma.shape(), channels, "batchnorm gamma");
  require_vector(beta.shape(), channels, "batchnorm beta");
  if (mode == Mode::eval) {
    return batchnorm2d_inference(x, gamma, beta, running_mean, running_var, opt.eps);
  }

  const std::size_t plane = x.shape().plane();
  const std::size_t count = x.n() * plane;
  if (count < 2) throw ShapeError("batchnorm2d: train mode needs at least 2 values per channel");
  if (running_mean.empty()) running_mean = Tensor4<T>::vector(channels, T{0});
  if (running_var.empty()) running_var = Tensor4<T>::vector(channels, T{1});
  require_vector(running_mean.shape(), channels, "batchnorm running_mean");
  require_vector(running_var.shape(), channels, "batchnorm running_var");

  Tensor4<T> y(x.shape());
  Tensor4<T> x_hat(x.shape());
  std::vector<T> inv_std(channels);
  for (std::size_t c = 0; c < channels; ++c) {
    double sum = 0.0;
    for (std::size_t n = 0; n < x.n(); ++n) {
      const T* p = x.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) sum += p[i];
    }
    const double mean = sum / static_cast<double>(count);
    double sq = 0.0;
    for (std::size_t n = 0; n < x.n(); ++n) {
      const T* p = x.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        const double d = p[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / static_cast<double>(count);
    const double istd = 1.0 / std::sqrt(var + opt.eps);
    inv_std[c] = static_cast<T>(istd);
    for (std::size_t n = 0; n < x.n(); ++n) {
      const T* p = x.plane(n, c);
      T* xh = x_hat.plane(n, c);
      T* out = y.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        xh[i] = static_cast<T>((p[i] - mean) * istd);
        out[i] = gamma[c] * xh[i] + beta[c];
      }
    }
    const double unbiased = sq / static_cast<double>(count - 1);
    running_mean[c] = static_cast<T>((1.0 - opt.momentum) * running_mean[c] + opt.momentum * mean);
    running_var[c] =
        static_cast<T>((1.0 - opt.momentum) * running_var[c] + opt.momentum * unbiased);
  }
  require_finite(y, "batchnorm2d_forward");
  if (cache != nullptr) {
    cache->x_hat = std::move(x_hat);
    cache->inv_std = std::move(inv_std);
  }
  return y;
}

template <typename T>
Tensor4<T> batchnorm2d_inference(const Tensor4<T>& x, const Tensor4<T>& gamma,
                                 const Tensor4<T>& beta, const Tensor4<T>& running_mean,
                                 const Tensor4<T>& running_var, double eps) {
  const std::size_t channels = x.c();
  if (running_mean.empty() || running_var.empty()) {
    throw ShapeError("batchnorm2d: eval mode with uninitialized running statistics");
  }
  require_vector(gamma.shape(), channels, "batchnorm gamma");
  require_vector(beta.shape(), channels, "batchnorm beta");
  require_vector(running_mean.shape(), channels, "batchnorm running_mean");
  require_vector(running_var.shape(), channels, "batchnorm running_var");
  Tensor4<T> y(x.shape());
  const std::size_t plane = x.shape().plane();
  for (std::size_t c = 0; c < channels; ++c) {
    const double istd = 1.0 / std::sqrt(static_cast<double>(running_var[c]) + eps);
    const T scale = static_cast<T>(gamma[c] * istd);
    const T shift = static_cast<T>(beta[c] - running_mean[c] * gamma[c] * istd);
    for (std::size_t n = 0; n < x.n(); ++n) {
      const T* p = x.plane(n, c);
      T* out = y.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) out[i] = p[i] * scale + shift;
    }
  }
  require_finite(y, "batchnorm2d_inference");
  return y;
}

template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const Tensor4<T>& grad_out, const Tensor4<T>& gamma,
                                       const BatchNormCache<T>& cache) {
  if (cache.x_hat.empty()) throw ShapeError("batchnorm2d_backward: missing forward cache");
  require_shape(grad_out, cache.x_hat.shape(), "batchnorm2d_backward grad_out");
  const std::size_t channels = grad_out.c();
  require_vector(gamma.shape(), channels, "batchnorm gamma");
  const std::size_t plane = grad_out.shape().plane();
  const double count = static_cast<double>(grad_out.n() * plane);

  BatchNormGrads<T> g{Tensor4<T>(grad_out.shape()), Tensor4<T>::vector(channels),
                      Tensor4<T>::vector(channels)};
  for (std::size_t c = 0; c < channels; ++c) {
    double sum_dy = 0.0;
    double sum_dy_xhat = 0.0;
    for (std::size_t n = 0; n < grad_out.n(); ++n) {
      const T* dy = grad_out.plane(n, c);
      const T* xh = cache.x_hat.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        sum_dy += dy[i];
        sum_dy_xhat += static_cast<double>(dy[i]) * xh[i];
      }
    }
    g.beta[c] = static_cast<T>(sum_dy);
    g.gamma[c] = static_cast<T>(sum_dy_xhat);
    const double k = gamma[c] * static_cast<double>(cache.inv_std[c]) / count;
    for (std::size_t n = 0; n < grad_out.n(); ++n) {
      const T* dy = grad_out.plane(n, c);
      const T* xh = cache.x_hat.plane(n, c);
      T* dx = g.x.plane(n, c);
      for (std::size_t i = 0; i < plane; ++i) {
        dx[i] = static_cast<T>(k * (count * dy[i] - sum_dy - xh[i] * sum_dy_xhat));
      }
    }
  }
  require_finite(g.x, "batchnorm2d_backward");
  return g;
}

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x) {
  Tensor4<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > T{0} ? x[i] : T{0};
  require_finite(y, "relu_forward");
  return y;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& grad_out, const Tensor4<T>& x) {
  require_shape(grad_out, x.shape(), "relu_backward grad_out");
  Tensor4<T> g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > T{0} ? grad_out[i] : T{0};
  return g;
}

template <typename T>
Tensor4<T> linear_forward(const Tensor4<T>& x, const Tensor4<T>& weight, const Tensor4<T>& bias) {
  if (x.h() != 1 || x.w() != 1) throw ShapeError("linear: input must be (n, f, 1, 1)");
  if (weight.h() != 1 || weight.w() != 1 || weight.c() != x.c()) {
    throw ShapeError("linear: weight " + weight.shape().str() + " does not match input " +
                     x.shape().str());
  }
  const std::size_t out_f = weight.n();
  require_vector(bias.shape(), out_f, "linear bias");
  Tensor4<T> y({x.n(), out_f, 1, 1});
  ConstMatMap<T> xm(x.data(), x.n(), x.c());
  ConstMatMap<T> wm(weight.data(), out_f, x.c());
  MatMap<T> ym(y.data(), x.n(), out_f);
  ym.noalias() = xm * wm.transpose();
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t o = 0; o < out_f; ++o) ym(n, o) += bias[o];
  }
  require_finite(y, "linear_forward");
  return y;
}

template <typename T>
LinearGrads<T> linear_backward(const Tensor4<T>& grad_out, const Tensor4<T>& x,
                               const Tensor4<T>& weight) {
  const std::size_t out_f = weight.n();
  if (weight.c() != x.c()) throw ShapeError("linear_backward: weight does not match input");
  require_shape(grad_out, {x.n(), out_f, 1, 1}, "linear_backward grad_out");
  LinearGrads<T> g{Tensor4<T>(x.shape()), Tensor4<T>(weight.shape()),
                   Tensor4<T>::vector(out_f)};
  ConstMatMap<T> go(grad_out.data(), x.n(), out_f);
  ConstMatMap<T> xm(x.data(), x.n(), x.c());
  ConstMatMap<T> wm(weight.data(), out_f, x.c());
  MatMap<T>(g.x.data(), x.n(), x.c()).noalias() = go * wm;
  MatMap<T>(g.weight.data(), out_f, x.c()).noalias() = go.transpose() * xm;
  for (std::size_t o = 0; o < out_f; ++o) g.bias[o] = go.col(o).sum();
  require_finite(g.x, "linear_backward");
  require_finite(g.weight, "linear_backward");
  return g;
}

template <typename T>
Tensor4<T> global_avg_pool_forward(const Tensor4<T>& x) {
  const std::size_t plane = x.shape().plane();
  if (plane == 0) throw ShapeError("global_avg_pool: empty spatial extent");
  Tensor4<T> y({x.n(), x.c(), 1, 1});
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t c = 0; c < x.c(); ++c) {
      const T* p = x.plane(n, c);
      double sum = 0.0;
      for (std::size_t i = 0; i < plane; ++i) sum += p[i];
      y(n, c, 0, 0) = static_cast<T>(sum / static_cast<double>(plane));
    }
  }
  require_finite(y, "global_avg_pool_forward");
  return y;
}

template <typename T>
Tensor4<T> global_avg_pool_backward(const Tensor4<T>& grad_out, const Shape4& input_shape) {
  require_shape(grad_out, {input_shape.n, input_shape.c, 1, 1}, "global_avg_pool_backward");
  Tensor4<T> g(input_shape);
  const std::size_t plane = input_shape.plane();
  const T inv = static_cast<T>(1.0 / static_cast<double>(plane));
  for (std::size_t n = 0; n < input_shape.n; ++n) {
    for (std::size_t c = 0; c < input_shape.c; ++c) {
      std::fill_n(g.plane(n, c), plane, grad_out(n, c, 0, 0) * inv);
    }
  }
  return g;
}

namespace {

void require_poolable(const Shape4& s, std::size_t kernel, const char* what) {
  if (kernel == 0 || s.h % kernel != 0 || s.w % kernel != 0 || s.h == 0 || s.w == 0) {
    throw ShapeError(std::string(what) + ": spatial dims of " + s.str() +
                     " not divisible by window " + std::to_string(kernel));
  }
}

}  // namespace

template <typename T>
Tensor4<T> maxpool_forward(const Tensor4<T>& x, std::size_t kernel) {
  require_poolable(x.shape(), kernel, "maxpool");
  const std::size_t oh = x.h() / kernel;
  const std::size_t ow = x.w() / kernel;
  Tensor4<T> y({x.n(), x.c(), oh, ow});
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t c = 0; c < x.c(); ++c) {
      const T* p = x.plane(n, c);
      T* out = y.plane(n, c);
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          T best = p[oy * kernel * x.w() + ox * kernel];
          for (std::size_t ky = 0; ky < kernel; ++ky) {
            for (std::size_t kx = 0; kx < kernel; ++kx) {
              best = std::max(best, p[(oy * kernel + ky) * x.w() + ox * kernel + kx]);
            }
          }
          out[oy * ow + ox] = best;
        }
      }
    }
  }
  require_finite(y, "maxpool_forward");
  return y;
}

template <typename T>
Tensor4<T> maxpool_backward(const Tensor4<T>& grad_out, const Tensor4<T>& x, std::size_t kernel) {
  require_poolable(x.shape(), kernel, "maxpool_backward");
  const std::size_t oh = x.h() / kernel;
  const std::size_t ow = x.w() / kernel;
  require_shape(grad_out, {x.n(), x.c(), oh, ow}, "maxpool_backward grad_out");
  Tensor4<T> g(x.shape());
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t c = 0; c < x.c(); ++c) {
      const T* p = x.plane(n, c);
      T* gp = g.plane(n, c);
      const T* go = grad_out.plane(n, c);
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          std::size_t arg = oy * kernel * x.w() + ox * kernel;
          for (std::size_t ky = 0; ky < kernel; ++ky) {
            for (std::size_t kx = 0; kx < kernel; ++kx) {
              const std::size_t idx = (oy * kernel + ky) * x.w() + ox * kernel + kx;
              if (p[idx] > p[arg]) arg = idx;
            }
          }
          gp[arg] += go[oy * ow + ox];
        }
      }
    }
  }
  return g;
}

template <typename T>
Tensor4<T> softmax(const Tensor4<T>& logits) {
  if (logits.h() != 1 || logits.w() != 1) throw ShapeError("softmax: logits must be (n, k, 1, 1)");
  Tensor4<T> p(logits.shape());
  const std::size_t k = logits.c();
  for (std::size_t n = 0; n < logits.n(); ++n) {
    const T* z = logits.plane(n, 0);
    const double zmax = *std::max_element(z, z + k);
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(z[j] - zmax);
    for (std::size_t j = 0; j < k; ++j) p(n, j, 0, 0) = static_cast<T>(std::exp(z[j] - zmax) / denom);
  }
  return p;
}

template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor4<T>& logits, std::span<const int> labels) {
  if (logits.h() != 1 || logits.w() != 1) {
    throw ShapeError("softmax_cross_entropy: logits must be (n, k, 1, 1)");
  }
  if (labels.size() != logits.n() || logits.n() == 0) {
    throw ShapeError("softmax_cross_entropy: label count does not match batch");
  }
  require_finite(logits, "softmax_cross_entropy logits");
  const std::size_t k = logits.c();
  const double inv_n = 1.0 / static_cast<double>(logits.n());
  LossResult<T> r{0.0, Tensor4<T>(logits.shape())};
  for (std::size_t n = 0; n < logits.n(); ++n) {
    const int label = labels[n];
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw ShapeError("softmax_cross_entropy: label " + std::to_string(label) + " out of range");
    }
    const T* z = logits.plane(n, 0);
    const double zmax = *std::max_element(z, z + k);
    double denom = 0.0;
    for (std::size_t j = 0; j < k; ++j) denom += std::exp(z[j] - zmax);
    const double log_denom = std::log(denom);
    r.loss += (log_denom - (z[label] - zmax)) * inv_n;
    for (std::size_t j = 0; j < k; ++j) {
      const double prob = std::exp(z[j] - zmax - log_denom);
      const double onehot = static_cast<std::size_t>(label) == j ? 1.0 : 0.0;
      r.grad_logits(n, j, 0, 0) = static_cast<T>((prob - onehot) * inv_n);
    }
  }
  if (!std::isfinite(r.loss)) throw NumericError("softmax_cross_entropy: non-finite loss");
  return r;
}

#define CGD_INSTANTIATE_LAYERS(T)                                                                 \
  template Tensor4<T> conv2d_forward(const Tensor4<T>&, const Tensor4<T>&, const Tensor4<T>&,     \
                                     std::size_t, std::size_t);                                   \
  template Conv2dGrads<T> conv2d_backward(const Tensor4<T>&, const Tensor4<T>&,                   \
                                          const Tensor4<T>&, std::size_t, std::size_t, bool);     \
  template Tensor4<T> batchnorm2d_forward(const Tensor4<T>&, const Tensor4<T>&,                   \
                                          const Tensor4<T>&, Tensor4<T>&, Tensor4<T>&, Mode,      \
                                          const BatchNormOptions&, BatchNormCache<T>*);           \
  template Tensor4<T> batchnorm2d_inference(const Tensor4<T>&, const Tensor4<T>&,                 \
                                            const Tensor4<T>&, const Tensor4<T>&,                 \
                                            const Tensor4<T>&, double);                           \
  template BatchNormGrads<T> batchnorm2d_backward(const Tensor4<T>&, const Tensor4<T>&,           \
                                                  const BatchNormCache<T>&);                      \
  template Tensor4<T> relu_forward(const Tensor4<T>&);                                            \
  template Tensor4<T> relu_backward(const Tensor4<T>&, const Tensor4<T>&);                        \
  template Tensor4<T> linear_forward(const Tensor4<T>&, const Tensor4<T>&, const Tensor4<T>&);    \
  template LinearGrads<T> linear_backward(const Tensor4<T>&, const Tensor4<T>&,                   \
                                          const Tensor4<T>&);                                     \
  template Tensor4<T> global_avg_pool_forward(const Tensor4<T>&);                                 \
  template Tensor4<T> global_avg_pool_backward(const Tensor4<T>&, const Shape4&);                 \
  template Tensor4<T> maxpool_forward(const Tensor4<T>&, std::size_t);                            \
  template Tensor4<T> maxpool_backward(const Tensor4<T>&, const Tensor4<T>&, std::size_t);        \
  template Tensor4<T> softmax(const Tensor4<T>&);                                                 \
  template LossResult<T> softmax_cross_entropy(const Tensor4<T>&, std::span<const int>);

CGD_INSTANTIATE_LAYERS(float)
CGD_INSTANTIATE_LAYERS(double)

}  // namespace cgd
