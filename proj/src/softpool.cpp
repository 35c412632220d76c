#include "cgdetect/softpool.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

namespace cgd {
namespace {

Shape4 pooled_shape(const Shape4& in, const SoftPoolConfig& cfg) {
  if (cfg.kernel_h == 0 || cfg.kernel_w == 0 || cfg.kernel_h != cfg.stride_h ||
      cfg.kernel_w != cfg.stride_w) {
    throw ShapeError("softpool: windows must be non-empty and non-overlapping");
  }
  if (in.h == 0 || in.w == 0 || in.h % cfg.stride_h != 0 || in.w % cfg.stride_w != 0) {
    throw ShapeError("softpool: spatial dims of " + in.str() + " not divisible by stride");
  }
  return {in.n, in.c, in.h / cfg.stride_h, in.w / cfg.stride_w};
}

bool is_2x2(const SoftPoolConfig& cfg) { return cfg.kernel_h == 2 && cfg.kernel_w == 2; }

// Softmax weights and pooled value of a 2x2 window given its two rows.
template <typename T>
struct Window2x2 {
  std::array<T, 4> v;
  std::array<T, 4> w;
  T pooled;

  Window2x2(const T* top, const T* bottom) : v{top[0], top[1], bottom[0], bottom[1]} {
    const T m = std::max(std::max(v[0], v[1]), std::max(v[2], v[3]));
    T denom{0};
    for (std::size_t i = 0; i < 4; ++i) {
      w[i] = std::exp(v[i] - m);
      denom += w[i];
    }
    pooled = T{0};
    for (std::size_t i = 0; i < 4; ++i) {
      w[i] /= denom;
      pooled += w[i] * v[i];
    }
  }
};

// Collects one window's values, computes the stabilized softmax weights and
// returns the pooled value.
template <typename T>
double pool_window(const T* plane, std::size_t width, std::size_t y0, std::size_t x0,
                   const SoftPoolConfig& cfg, std::vector<double>& vals,
                   std::vector<double>& weights) {
  vals.clear();
  for (std::size_t ky = 0; ky < cfg.kernel_h; ++ky) {
    for (std::size_t kx = 0; kx < cfg.kernel_w; ++kx) {
      vals.push_back(plane[(y0 + ky) * width + x0 + kx]);
    }
  }
  const double vmax = *std::max_element(vals.begin(), vals.end());
  weights.resize(vals.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    weights[i] = std::exp(vals[i] - vmax);
    denom += weights[i];
  }
  double out = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    weights[i] /= denom;
    out += weights[i] * vals[i];
  }
  return out;
}

}  // namespace

template <typename T>
Tensor4<T> softpool_forward(const Tensor4<T>& x, const SoftPoolConfig& cfg) {
  const Shape4 os = pooled_shape(x.shape(), cfg);
  require_finite(x, "softpool_forward input");
  Tensor4<T> y(os);
  if (is_2x2(cfg)) {
    for (std::size_t n = 0; n < x.n(); ++n) {
      for (std::size_t c = 0; c < x.c(); ++c) {
        const T* p = x.plane(n, c);
        T* out = y.plane(n, c);
        for (std::size_t oy = 0; oy < os.h; ++oy) {
          const T* r0 = p + 2 * oy * x.w();
          const T* r1 = r0 + x.w();
          for (std::size_t ox = 0; ox < os.w; ++ox) {
            const Window2x2<T> win(r0 + 2 * ox, r1 + 2 * ox);
            out[oy * os.w + ox] = win.pooled;
          }
        }
      }
    }
    return y;
  }
  std::vector<double> vals;
  std::vector<double> weights;
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t c = 0; c < x.c(); ++c) {
      const T* p = x.plane(n, c);
      T* out = y.plane(n, c);
      for (std::size_t oy = 0; oy < os.h; ++oy) {
        for (std::size_t ox = 0; ox < os.w; ++ox) {
          out[oy * os.w + ox] = static_cast<T>(
              pool_window(p, x.w(), oy * cfg.stride_h, ox * cfg.stride_w, cfg, vals, weights));
        }
      }
    }
  }
  return y;
}

template <typename T>
Tensor4<T> softpool_backward(const Tensor4<T>& grad_out, const Tensor4<T>& x,
                             const SoftPoolConfig& cfg) {
  const Shape4 os = pooled_shape(x.shape(), cfg);
  require_shape(grad_out, os, "softpool_backward grad_out");
  Tensor4<T> g(x.shape());
  if (is_2x2(cfg)) {
    for (std::size_t n = 0; n < x.n(); ++n) {
      for (std::size_t c = 0; c < x.c(); ++c) {
        const T* p = x.plane(n, c);
        const T* go = grad_out.plane(n, c);
        T* gp = g.plane(n, c);
        for (std::size_t oy = 0; oy < os.h; ++oy) {
          const std::size_t row = 2 * oy * x.w();
          for (std::size_t ox = 0; ox < os.w; ++ox) {
            const std::size_t i0 = row + 2 * ox;
            const std::size_t i1 = i0 + x.w();
            const Window2x2<T> win(p + i0, p + i1);
            const T up = go[oy * os.w + ox];
            for (std::size_t k = 0; k < 2; ++k) {
              gp[i0 + k] = up * win.w[k] * (T{1} + win.v[k] - win.pooled);
              gp[i1 + k] = up * win.w[k + 2] * (T{1} + win.v[k + 2] - win.pooled);
            }
          }
        }
      }
    }
    require_finite(g, "softpool_backward");
    return g;
  }
  std::vector<double> vals;
  std::vector<double> weights;
  for (std::size_t n = 0; n < x.n(); ++n) {
    for (std::size_t c = 0; c < x.c(); ++c) {
      const T* p = x.plane(n, c);
      const T* go = grad_out.plane(n, c);
      T* gp = g.plane(n, c);
      for (std::size_t oy = 0; oy < os.h; ++oy) {
        for (std::size_t ox = 0; ox < os.w; ++ox) {
          const std::size_t y0 = oy * cfg.stride_h;
          const std::size_t x0 = ox * cfg.stride_w;
          const double pooled = pool_window(p, x.w(), y0, x0, cfg, vals, weights);
          const double upstream = go[oy * os.w + ox];
          std::size_t i = 0;
          for (std::size_t ky = 0; ky < cfg.kernel_h; ++ky) {
            for (std::size_t kx = 0; kx < cfg.kernel_w; ++kx, ++i) {
              gp[(y0 + ky) * x.w() + x0 + kx] =
                  static_cast<T>(upstream * weights[i] * (1.0 + vals[i] - pooled));
            }
          }
        }
      }
    }
  }
  require_finite(g, "softpool_backward");
  return g;
}

template Tensor4<float> softpool_forward(const Tensor4<float>&, const SoftPoolConfig&);
template Tensor4<double> softpool_forward(const Tensor4<double>&, const SoftPoolConfig&);
template Tensor4<float> softpool_backward(const Tensor4<float>&, const Tensor4<float>&,
                                          const SoftPoolConfig&);
template Tensor4<double> softpool_backward(const Tensor4<double>&, const Tensor4<double>&,
                                           const SoftPoolConfig&);

}  // namespace cgd
