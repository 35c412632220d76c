#include "cgdetect/tensor.hpp"

#include <algorithm>
#include <utility>

namespace cgd {

std::string Shape4::str() const {
  return "(" + std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
         std::to_string(w) + ")";
}

template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w()) {
    throw ShapeError("concat_channels: incompatible " + a.shape().str() + " and " +
                     b.shape().str());
  }
  Tensor4<T> out({a.n(), a.c() + b.c(), a.h(), a.w()});
  const std::size_t plane = a.shape().plane();
  for (std::size_t n = 0; n < a.n(); ++n) {
    std::copy_n(a.plane(n, 0), a.c() * plane, out.plane(n, 0));
    std::copy_n(b.plane(n, 0), b.c() * plane, out.plane(n, a.c()));
  }
  return out;
}

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> split_channels(const Tensor4<T>& t, std::size_t split) {
  if (split > t.c()) throw ShapeError("split_channels: split beyond channel count");
  const std::size_t plane = t.shape().plane();
  Tensor4<T> a({t.n(), split, t.h(), t.w()});
  Tensor4<T> b({t.n(), t.c() - split, t.h(), t.w()});
  for (std::size_t n = 0; n < t.n(); ++n) {
    std::copy_n(t.plane(n, 0), split * plane, a.plane(n, 0));
    std::copy_n(t.plane(n, split), (t.c() - split) * plane, b.plane(n, 0));
  }
  return {std::move(a), std::move(b)};
}

template Tensor4<float> concat_channels(const Tensor4<float>&, const Tensor4<float>&);
template Tensor4<double> concat_channels(const Tensor4<double>&, const Tensor4<double>&);
template std::pair<Tensor4<float>, Tensor4<float>> split_channels(const Tensor4<float>&,
                                                                  std::size_t);
template std::pair<Tensor4<double>, Tensor4<double>> split_channels(const Tensor4<double>&,
                                                                    std::size_t);

}  // namespace cgd
