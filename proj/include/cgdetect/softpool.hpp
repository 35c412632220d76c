#pragma once

#include "cgdetect/tensor.hpp"

namespace cgd {

/// Window geometry for SoftPool. Windows must not overlap (kernel == stride);
/// the network always uses 2x2 windows with stride 2.
struct SoftPoolConfig {
  std::size_t kernel_h = 2;
  std::size_t kernel_w = 2;
  std::size_t stride_h = 2;
  std::size_t stride_w = 2;
};

/// Softmax-weighted pooling. For each window R the weights are
/// w_i = exp(a_i) / sum_j exp(a_j) and the output is sum_j w_j * a_j.
/// Exponentials are taken after subtracting the window maximum.
template <typename T>
Tensor4<T> softpool_forward(const Tensor4<T>& x, const SoftPoolConfig& cfg = {});

/// Exact gradient: d out / d a_i = w_i * (1 + a_i - out), scaled by the
/// window's upstream gradient.
template <typename T>
Tensor4<T> softpool_backward(const Tensor4<T>& grad_out, const Tensor4<T>& x,
                             const SoftPoolConfig& cfg = {});

}  // namespace cgd
