#pragma once

#include <span>
#include <vector>

#include "cgdetect/tensor.hpp"

// Forward/backward primitives for the network. All functions are pure: they
// read their arguments and return new tensors. Instantiated for float
// (training) and double (gradient checks).

namespace cgd {

// ---------------------------------------------------------------- conv2d

/// Output extent of a square-kernel convolution along one axis.
/// Throws ShapeError when the result would be non-positive.
std::size_t conv_output_extent(std::size_t in, std::size_t kernel, std::size_t stride,
                               std::size_t pad);

/// Cross-correlation of x (n, ic, h, w) with kernels w (oc, ic, k, k) plus
/// bias b (oc, 1, 1, 1).
template <typename T>
Tensor4<T> conv2d_forward(const Tensor4<T>& x, const Tensor4<T>& weight, const Tensor4<T>& bias,
                          std::size_t stride, std::size_t pad);

template <typename T>
struct Conv2dGrads {
  Tensor4<T> x;  // empty when the input gradient was not requested
  Tensor4<T> weight;
  Tensor4<T> bias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor4<T>& grad_out, const Tensor4<T>& x,
                               const Tensor4<T>& weight, std::size_t stride, std::size_t pad,
                               bool input_grad = true);

// ------------------------------------------------------------- batchnorm

struct BatchNormOptions {
  double momentum = 0.1;
  double eps = 1e-5;
};

/// Normalized activations and per-channel 1/sqrt(var + eps) from a train-mode
/// forward pass; consumed by batchnorm2d_backward.
template <typename T>
struct BatchNormCache {
  Tensor4<T> x_hat;
  std::vector<T> inv_std;
};

/// Train mode normalizes with batch statistics and folds them into the running
/// statistics (mean, unbiased variance) with an exponential moving average.
/// Eval mode normalizes with the running statistics, which must be non-empty.
template <typename T>
Tensor4<T> batchnorm2d_forward(const Tensor4<T>& x, const Tensor4<T>& gamma,
                               const Tensor4<T>& beta, Tensor4<T>& running_mean,
                               Tensor4<T>& running_var, Mode mode, const BatchNormOptions& opt,
                               BatchNormCache<T>* cache = nullptr);

/// Eval-mode forward that leaves the running statistics untouched.
template <typename T>
Tensor4<T> batchnorm2d_inference(const Tensor4<T>& x, const Tensor4<T>& gamma,
                                 const Tensor4<T>& beta, const Tensor4<T>& running_mean,
                                 const Tensor4<T>& running_var, double eps);

template <typename T>
struct BatchNormGrads {
  Tensor4<T> x;
  Tensor4<T> gamma;
  Tensor4<T> beta;
};

/// Exact gradient through the batch statistics.
template <typename T>
BatchNormGrads<T> batchnorm2d_backward(const Tensor4<T>& grad_out, const Tensor4<T>& gamma,
                                       const BatchNormCache<T>& cache);

// ------------------------------------------------------------------ relu

template <typename T>
Tensor4<T> relu_forward(const Tensor4<T>& x);

/// Gradient is zero wherever x <= 0.
template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& grad_out, const Tensor4<T>& x);

// ---------------------------------------------------------------- linear

/// y = x * w^T + b with x (n, f, 1, 1), w (out, f, 1, 1), b (out, 1, 1, 1).
template <typename T>
Tensor4<T> linear_forward(const Tensor4<T>& x, const Tensor4<T>& weight, const Tensor4<T>& bias);

template <typename T>
struct LinearGrads {
  Tensor4<T> x;
  Tensor4<T> weight;
  Tensor4<T> bias;
};

template <typename T>
LinearGrads<T> linear_backward(const Tensor4<T>& grad_out, const Tensor4<T>& x,
                               const Tensor4<T>& weight);

// ------------------------------------------------------ global avg pool

template <typename T>
Tensor4<T> global_avg_pool_forward(const Tensor4<T>& x);

template <typename T>
Tensor4<T> global_avg_pool_backward(const Tensor4<T>& grad_out, const Shape4& input_shape);

// --------------------------------------------------------------- maxpool

/// Non-overlapping max pooling (kernel == stride). Ties go to the first
/// element in row-major window order.
template <typename T>
Tensor4<T> maxpool_forward(const Tensor4<T>& x, std::size_t kernel);

template <typename T>
Tensor4<T> maxpool_backward(const Tensor4<T>& grad_out, const Tensor4<T>& x, std::size_t kernel);

// ----------------------------------------------------------------- loss

template <typename T>
struct LossResult {
  double loss = 0.0;
  Tensor4<T> grad_logits;
};

/// Mean cross-entropy of softmax(logits) against integer class labels.
/// logits are (n, k, 1, 1); gradient is (softmax - onehot) / n.
template <typename T>
LossResult<T> softmax_cross_entropy(const Tensor4<T>& logits, std::span<const int> labels);

/// Row-wise softmax of (n, k, 1, 1) logits.
template <typename T>
Tensor4<T> softmax(const Tensor4<T>& logits);

}  // namespace cgd
