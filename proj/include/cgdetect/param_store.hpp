#pragma once

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cgdetect/tensor.hpp"

namespace cgd {

enum class ParamKind {
  conv_weight,
  conv_bias,
  bn_gamma,
  bn_beta,
  bn_running_mean,
  bn_running_var,
  linear_weight,
  linear_bias,
};

std::string_view to_string(ParamKind kind);

/// Running statistics carry no gradient and are skipped by the optimizer.
constexpr bool is_learnable(ParamKind kind) {
  return kind != ParamKind::bn_running_mean && kind != ParamKind::bn_running_var;
}

/// Weight decay applies to conv and linear weights only.
constexpr bool is_decayed(ParamKind kind) {
  return kind == ParamKind::conv_weight || kind == ParamKind::linear_weight;
}

template <typename T>
struct ParamEntry {
  std::string name;
  ParamKind kind;
  Tensor4<T> value;
  Tensor4<T> grad;  // empty for running statistics
};

/// Named parameters in insertion order. Insertion order is the checkpoint
/// order, so it must be a pure function of the model configuration.
template <typename T>
class ParamStore {
 public:
  ParamEntry<T>& add(std::string name, ParamKind kind, Tensor4<T> value);

  bool contains(std::string_view name) const;
  ParamEntry<T>& at(std::string_view name);
  const ParamEntry<T>& at(std::string_view name) const;
  Tensor4<T>& value(std::string_view name) { return at(name).value; }
  const Tensor4<T>& value(std::string_view name) const { return at(name).value; }
  Tensor4<T>& grad(std::string_view name) { return at(name).grad; }

  std::vector<ParamEntry<T>>& entries() { return entries_; }
  const std::vector<ParamEntry<T>>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  void zero_grad();
  /// Number of scalar learnable values (running statistics excluded).
  std::size_t learnable_count() const;

 private:
  std::vector<ParamEntry<T>> entries_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace cgd
