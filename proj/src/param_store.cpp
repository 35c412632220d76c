#include "cgdetect/param_store.hpp"

namespace cgd {

std::string_view to_string(ParamKind kind) {
  switch (kind) {
    case ParamKind::conv_weight: return "conv_weight";
    case ParamKind::conv_bias: return "conv_bias";
    case ParamKind::bn_gamma: return "bn_gamma";
    case ParamKind::bn_beta: return "bn_beta";
    case ParamKind::bn_running_mean: return "bn_running_mean";
    case ParamKind::bn_running_var: return "bn_running_var";
    case ParamKind::linear_weight: return "linear_weight";
    case ParamKind::linear_bias: return "linear_bias";
  }
  return "unknown";
}

template <typename T>
ParamEntry<T>& ParamStore<T>::add(std::string name, ParamKind kind, Tensor4<T> value) {
  if (index_.count(name) != 0) throw ConfigError("duplicate parameter name: " + name);
  Tensor4<T> grad = is_learnable(kind) ? Tensor4<T>(value.shape()) : Tensor4<T>();
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), kind, std::move(value), std::move(grad)});
  return entries_.back();
}

template <typename T>
bool ParamStore<T>::contains(std::string_view name) const {
  return index_.count(std::string(name)) != 0;
}

template <typename T>
ParamEntry<T>& ParamStore<T>::at(std::string_view name) {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter: " + std::string(name));
  return entries_[it->second];
}

template <typename T>
const ParamEntry<T>& ParamStore<T>::at(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ConfigError("unknown parameter: " + std::string(name));
  return entries_[it->second];
}

template <typename T>
void ParamStore<T>::zero_grad() {
  for (auto& e : entries_) e.grad.fill(T{0});
}

template <typename T>
std::size_t ParamStore<T>::learnable_count() const {
  std::size_t total = 0;
  for (const auto& e : entries_) {
    if (is_learnable(e.kind)) total += e.value.size();
  }
  return total;
}

template class ParamStore<float>;
template class ParamStore<double>;

}  // namespace cgd
