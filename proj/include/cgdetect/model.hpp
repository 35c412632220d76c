#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "cgdetect/layers.hpp"
#include "cgdetect/param_store.hpp"
#include "cgdetect/srm.hpp"

namespace cgd {

enum class Fusion { concat, logit_avg, residual_only, joint_only };
enum class PoolKind { softpool, maxpool };
enum class Stream { residual = 0, joint = 1 };

std::string_view to_string(Fusion f);
std::string_view to_string(PoolKind p);
std::string_view to_string(Stream s);
Fusion parse_fusion(std::string_view s);
PoolKind parse_pool(std::string_view s);

/// Architecture knobs. Defaults describe the proposed network: SRM residual
/// stream with residual blocks in layers 2-4, plain joint RGB stream,
/// SoftPool everywhere, feature-concatenation head.
struct ModelConfig {
  Fusion fusion = Fusion::concat;
  std::set<int> residual_block_layers{2, 3, 4};  // 1-based, residual stream
  bool joint_stream_residual_blocks = false;     // blocks in joint layers 2-4
  PoolKind pooling_residual = PoolKind::softpool;
  PoolKind pooling_joint = PoolKind::softpool;
  std::string filter_subset = "all_30";
  std::array<int, 5> residual_channels{32, 64, 96, 128, 128};
  std::array<int, 5> joint_channels{32, 64, 96, 128, 128};
  int crop = 224;
  double width_multiplier = 1.0;

  /// Throws ConfigError on an inconsistent configuration.
  void validate() const;

  /// Per-layer output channels after applying width_multiplier.
  std::array<std::size_t, 5> channels(Stream s) const;
  bool uses(Stream s) const;
  std::set<int> block_layers(Stream s) const;

  std::string to_json() const;
  static ModelConfig from_json(std::string_view json);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// "4,3,2" style list to a layer set; empty string or "none" gives {}.
std::set<int> parse_layer_list(std::string_view s);
std::string format_layer_list(const std::set<int>& layers);

/// Configuration for a published ablation row, applied on top of `base`
/// (crop, width and unrelated knobs are kept). Names: default, VA, VB, VC,
/// M1, M2, M3, layers3, layers4, layers5, only_residual, only_joint,
/// subset:<filter subset>.
ModelConfig ablation_variant(std::string_view name, const ModelConfig& base = {});
std::vector<std::string> ablation_variant_names();

struct LayerInfo {
  std::string name;
  std::string type;
  Shape4 output;
  std::size_t params = 0;
};

/// The two-stream network with its parameters and the caches of the last
/// train-mode forward pass.
template <typename T>
class DualStreamNet {
 public:
  DualStreamNet(const ModelConfig& cfg, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }
  const FilterSubset& filter_subset() const { return subset_; }
  ParamStore<T>& params() { return params_; }
  const ParamStore<T>& params() const { return params_; }

  /// x is (n, 3, crop, crop) in 0-255. Returns (n, 2, 1, 1) logits.
  /// Train mode uses batch statistics, updates BN running statistics and
  /// caches intermediates for backward(); eval mode clears the cache.
  Tensor4<T> forward(const Tensor4<T>& x, Mode mode);

  /// Eval-mode forward; touches no state, safe to call concurrently.
  Tensor4<T> predict(const Tensor4<T>& x) const;

  /// Eval-mode stream output before global pooling: (n, F, crop/32, crop/32).
  Tensor4<T> stream_features(Stream s, const Tensor4<T>& x) const;

  /// Accumulates d loss / d param into params().grad for every learnable
  /// entry, given d loss / d logits from the last train-mode forward.
  void backward(const Tensor4<T>& grad_logits);

  bool has_cache() const { return cache_.has_value(); }
  std::size_t parameter_count() const { return params_.learnable_count(); }
  std::vector<LayerInfo> layers() const;
  std::string summary() const;

 private:
  struct LayerPlan {
    Stream stream;
    int index;
    bool block;
    std::size_t in_c;
    std::size_t out_c;
    PoolKind pool;
    std::string prefix;
  };
  struct LayerCache {
    Tensor4<T> input;
    BatchNormCache<T> bn;
    Tensor4<T> act;  // ReLU output, pooling input
  };
  struct StatUpdate {
    std::string prefix;
    Tensor4<T> mean;
    Tensor4<T> var;
  };
  struct ForwardCache {
    std::array<std::vector<LayerCache>, 2> layers;
    std::array<Shape4, 2> feature_shape;
    std::array<Tensor4<T>, 2> pooled;
    Tensor4<T> head_input;
  };

  void add_conv(const std::string& name, std::size_t out_c, std::size_t in_c, std::uint64_t seed);
  void add_linear(const std::string& name, std::size_t out_f, std::size_t in_f, std::uint64_t seed);
  Tensor4<T> stream_input(Stream s, const Tensor4<T>& x) const;
  Tensor4<T> run_stream(Stream s, const Tensor4<T>& input, Mode mode, ForwardCache* cache,
                        std::vector<StatUpdate>* stats) const;
  Tensor4<T> run_layer(const LayerPlan& p, const Tensor4<T>& x, Mode mode, LayerCache* cache,
                       std::vector<StatUpdate>* stats) const;
  Tensor4<T> run(const Tensor4<T>& x, Mode mode, ForwardCache* cache,
                 std::vector<StatUpdate>* stats) const;
  Tensor4<T> backward_layer(const LayerPlan& p, const Tensor4<T>& grad_out, const LayerCache& c,
                            bool input_grad);
  void accumulate(const std::string& name, const Tensor4<T>& g);

  ModelConfig cfg_;
  FilterSubset subset_;
  ParamStore<T> params_;
  std::array<std::vector<LayerPlan>, 2> plans_;
  std::optional<ForwardCache> cache_;
};

}  // namespace cgd
