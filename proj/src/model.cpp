#include "cgdetect/model.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <iomanip>

#include "json.hpp"

#include "cgdetect/softpool.hpp"

namespace cgd {
namespace {

using nlohmann::json;

constexpr std::size_t kClasses = 2;
constexpr std::size_t kPoolWindow = 2;
constexpr double kJointInputScale = 1.0 / 255.0;

std::uint64_t name_seed(std::uint64_t seed, std::string_view name) {
  std::uint64_t h = 1469598103934665603ULL;
  for (char ch : name) {
    h ^= static_cast<std::uint8_t>(ch);
    h *= 1099511628211ULL;
  }
  // splitmix64 finalizer over the combined value
  std::uint64_t z = h ^ (seed + 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

template <typename T>
Tensor4<T> he_normal(Shape4 shape, std::size_t fan_in, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(fan_in)));
  Tensor4<T> t(shape);
  for (auto& v : t.values()) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
Tensor4<T> pool_forward(PoolKind kind, const Tensor4<T>& x) {
  return kind == PoolKind::softpool ? softpool_forward(x) : maxpool_forward(x, kPoolWindow);
}

template <typename T>
Tensor4<T> pool_backward(PoolKind kind, const Tensor4<T>& g, const Tensor4<T>& x) {
  return kind == PoolKind::softpool ? softpool_backward(g, x) : maxpool_backward(g, x, kPoolWindow);
}

std::string head_name(Stream s) { return s == Stream::residual ? "head.res" : "head.joint"; }

}  // namespace

std::string_view to_string(Fusion f) {
  switch (f) {
    case Fusion::concat: return "concat";
    case Fusion::logit_avg: return "logit_avg";
    case Fusion::residual_only: return "residual_only";
    case Fusion::joint_only: return "joint_only";
  }
  return "unknown";
}

std::string_view to_string(PoolKind p) { return p == PoolKind::softpool ? "softpool" : "maxpool"; }

std::string_view to_string(Stream s) { return s == Stream::residual ? "residual" : "joint"; }

Fusion parse_fusion(std::string_view s) {
  for (Fusion f : {Fusion::concat, Fusion::logit_avg, Fusion::residual_only, Fusion::joint_only}) {
    if (to_string(f) == s) return f;
  }
  throw ConfigError("unknown fusion mode: " + std::string(s));
}

PoolKind parse_pool(std::string_view s) {
  if (s == "softpool") return PoolKind::softpool;
  if (s == "maxpool") return PoolKind::maxpool;
  throw ConfigError("unknown pooling: " + std::string(s));
}

std::set<int> parse_layer_list(std::string_view s) {
  std::set<int> out;
  if (s.empty() || s == "none") return out;
  std::string item;
  std::istringstream in{std::string(s)};
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      const int v = std::stoi(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.insert(v);
    } catch (const std::exception&) {
      throw ConfigError("bad layer list entry: '" + item + "'");
    }
  }
  return out;
}

std::string format_layer_list(const std::set<int>& layers) {
  if (layers.empty()) return "none";
  std::string out;
  for (int l : layers) {
    if (!out.empty()) out += ",";
    out += std::to_string(l);
  }
  return out;
}

void ModelConfig::validate() const {
  for (int l : residual_block_layers) {
    if (l < 1 || l > 5) throw ConfigError("residual layer index out of range: " + std::to_string(l));
  }
  if (crop < 32 || crop % 32 != 0) throw ConfigError("crop must be a positive multiple of 32");
  if (!(width_multiplier > 0.0)) throw ConfigError("width_multiplier must be positive");
  for (const auto* sched : {&residual_channels, &joint_channels}) {
    for (int c : *sched) {
      if (c < 1) throw ConfigError("channel schedule entries must be positive");
    }
  }
  (void)load_bank().subset(filter_subset);
}

std::array<std::size_t, 5> ModelConfig::channels(Stream s) const {
  const auto& sched = s == Stream::residual ? residual_channels : joint_channels;
  std::array<std::size_t, 5> out{};
  for (std::size_t i = 0; i < 5; ++i) {
    out[i] = static_cast<std::size_t>(
        std::max(1L, std::lround(sched[i] * width_multiplier)));
  }
  return out;
}

bool ModelConfig::uses(Stream s) const {
  if (s == Stream::residual) return fusion != Fusion::joint_only;
  return fusion != Fusion::residual_only;
}

std::set<int> ModelConfig::block_layers(Stream s) const {
  if (s == Stream::residual) return residual_block_layers;
  return joint_stream_residual_blocks ? std::set<int>{2, 3, 4} : std::set<int>{};
}

std::string ModelConfig::to_json() const {
  json j;
  j["fusion"] = std::string(to_string(fusion));
  j["residual_block_layers"] = std::vector<int>(residual_block_layers.begin(), residual_block_layers.end());
  j["joint_stream_residual_blocks"] = joint_stream_residual_blocks;
  j["pooling_residual"] = std::string(to_string(pooling_residual));
  j["pooling_joint"] = std::string(to_string(pooling_joint));
  j["filter_subset"] = filter_subset;
  j["residual_channels"] = residual_channels;
  j["joint_channels"] = joint_channels;
  j["crop"] = crop;
  j["width_multiplier"] = width_multiplier;
  return j.dump();
}

ModelConfig ModelConfig::from_json(std::string_view text) {
  ModelConfig cfg;
  try {
    const json j = json::parse(text);
    cfg.fusion = parse_fusion(j.at("fusion").get<std::string>());
    const auto layers = j.at("residual_block_layers").get<std::vector<int>>();
    cfg.residual_block_layers = std::set<int>(layers.begin(), layers.end());
    cfg.joint_stream_residual_blocks = j.at("joint_stream_residual_blocks").get<bool>();
    cfg.pooling_residual = parse_pool(j.at("pooling_residual").get<std::string>());
    cfg.pooling_joint = parse_pool(j.at("pooling_joint").get<std::string>());
    cfg.filter_subset = j.at("filter_subset").get<std::string>();
    cfg.residual_channels = j.at("residual_channels").get<std::array<int, 5>>();
    cfg.joint_channels = j.at("joint_channels").get<std::array<int, 5>>();
    cfg.crop = j.at("crop").get<int>();
    cfg.width_multiplier = j.at("width_multiplier").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad model config JSON: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ModelConfig ablation_variant(std::string_view name, const ModelConfig& base) {
  ModelConfig cfg = base;
  // Every row starts from the proposed architecture.
  cfg.fusion = Fusion::concat;
  cfg.residual_block_layers = {2, 3, 4};
  cfg.joint_stream_residual_blocks = false;
  cfg.pooling_residual = PoolKind::softpool;
  cfg.pooling_joint = PoolKind::softpool;
  cfg.filter_subset = "all_30";

  constexpr std::string_view subset_prefix = "subset:";
  if (name == "default" || name == "layers3") {
  } else if (name == "VA") {
    cfg.residual_block_layers = {};
  } else if (name == "VB") {
    cfg.residual_block_layers = {};
    cfg.joint_stream_residual_blocks = true;
  } else if (name == "VC") {
    cfg.joint_stream_residual_blocks = true;
  } else if (name == "M1") {
    cfg.pooling_residual = PoolKind::maxpool;
    cfg.pooling_joint = PoolKind::maxpool;
  } else if (name == "M2") {
    cfg.pooling_joint = PoolKind::maxpool;
  } else if (name == "M3") {
    cfg.pooling_residual = PoolKind::maxpool;
  } else if (name == "layers4") {
    cfg.residual_block_layers = {2, 3, 4, 5};
  } else if (name == "layers5") {
    cfg.residual_block_layers = {1, 2, 3, 4, 5};
  } else if (name == "only_residual") {
    cfg.fusion = Fusion::residual_only;
  } else if (name == "only_joint") {
    cfg.fusion = Fusion::joint_only;
  } else if (name.starts_with(subset_prefix)) {
    cfg.filter_subset = std::string(name.substr(subset_prefix.size()));
  } else {
    throw ConfigError("unknown ablation variant: " + std::string(name));
  }
  cfg.validate();
  return cfg;
}

std::vector<std::string> ablation_variant_names() {
  std::vector<std::string> names{"VA",      "VB",      "VC",      "default",       "M1",
                                 "M2",      "M3",      "layers3", "layers4",       "layers5",
                                 "only_residual", "only_joint"};
  for (const auto& s : FilterBank::subset_names()) {
    if (s != "all_30") names.push_back("subset:" + s);
  }
  return names;
}

// ---------------------------------------------------------------- network

template <typename T>
DualStreamNet<T>::DualStreamNet(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  subset_ = load_bank().subset(cfg_.filter_subset);

  for (Stream s : {Stream::residual, Stream::joint}) {
    if (!cfg_.uses(s)) continue;
    const auto ch = cfg_.channels(s);
    const auto blocks = cfg_.block_layers(s);
    const PoolKind pool = s == Stream::residual ? cfg_.pooling_residual : cfg_.pooling_joint;
    std::size_t in_c = s == Stream::residual ? 3 * subset_.members.size() : 3;
    const std::string stem = s == Stream::residual ? "res" : "joint";
    for (int i = 1; i <= 5; ++i) {
      LayerPlan p{s, i, blocks.count(i) != 0, in_c, ch[static_cast<std::size_t>(i - 1)], pool,
                  stem + ".l" + std::to_string(i)};
      if (p.block) {
        add_conv(p.prefix + ".main", p.out_c, p.in_c, seed);
        add_conv(p.prefix + ".shortcut", p.out_c, p.in_c, seed);
      } else {
        add_conv(p.prefix + ".conv", p.out_c, p.in_c, seed);
        params_.add(p.prefix + ".bn.gamma", ParamKind::bn_gamma, Tensor4<T>::vector(p.out_c, T{1}));
        params_.add(p.prefix + ".bn.beta", ParamKind::bn_beta, Tensor4<T>::vector(p.out_c, T{0}));
        params_.add(p.prefix + ".bn.running_mean", ParamKind::bn_running_mean,
                    Tensor4<T>::vector(p.out_c, T{0}));
        params_.add(p.prefix + ".bn.running_var", ParamKind::bn_running_var,
                    Tensor4<T>::vector(p.out_c, T{1}));
      }
      in_c = p.out_c;
      plans_[static_cast<std::size_t>(s)].push_back(std::move(p));
    }
  }

  const std::size_t fr = cfg_.channels(Stream::residual)[4];
  const std::size_t fj = cfg_.channels(Stream::joint)[4];
  switch (cfg_.fusion) {
    case Fusion::concat:
      add_linear("head", kClasses, fr + fj, seed);
      break;
    case Fusion::logit_avg:
      add_linear(head_name(Stream::residual), kClasses, fr, seed);
      add_linear(head_name(Stream::joint), kClasses, fj, seed);
      break;
    case Fusion::residual_only:
      add_linear(head_name(Stream::residual), kClasses, fr, seed);
      break;
    case Fusion::joint_only:
      add_linear(head_name(Stream::joint), kClasses, fj, seed);
      break;
  }
}

template <typename T>
void DualStreamNet<T>::add_conv(const std::string& name, std::size_t out_c, std::size_t in_c,
                                std::uint64_t seed) {
  const std::string wname = name + ".weight";
  params_.add(wname, ParamKind::conv_weight,
              he_normal<T>({out_c, in_c, 3, 3}, in_c * 9, name_seed(seed, wname)));
  params_.add(name + ".bias", ParamKind::conv_bias, Tensor4<T>::vector(out_c));
}

template <typename T>
void DualStreamNet<T>::add_linear(const std::string& name, std::size_t out_f, std::size_t in_f,
                                  std::uint64_t seed) {
  const std::string wname = name + ".weight";
  params_.add(wname, ParamKind::linear_weight,
              he_normal<T>({out_f, in_f, 1, 1}, in_f, name_seed(seed, wname)));
  params_.add(name + ".bias", ParamKind::linear_bias, Tensor4<T>::vector(out_f));
}

template <typename T>
Tensor4<T> DualStreamNet<T>::stream_input(Stream s, const Tensor4<T>& x) const {
  if (s == Stream::residual) return apply_bank(load_bank(), x, subset_);
  Tensor4<T> scaled = x;
  scale_inplace(scaled, static_cast<T>(kJointInputScale));
  return scaled;
}

template <typename T>
Tensor4<T> DualStreamNet<T>::run_layer(const LayerPlan& p, const Tensor4<T>& x, Mode mode,
                                       LayerCache* cache, std::vector<StatUpdate>* stats) const {
  if (p.block) {
    Tensor4<T> main = conv2d_forward(x, params_.value(p.prefix + ".main.weight"),
                                     params_.value(p.prefix + ".main.bias"), 1, 1);
    Tensor4<T> act = relu_forward(main);
    Tensor4<T> y = pool_forward(p.pool, act);
    add_inplace(y, conv2d_forward(x, params_.value(p.prefix + ".shortcut.weight"),
                                  params_.value(p.prefix + ".shortcut.bias"), 2, 1));
    if (cache != nullptr) {
      cache->input = x;
      cache->act = std::move(act);
    }
    return y;
  }

  Tensor4<T> z = conv2d_forward(x, params_.value(p.prefix + ".conv.weight"),
                                params_.value(p.prefix + ".conv.bias"), 1, 1);
  Tensor4<T> b;
  const auto& gamma = params_.value(p.prefix + ".bn.gamma");
  const auto& beta = params_.value(p.prefix + ".bn.beta");
  if (mode == Mode::train) {
    StatUpdate u{p.prefix, params_.value(p.prefix + ".bn.running_mean"),
                 params_.value(p.prefix + ".bn.running_var")};
    b = batchnorm2d_forward(z, gamma, beta, u.mean, u.var, Mode::train, BatchNormOptions{},
                            cache != nullptr ? &cache->bn : nullptr);
    if (stats != nullptr) stats->push_back(std::move(u));
  } else {
    b = batchnorm2d_inference(z, gamma, beta, params_.value(p.prefix + ".bn.running_mean"),
                              params_.value(p.prefix + ".bn.running_var"), BatchNormOptions{}.eps);
  }
  Tensor4<T> act = relu_forward(b);
  Tensor4<T> y = pool_forward(p.pool, act);
  if (cache != nullptr) {
    cache->input = x;
    cache->act = std::move(act);
  }
  return y;
}

template <typename T>
Tensor4<T> DualStreamNet<T>::run_stream(Stream s, const Tensor4<T>& input, Mode mode,
                                        ForwardCache* cache,
                                        std::vector<StatUpdate>* stats) const {
  const auto si = static_cast<std::size_t>(s);
  Tensor4<T> h = input;
  for (const auto& p : plans_[si]) {
    LayerCache* lc = nullptr;
    if (cache != nullptr) lc = &cache->layers[si].emplace_back();
    h = run_layer(p, h, mode, lc, stats);
  }
  return h;
}

template <typename T>
Tensor4<T> DualStreamNet<T>::run(const Tensor4<T>& x, Mode mode, ForwardCache* cache,
                                 std::vector<StatUpdate>* stats) const {
  const auto crop = static_cast<std::size_t>(cfg_.crop);
  if (x.c() != 3 || x.h() != crop || x.w() != crop || x.n() == 0) {
    throw ShapeError("model input must be (n, 3, " + std::to_string(crop) + ", " +
                     std::to_string(crop) + "), got " + x.shape().str());
  }
  std::array<Tensor4<T>, 2> pooled;
  for (Stream s : {Stream::residual, Stream::joint}) {
    if (!cfg_.uses(s)) continue;
    const auto si = static_cast<std::size_t>(s);
    Tensor4<T> feat = run_stream(s, stream_input(s, x), mode, cache, stats);
    pooled[si] = global_avg_pool_forward(feat);
    if (cache != nullptr) cache->feature_shape[si] = feat.shape();
  }

  Tensor4<T> logits;
  constexpr auto r = static_cast<std::size_t>(Stream::residual);
  constexpr auto j = static_cast<std::size_t>(Stream::joint);
  switch (cfg_.fusion) {
    case Fusion::concat: {
      Tensor4<T> fused = concat_channels(pooled[r], pooled[j]);
      logits = linear_forward(fused, params_.value("head.weight"), params_.value("head.bias"));
      if (cache != nullptr) cache->head_input = std::move(fused);
      break;
    }
    case Fusion::logit_avg: {
      logits = linear_forward(pooled[r], params_.value("head.res.weight"),
                              params_.value("head.res.bias"));
      add_inplace(logits, linear_forward(pooled[j], params_.value("head.joint.weight"),
                                         params_.value("head.joint.bias")));
      scale_inplace(logits, T{0.5});
      break;
    }
    case Fusion::residual_only:
      logits = linear_forward(pooled[r], params_.value("head.res.weight"),
                              params_.value("head.res.bias"));
      break;
    case Fusion::joint_only:
      logits = linear_forward(pooled[j], params_.value("head.joint.weight"),
                              params_.value("head.joint.bias"));
      break;
  }
  if (cache != nullptr) cache->pooled = std::move(pooled);
  return logits;
}

template <typename T>
Tensor4<T> DualStreamNet<T>::forward(const Tensor4<T>& x, Mode mode) {
  cache_.reset();
  if (mode == Mode::eval) return run(x, Mode::eval, nullptr, nullptr);
  ForwardCache cache;
  std::vector<StatUpdate> stats;
  Tensor4<T> logits = run(x, Mode::train, &cache, &stats);
  for (auto& u : stats) {
    params_.value(u.prefix + ".bn.running_mean") = std::move(u.mean);
    params_.value(u.prefix + ".bn.running_var") = std::move(u.var);
  }
  cache_ = std::move(cache);
  return logits;
}

template <typename T>
Tensor4<T> DualStreamNet<T>::predict(const Tensor4<T>& x) const {
  return run(x, Mode::eval, nullptr, nullptr);
}

template <typename T>
Tensor4<T> DualStreamNet<T>::stream_features(Stream s, const Tensor4<T>& x) const {
  if (!cfg_.uses(s)) throw ConfigError("stream not present in this configuration");
  return run_stream(s, stream_input(s, x), Mode::eval, nullptr, nullptr);
}

template <typename T>
void DualStreamNet<T>::accumulate(const std::string& name, const Tensor4<T>& g) {
  add_inplace(params_.grad(name), g);
}

template <typename T>
Tensor4<T> DualStreamNet<T>::backward_layer(const LayerPlan& p, const Tensor4<T>& grad_out,
                                            const LayerCache& c, bool input_grad) {
  if (p.block) {
    Tensor4<T> g_act = pool_backward(p.pool, grad_out, c.act);
    Tensor4<T> g_main = relu_backward(g_act, c.act);
    auto main = conv2d_backward(g_main, c.input, params_.value(p.prefix + ".main.weight"), 1, 1,
                                input_grad);
    auto shortcut = conv2d_backward(grad_out, c.input,
                                    params_.value(p.prefix + ".shortcut.weight"), 2, 1, input_grad);
    accumulate(p.prefix + ".main.weight", main.weight);
    accumulate(p.prefix + ".main.bias", main.bias);
    accumulate(p.prefix + ".shortcut.weight", shortcut.weight);
    accumulate(p.prefix + ".shortcut.bias", shortcut.bias);
    if (!input_grad) return {};
    add_inplace(main.x, shortcut.x);
    return std::move(main.x);
  }
  Tensor4<T> g_act = pool_backward(p.pool, grad_out, c.act);
  Tensor4<T> g_bn = relu_backward(g_act, c.act);
  auto bn = batchnorm2d_backward(g_bn, params_.value(p.prefix + ".bn.gamma"), c.bn);
  accumulate(p.prefix + ".bn.gamma", bn.gamma);
  accumulate(p.prefix + ".bn.beta", bn.beta);
  auto conv = conv2d_backward(bn.x, c.input, params_.value(p.prefix + ".conv.weight"), 1, 1,
                              input_grad);
  accumulate(p.prefix + ".conv.weight", conv.weight);
  accumulate(p.prefix + ".conv.bias", conv.bias);
  return std::move(conv.x);
}

template <typename T>
void DualStreamNet<T>::backward(const Tensor4<T>& grad_logits) {
  if (!cache_) throw ShapeError("backward: missing forward cache (run a train-mode forward first)");
  const ForwardCache& cache = *cache_;
  constexpr auto r = static_cast<std::size_t>(Stream::residual);
  constexpr auto j = static_cast<std::size_t>(Stream::joint);
  std::array<Tensor4<T>, 2> g_pooled;

  auto head = [&](const std::string& name, const Tensor4<T>& g, const Tensor4<T>& input) {
    auto lg = linear_backward(g, input, params_.value(name + ".weight"));
    accumulate(name + ".weight", lg.weight);
    accumulate(name + ".bias", lg.bias);
    return std::move(lg.x);
  };
  switch (cfg_.fusion) {
    case Fusion::concat: {
      Tensor4<T> g = head("head", grad_logits, cache.head_input);
      auto [gr, gj] = split_channels(g, cache.pooled[r].c());
      g_pooled[r] = std::move(gr);
      g_pooled[j] = std::move(gj);
      break;
    }
    case Fusion::logit_avg: {
      Tensor4<T> half = grad_logits;
      scale_inplace(half, T{0.5});
      g_pooled[r] = head("head.res", half, cache.pooled[r]);
      g_pooled[j] = head("head.joint", half, cache.pooled[j]);
      break;
    }
    case Fusion::residual_only:
      g_pooled[r] = head("head.res", grad_logits, cache.pooled[r]);
      break;
    case Fusion::joint_only:
      g_pooled[j] = head("head.joint", grad_logits, cache.pooled[j]);
      break;
  }

  for (Stream s : {Stream::residual, Stream::joint}) {
    if (!cfg_.uses(s)) continue;
    const auto si = static_cast<std::size_t>(s);
    Tensor4<T> g = global_avg_pool_backward(g_pooled[si], cache.feature_shape[si]);
    const auto& plans = plans_[si];
    for (std::size_t k = plans.size(); k-- > 0;) {
      g = backward_layer(plans[k], g, cache.layers[si][k], k > 0);
    }
  }
}

template <typename T>
std::vector<LayerInfo> DualStreamNet<T>::layers() const {
  std::vector<LayerInfo> out;
  auto count = [&](const std::string& prefix) {
    std::size_t total = 0;
    for (const auto& e : params_.entries()) {
      if (is_learnable(e.kind) && e.name.rfind(prefix, 0) == 0) total += e.value.size();
    }
    return total;
  };
  const auto crop = static_cast<std::size_t>(cfg_.crop);
  for (Stream s : {Stream::residual, Stream::joint}) {
    if (!cfg_.uses(s)) continue;
    std::size_t extent = crop;
    if (s == Stream::residual) {
      out.push_back({"res.srm", "srm_filter_bank(" + subset_.name + ")",
                     {1, 3 * subset_.members.size(), crop, crop}, 0});
    } else {
      out.push_back({"joint.input", "scale(1/255)", {1, 3, crop, crop}, 0});
    }
    for (const auto& p : plans_[static_cast<std::size_t>(s)]) {
      extent /= 2;
      const std::string pool(to_string(p.pool));
      const std::string type =
          p.block ? "residual_block(conv3x3s1-relu-" + pool + " + conv3x3s2)"
                  : "conv3x3s1-bn-relu-" + pool;
      out.push_back({p.prefix, type, {1, p.out_c, extent, extent}, count(p.prefix + ".")});
    }
    out.push_back({std::string(to_string(s)) + ".gap", "global_avg_pool",
                   {1, plans_[static_cast<std::size_t>(s)].back().out_c, 1, 1}, 0});
  }
  const std::string head_type = cfg_.fusion == Fusion::concat      ? "concat-linear"
                                : cfg_.fusion == Fusion::logit_avg ? "per-stream linear, averaged"
                                                                   : "linear";
  out.push_back({"head", head_type, {1, kClasses, 1, 1}, count("head")});
  return out;
}

template <typename T>
std::string DualStreamNet<T>::summary() const {
  std::ostringstream os;
  os << std::left << std::setw(14) << "layer" << std::setw(50) << "type" << std::setw(20) << "output"
     << "params\n";
  for (const auto& l : layers()) {
    os << std::setw(14) << l.name << std::setw(50) << l.type << std::setw(20) << l.output.str()
       << l.params << "\n";
  }
  os << "total learnable parameters: " << parameter_count() << "\n";
  return os.str();
}

template class DualStreamNet<float>;
template class DualStreamNet<double>;

}  // namespace cgd
