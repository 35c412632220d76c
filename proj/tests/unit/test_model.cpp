#include <gtest/gtest.h>

#include "cgdetect/layers.hpp"
#include "cgdetect/model.hpp"
#include "cgdetect/softpool.hpp"
#include "oracles.hpp"

using namespace cgd;
using T4 = Tensor4<double>;

namespace {

ModelConfig tiny(Fusion f = Fusion::concat) {
  ModelConfig cfg;
  cfg.crop = 32;
  cfg.width_multiplier = 0.25;
  cfg.fusion = f;
  return cfg;
}

T4 images(std::size_t n, std::uint64_t seed, int crop = 32) {
  return oracle::random_tensor<double>({n, 3, std::size_t(crop), std::size_t(crop)}, seed, 0, 255);
}

// Eval-mode network rebuilt from the primitives and the parameter store.
struct Reference {
  const ModelConfig& cfg;
  const ParamStore<double>& p;
  bool skip_shortcuts = false;

  T4 pool(PoolKind k, const T4& x) const { return k == PoolKind::softpool ? softpool_forward(x) : maxpool_forward(x, 2); }

  T4 stream(Stream s, const T4& rgb) const {
    const bool res = s == Stream::residual;
    T4 h;
    if (res) {
      h = apply_bank(load_bank(), rgb, load_bank().subset(cfg.filter_subset));
    } else {
      h = rgb;
      for (auto& v : h.values()) v /= 255.0;
    }
    const auto blocks = cfg.block_layers(s);
    const PoolKind pk = res ? cfg.pooling_residual : cfg.pooling_joint;
    for (int i = 1; i <= 5; ++i) {
      const std::string pre = std::string(res ? "res" : "joint") + ".l" + std::to_string(i);
      if (blocks.count(i)) {
        T4 y = pool(pk, relu_forward(conv2d_forward(h, p.value(pre + ".main.weight"), p.value(pre + ".main.bias"), 1, 1)));
        if (!skip_shortcuts)
          add_inplace(y, conv2d_forward(h, p.value(pre + ".shortcut.weight"), p.value(pre + ".shortcut.bias"), 2, 1));
        h = y;
      } else {
        const T4 z = conv2d_forward(h, p.value(pre + ".conv.weight"), p.value(pre + ".conv.bias"), 1, 1);
        T4 b(z.shape());
        for (std::size_t n = 0; n < z.n(); ++n)
          for (std::size_t c = 0; c < z.c(); ++c)
            for (std::size_t i2 = 0; i2 < z.h() * z.w(); ++i2) {
              const double xh = (z.plane(n, c)[i2] - p.value(pre + ".bn.running_mean")[c]) /
                                std::sqrt(p.value(pre + ".bn.running_var")[c] + 1e-5);
              b.plane(n, c)[i2] = p.value(pre + ".bn.gamma")[c] * xh + p.value(pre + ".bn.beta")[c];
            }
        h = pool(pk, relu_forward(b));
      }
    }
    return oracle::global_avg_pool(h);
  }

  T4 logits(const T4& x) const {
    switch (cfg.fusion) {
      case Fusion::concat:
        return linear_forward(concat_channels(stream(Stream::residual, x), stream(Stream::joint, x)),
                              p.value("head.weight"), p.value("head.bias"));
      case Fusion::residual_only:
        return linear_forward(stream(Stream::residual, x), p.value("head.res.weight"), p.value("head.res.bias"));
      case Fusion::joint_only:
        return linear_forward(stream(Stream::joint, x), p.value("head.joint.weight"), p.value("head.joint.bias"));
      case Fusion::logit_avg: {
        T4 a = linear_forward(stream(Stream::residual, x), p.value("head.res.weight"), p.value("head.res.bias"));
        const T4 b = linear_forward(stream(Stream::joint, x), p.value("head.joint.weight"), p.value("head.joint.bias"));
        for (std::size_t i = 0; i < a.size(); ++i) a[i] = 0.5 * (a[i] + b[i]);
        return a;
      }
    }
    return {};
  }
};

void randomize_bn_stats(DualStreamNet<double>& net, std::uint64_t seed) {
  for (auto& e : net.params().entries()) {
    if (e.kind == ParamKind::bn_running_mean) e.value = oracle::random_tensor<double>(e.value.shape(), seed++, -0.5, 0.5);
    if (e.kind == ParamKind::bn_running_var) e.value = oracle::random_tensor<double>(e.value.shape(), seed++, 0.5, 2);
    if (e.kind == ParamKind::bn_gamma) e.value = oracle::random_tensor<double>(e.value.shape(), seed++, 0.5, 1.5);
  }
}

}  // namespace

TEST(Model, DefaultParameterCount) {
  const DualStreamNet<float> net(ModelConfig{}, 0);
  EXPECT_EQ(net.parameter_count(), 877570u);
}

TEST(Model, StreamFeatureShapes) {
  const DualStreamNet<float> net(ModelConfig{}, 0);
  const Tensor4<float> x({1, 3, 224, 224}, 128.0f);
  EXPECT_EQ(net.stream_features(Stream::residual, x).shape(), (Shape4{1, 128, 7, 7}));
  EXPECT_EQ(net.stream_features(Stream::joint, x).shape(), (Shape4{1, 128, 7, 7}));
  EXPECT_EQ(net.predict(x).shape(), (Shape4{1, 2, 1, 1}));

  ModelConfig c96;
  c96.crop = 96;
  const DualStreamNet<float> n96(c96, 0);
  EXPECT_EQ(n96.stream_features(Stream::joint, Tensor4<float>({1, 3, 96, 96})).shape(), (Shape4{1, 128, 3, 3}));
  const DualStreamNet<float> small(tiny(), 0);
  EXPECT_EQ(small.stream_features(Stream::residual, Tensor4<float>({1, 3, 32, 32})).shape(), (Shape4{1, 32, 1, 1}));
}

TEST(Model, RejectsWrongInputShape) {
  DualStreamNet<float> net(tiny(), 0);
  EXPECT_THROW(net.predict(Tensor4<float>({1, 3, 64, 64})), ShapeError);
  EXPECT_THROW(net.forward(Tensor4<float>({1, 1, 32, 32}), Mode::train), ShapeError);
}

TEST(Model, ConfigValidation) {
  ModelConfig c = tiny();
  c.crop = 33;
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.residual_block_layers = {0};
  EXPECT_THROW(c.validate(), ConfigError);
  c = tiny();
  c.filter_subset = "bogus";
  EXPECT_THROW(DualStreamNet<float>(c, 0), ConfigError);
  c = tiny();
  c.width_multiplier = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Model, JsonRoundTrip) {
  ModelConfig c = ablation_variant("VC", tiny());
  c.pooling_joint = PoolKind::maxpool;
  c.filter_subset = "single:edge5_W";
  EXPECT_EQ(ModelConfig::from_json(c.to_json()), c);
}

TEST(Model, LayerListParsing) {
  EXPECT_EQ(parse_layer_list("4,3,2"), (std::set<int>{2, 3, 4}));
  EXPECT_EQ(parse_layer_list("none"), std::set<int>{});
  EXPECT_EQ(parse_layer_list(""), std::set<int>{});
  EXPECT_EQ(format_layer_list({2, 3, 4}), "2,3,4");
  EXPECT_THROW(parse_layer_list("2,x"), ConfigError);
}

TEST(Model, MatchesCompositionalReference) {
  for (Fusion f : {Fusion::concat, Fusion::logit_avg, Fusion::residual_only, Fusion::joint_only}) {
    DualStreamNet<double> net(tiny(f), 3);
    randomize_bn_stats(net, 100);
    const T4 x = images(3, 5);
    const Reference ref{net.config(), net.params()};
    EXPECT_LT(oracle::max_abs_diff(net.predict(x), ref.logits(x)), 1e-9) << to_string(f);
  }
}

TEST(Model, ReferenceCoversEveryAblationVariant) {
  for (const auto& name : ablation_variant_names()) {
    DualStreamNet<double> net(ablation_variant(name, tiny()), 1);
    randomize_bn_stats(net, 7);
    const T4 x = images(2, 8);
    const Reference ref{net.config(), net.params()};
    EXPECT_LT(oracle::max_abs_diff(net.predict(x), ref.logits(x)), 1e-9) << name;
  }
}

TEST(Model, ZeroShortcutReducesBlockToMainPath) {
  DualStreamNet<double> net(ablation_variant("VC", tiny()), 2);
  for (auto& e : net.params().entries())
    if (e.name.find(".shortcut.") != std::string::npos) e.value.fill(0.0);
  const T4 x = images(2, 3);
  const Reference ref{net.config(), net.params(), true};
  EXPECT_LT(oracle::max_abs_diff(net.predict(x), ref.logits(x)), 1e-9);
}

TEST(Model, ConcatWithZeroedJointColumnsEqualsResidualOnly) {
  DualStreamNet<double> cat(tiny(), 11);
  DualStreamNet<double> res(tiny(Fusion::residual_only), 11);
  auto& w = cat.params().value("head.weight");
  const std::size_t fr = cat.config().channels(Stream::residual)[4];
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t f = 0; f < w.c(); ++f) {
      if (f >= fr) w(k, f, 0, 0) = 0;
      else res.params().value("head.res.weight")(k, f, 0, 0) = w(k, f, 0, 0);
    }
  res.params().value("head.res.bias") = cat.params().value("head.bias");
  const T4 x = images(4, 12);
  EXPECT_LT(oracle::max_abs_diff(cat.predict(x), res.predict(x)), 1e-12);
}

TEST(Model, LogitAverageHalvesResidualStreamGradient) {
  DualStreamNet<double> avg(tiny(Fusion::logit_avg), 4);
  DualStreamNet<double> res(tiny(Fusion::residual_only), 4);
  const T4 x = images(2, 9);
  const T4 g = oracle::random_tensor<double>({2, 2, 1, 1}, 10);
  avg.forward(x, Mode::train);
  avg.backward(g);
  res.forward(x, Mode::train);
  res.backward(g);
  for (const auto& e : res.params().entries()) {
    if (!is_learnable(e.kind)) continue;
    const auto& ga = avg.params().at(e.name).grad;
    for (std::size_t i = 0; i < ga.size(); ++i) ASSERT_NEAR(ga[i], 0.5 * e.grad[i], 1e-10 + 1e-9 * std::abs(e.grad[i])) << e.name;
  }
  for (const auto& e : avg.params().entries()) {
    if (e.name.starts_with("joint.")) {
      EXPECT_FALSE(res.params().contains(e.name));
    }
  }
}

TEST(Model, ResidualOnlyIgnoresImageBrightness) {
  // Constant images have an all-zero SRM residual, whatever the value.
  const DualStreamNet<float> net(tiny(Fusion::residual_only), 6);
  const auto a = net.predict(Tensor4<float>({1, 3, 32, 32}, 10.0f));
  const auto b = net.predict(Tensor4<float>({1, 3, 32, 32}, 240.0f));
  EXPECT_EQ(oracle::max_abs_diff(a, b), 0.0);
  const DualStreamNet<float> joint(tiny(Fusion::joint_only), 6);
  EXPECT_GT(oracle::max_abs_diff(joint.predict(Tensor4<float>({1, 3, 32, 32}, 10.0f)),
                                 joint.predict(Tensor4<float>({1, 3, 32, 32}, 240.0f))),
            0.0);
}

TEST(Model, BackwardNeedsTrainForward) {
  DualStreamNet<double> net(tiny(), 0);
  EXPECT_THROW(net.backward(T4({1, 2, 1, 1})), ShapeError);
  net.forward(images(2, 1), Mode::train);
  EXPECT_TRUE(net.has_cache());
  net.predict(images(1, 2));
  EXPECT_TRUE(net.has_cache());
  net.forward(images(1, 2), Mode::eval);
  EXPECT_FALSE(net.has_cache());
}

TEST(Model, ZeroLossGradientGivesZeroParameterGradients) {
  DualStreamNet<double> net(tiny(), 0);
  net.params().zero_grad();
  net.forward(images(2, 1), Mode::train);
  net.backward(T4({2, 2, 1, 1}));
  for (const auto& e : net.params().entries())
    for (double v : e.grad.values()) ASSERT_EQ(v, 0.0) << e.name;
}

TEST(Model, TrainForwardUpdatesRunningStatisticsOnly) {
  DualStreamNet<float> net(tiny(), 0);
  const auto before = net.params().value("joint.l1.bn.running_mean");
  const auto w = net.params().value("joint.l1.conv.weight");
  net.forward(images(2, 4).cast<float>(), Mode::train);
  EXPECT_GT(oracle::max_abs_diff(before, net.params().value("joint.l1.bn.running_mean")), 0.0);
  EXPECT_EQ(oracle::max_abs_diff(w, net.params().value("joint.l1.conv.weight")), 0.0);
}

TEST(Model, SameSeedSameWeights) {
  const DualStreamNet<float> a(tiny(), 42), b(tiny(), 42), c(tiny(), 43);
  double diff = 0;
  for (std::size_t i = 0; i < a.params().size(); ++i) {
    EXPECT_EQ(a.params().entries()[i].name, b.params().entries()[i].name);
    EXPECT_EQ(oracle::max_abs_diff(a.params().entries()[i].value, b.params().entries()[i].value), 0.0);
    diff += oracle::max_abs_diff(a.params().entries()[i].value, c.params().entries()[i].value);
  }
  EXPECT_GT(diff, 0.0);
}

TEST(Model, SmokeMatrixTrainsOneStepFinite) {
  for (const auto& name : ablation_variant_names()) {
    DualStreamNet<float> net(ablation_variant(name, tiny()), 0);
    const auto x = images(2, 3).cast<float>();
    const std::vector<int> labels{0, 1};
    const auto loss = softmax_cross_entropy(net.forward(x, Mode::train), std::span<const int>(labels));
    net.backward(loss.grad_logits);
    EXPECT_TRUE(std::isfinite(loss.loss)) << name;
    for (const auto& e : net.params().entries()) EXPECT_NO_THROW(require_finite(e.grad, e.name));
  }
}

TEST(AblationVariant, PublishedRows) {
  const ModelConfig base = tiny();
  EXPECT_EQ(ablation_variant("VA", base).residual_block_layers, std::set<int>{});
  EXPECT_FALSE(ablation_variant("VA", base).joint_stream_residual_blocks);
  EXPECT_TRUE(ablation_variant("VB", base).joint_stream_residual_blocks);
  EXPECT_EQ(ablation_variant("VB", base).residual_block_layers, std::set<int>{});
  EXPECT_TRUE(ablation_variant("VC", base).joint_stream_residual_blocks);
  EXPECT_EQ(ablation_variant("VC", base).residual_block_layers, (std::set<int>{2, 3, 4}));
  EXPECT_EQ(ablation_variant("M1", base).pooling_residual, PoolKind::maxpool);
  EXPECT_EQ(ablation_variant("M1", base).pooling_joint, PoolKind::maxpool);
  EXPECT_EQ(ablation_variant("M2", base).pooling_residual, PoolKind::softpool);
  EXPECT_EQ(ablation_variant("M2", base).pooling_joint, PoolKind::maxpool);
  EXPECT_EQ(ablation_variant("M3", base).pooling_residual, PoolKind::maxpool);
  EXPECT_EQ(ablation_variant("M3", base).pooling_joint, PoolKind::softpool);
  EXPECT_EQ(ablation_variant("layers4", base).residual_block_layers, (std::set<int>{2, 3, 4, 5}));
  EXPECT_EQ(ablation_variant("layers5", base).residual_block_layers, (std::set<int>{1, 2, 3, 4, 5}));
  EXPECT_EQ(ablation_variant("subset:all_3x3", base).filter_subset, "all_3x3");
  EXPECT_EQ(ablation_variant("default", base), ablation_variant("layers3", base));
  EXPECT_EQ(ablation_variant("default", base).crop, 32);
  EXPECT_THROW(ablation_variant("VD", base), ConfigError);
}

TEST(Model, SummaryListsLayers) {
  const DualStreamNet<float> net(ModelConfig{}, 0);
  const std::string s = net.summary();
  EXPECT_NE(s.find("877570"), std::string::npos);
  EXPECT_FALSE(net.layers().empty());
}
