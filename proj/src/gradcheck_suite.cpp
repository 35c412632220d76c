#include "cgdetect/gradcheck_suite.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "cgdetect/layers.hpp"
#include "cgdetect/model.hpp"
#include "cgdetect/softpool.hpp"

namespace cgd {
namespace {

using T4 = Tensor4<double>;

constexpr double kTightTolerance = 1e-5;  // conv, linear, pooling
constexpr double kLooseTolerance = 1e-4;  // batchnorm, ReLU, cross-entropy
constexpr double kModelTolerance = 1e-3;

class Random {
 public:
  explicit Random(std::uint64_t seed) : rng_(seed) {}

  T4 uniform(Shape4 s, double lo, double hi) {
    std::uniform_real_distribution<double> d(lo, hi);
    T4 t(s);
    for (auto& v : t.values()) v = d(rng_);
    return t;
  }
  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

// Packs tensors into one flat vector and back.
struct Packing {
  std::vector<Shape4> shapes;

  std::vector<double> pack(const std::vector<const T4*>& ts) const {
    std::vector<double> flat;
    for (const T4* t : ts) flat.insert(flat.end(), t->values().begin(), t->values().end());
    return flat;
  }
  std::vector<T4> unpack(std::span<const double> flat) const {
    std::vector<T4> out;
    std::size_t pos = 0;
    for (const Shape4& s : shapes) {
      out.emplace_back(s, std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(pos),
                                              flat.begin() + static_cast<std::ptrdiff_t>(pos + s.size())));
      pos += s.size();
    }
    return out;
  }
};

double dot(const T4& a, const T4& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

GradCheckOptions options(double tolerance) {
  GradCheckOptions o;
  o.tolerance = tolerance;
  return o;
}

// The objective for an op y = f(inputs) is <r, y> with a fixed random r, so
// the analytic gradient is the op's backward applied to r.
SuiteEntry check_op(const std::string& name, double tolerance, const std::vector<const T4*>& inputs,
                    const std::function<T4(const std::vector<T4>&)>& forward,
                    const std::function<std::vector<T4>(const std::vector<T4>&, const T4&)>& backward,
                    Random& rnd, const std::function<void(std::vector<double>&)>& tamper = {}) {
  Packing pk;
  for (const T4* t : inputs) pk.shapes.push_back(t->shape());
  const std::vector<double> point = pk.pack(inputs);
  const std::vector<T4> at = pk.unpack(point);
  const T4 r = rnd.uniform(forward(at).shape(), -1.0, 1.0);

  const std::vector<T4> grads = backward(at, r);
  std::vector<const T4*> gptrs;
  for (const T4& g : grads) gptrs.push_back(&g);
  std::vector<double> analytic = pk.pack(gptrs);
  if (tamper) tamper(analytic);

  const Objective f = [&](std::span<const double> flat) { return dot(r, forward(pk.unpack(flat))); };
  return {name, gradient_check(f, point, analytic, options(tolerance))};
}

SuiteEntry check_conv(const std::string& name, std::size_t stride, Random& rnd) {
  const T4 x = rnd.uniform({2, 3, 7, 7}, -1, 1);
  const T4 w = rnd.uniform({4, 3, 3, 3}, -0.5, 0.5);
  const T4 b = rnd.uniform({4, 1, 1, 1}, -0.5, 0.5);
  return check_op(
      name, kTightTolerance, {&x, &w, &b},
      [=](const std::vector<T4>& in) { return conv2d_forward(in[0], in[1], in[2], stride, 1); },
      [=](const std::vector<T4>& in, const T4& g) {
        auto gr = conv2d_backward(g, in[0], in[1], stride, 1);
        return std::vector<T4>{gr.x, gr.weight, gr.bias};
      },
      rnd);
}

SuiteEntry check_batchnorm(Random& rnd) {
  const T4 x = rnd.uniform({3, 4, 3, 3}, -2, 2);
  const T4 gamma = rnd.uniform({4, 1, 1, 1}, 0.5, 1.5);
  const T4 beta = rnd.uniform({4, 1, 1, 1}, -0.5, 0.5);
  auto run = [](const std::vector<T4>& in, BatchNormCache<double>* cache) {
    T4 mean, var;
    return batchnorm2d_forward(in[0], in[1], in[2], mean, var, Mode::train, {}, cache);
  };
  return check_op(
      "batchnorm2d", kLooseTolerance, {&x, &gamma, &beta},
      [=](const std::vector<T4>& in) { return run(in, nullptr); },
      [=](const std::vector<T4>& in, const T4& g) {
        BatchNormCache<double> cache;
        run(in, &cache);
        auto gr = batchnorm2d_backward(g, in[1], cache);
        return std::vector<T4>{gr.x, gr.gamma, gr.beta};
      },
      rnd);
}

SuiteEntry check_relu(Random& rnd) {
  T4 x = rnd.uniform({2, 3, 4, 4}, 0.1, 1.0);
  std::bernoulli_distribution sign(0.5);
  for (auto& v : x.values()) {
    if (sign(rnd.engine())) v = -v;
  }
  return check_op(
      "relu", kLooseTolerance, {&x}, [](const std::vector<T4>& in) { return relu_forward(in[0]); },
      [](const std::vector<T4>& in, const T4& g) { return std::vector<T4>{relu_backward(g, in[0])}; },
      rnd);
}

SuiteEntry check_linear(Random& rnd) {
  const T4 x = rnd.uniform({3, 6, 1, 1}, -1, 1);
  const T4 w = rnd.uniform({2, 6, 1, 1}, -1, 1);
  const T4 b = rnd.uniform({2, 1, 1, 1}, -1, 1);
  return check_op(
      "linear", kTightTolerance, {&x, &w, &b},
      [](const std::vector<T4>& in) { return linear_forward(in[0], in[1], in[2]); },
      [](const std::vector<T4>& in, const T4& g) {
        auto gr = linear_backward(g, in[0], in[1]);
        return std::vector<T4>{gr.x, gr.weight, gr.bias};
      },
      rnd);
}

SuiteEntry check_softpool(Random& rnd, bool perturb) {
  const T4 x = rnd.uniform({2, 3, 4, 4}, -2, 2);
  std::function<void(std::vector<double>&)> tamper;
  if (perturb) tamper = [](std::vector<double>& g) { g[5] = g[5] * 1.01 + 1e-3; };
  return check_op(
      "softpool", kTightTolerance, {&x},
      [](const std::vector<T4>& in) { return softpool_forward(in[0]); },
      [](const std::vector<T4>& in, const T4& g) {
        return std::vector<T4>{softpool_backward(g, in[0])};
      },
      rnd, tamper);
}

SuiteEntry check_maxpool(Random& rnd) {
  // Distinct values keep every window away from ties.
  T4 x({2, 2, 4, 4});
  std::vector<double> vals(x.size());
  std::iota(vals.begin(), vals.end(), 0.0);
  std::shuffle(vals.begin(), vals.end(), rnd.engine());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = 0.1 * vals[i];
  return check_op(
      "maxpool", kTightTolerance, {&x},
      [](const std::vector<T4>& in) { return maxpool_forward(in[0], 2); },
      [](const std::vector<T4>& in, const T4& g) {
        return std::vector<T4>{maxpool_backward(g, in[0], 2)};
      },
      rnd);
}

SuiteEntry check_gap(Random& rnd) {
  const T4 x = rnd.uniform({2, 3, 3, 3}, -1, 1);
  return check_op(
      "global_avg_pool", kTightTolerance, {&x},
      [](const std::vector<T4>& in) { return global_avg_pool_forward(in[0]); },
      [](const std::vector<T4>& in, const T4& g) {
        return std::vector<T4>{global_avg_pool_backward(g, in[0].shape())};
      },
      rnd);
}

SuiteEntry check_cross_entropy(Random& rnd) {
  const T4 z = rnd.uniform({4, 2, 1, 1}, -3, 3);
  const std::vector<int> labels{0, 1, 1, 0};
  const std::vector<double> point(z.values().begin(), z.values().end());
  const LossResult<double> res = softmax_cross_entropy(z, std::span<const int>(labels));
  const std::vector<double> analytic(res.grad_logits.values().begin(),
                                     res.grad_logits.values().end());
  const Objective f = [&](std::span<const double> flat) {
    return softmax_cross_entropy(T4(z.shape(), std::vector<double>(flat.begin(), flat.end())),
                                 std::span<const int>(labels))
        .loss;
  };
  return {"cross_entropy", gradient_check(f, point, analytic, options(kLooseTolerance))};
}

SuiteEntry check_model(Random& rnd, std::size_t n_coords) {
  ModelConfig cfg;
  cfg.crop = 32;
  cfg.width_multiplier = 0.25;
  DualStreamNet<double> net(cfg, rnd.engine()());
  const T4 x = rnd.uniform({2, 3, 32, 32}, 0, 255);
  const std::vector<int> labels{0, 1};

  // Flat view over learnable entries.
  struct Slot {
    std::size_t entry;
    std::size_t offset;
  };
  std::vector<Slot> slots;
  auto& entries = net.params().entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    if (!is_learnable(entries[e].kind)) continue;
    for (std::size_t i = 0; i < entries[e].value.size(); ++i) slots.push_back({e, i});
  }
  std::vector<std::size_t> coords(slots.size());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  std::shuffle(coords.begin(), coords.end(), rnd.engine());
  coords.resize(std::min(n_coords, coords.size()));
  std::sort(coords.begin(), coords.end());

  std::vector<double> point(slots.size());
  for (std::size_t k = 0; k < slots.size(); ++k) point[k] = entries[slots[k].entry].value[slots[k].offset];

  net.params().zero_grad();
  const T4 logits = net.forward(x, Mode::train);
  net.backward(softmax_cross_entropy(logits, std::span<const int>(labels)).grad_logits);
  std::vector<double> analytic(slots.size());
  for (std::size_t k = 0; k < slots.size(); ++k) analytic[k] = entries[slots[k].entry].grad[slots[k].offset];

  const Objective f = [&](std::span<const double> flat) {
    for (std::size_t k : coords) entries[slots[k].entry].value[slots[k].offset] = flat[k];
    const double loss = softmax_cross_entropy(net.forward(x, Mode::train), std::span<const int>(labels)).loss;
    for (std::size_t k : coords) entries[slots[k].entry].value[slots[k].offset] = point[k];
    return loss;
  };
  return {"model(crop32,w0.25)", gradient_check(f, point, analytic, options(kModelTolerance), coords)};
}

}  // namespace

std::vector<SuiteEntry> run_gradcheck_suite(const SuiteOptions& opt) {
  Random rnd(opt.seed);
  std::vector<SuiteEntry> out;
  out.push_back(check_conv("conv2d(s1)", 1, rnd));
  out.push_back(check_conv("conv2d(s2)", 2, rnd));
  out.push_back(check_batchnorm(rnd));
  out.push_back(check_relu(rnd));
  out.push_back(check_linear(rnd));
  out.push_back(check_softpool(rnd, opt.perturb_softpool));
  out.push_back(check_maxpool(rnd));
  out.push_back(check_gap(rnd));
  out.push_back(check_cross_entropy(rnd));
  out.push_back(check_model(rnd, opt.model_coords));
  return out;
}

std::string format_suite_entry(const SuiteEntry& e) {
  const GradCheckReport& r = e.report;
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "%-20s tol %.0e  max_rel_err %.3e  coords %4zu  worst #%zu (analytic %+.6e, numeric %+.6e)  %s",
                e.op.c_str(), r.tolerance, r.max_rel_error, r.coords_checked, r.worst_coord,
                r.analytic_at_worst, r.numeric_at_worst, r.passed ? "PASS" : "FAIL");
  return buf;
}

}  // namespace cgd
