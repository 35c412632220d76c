#include "cgdetect/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"

#include "cgdetect/data.hpp"
#include "cgdetect/gradcheck_suite.hpp"
#include "cgdetect/srm.hpp"
#include "cgdetect/trainer.hpp"

namespace cgd {
namespace {

namespace fs = std::filesystem;

const std::vector<std::string> kModelKeys{"fusion",           "pooling_residual", "pooling_joint",
                                          "residual_layers",  "filter_set",       "crop",
                                          "width_multiplier", "joint_residual"};

std::string kebab(std::string key) {
  std::replace(key.begin(), key.end(), '_', '-');
  return key;
}

std::string percent(double frac) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", 100.0 * frac);
  return buf;
}

std::string metrics_line(const Metrics& m) {
  std::ostringstream os;
  os << "Acc=" << percent(m.acc) << " TP=" << m.tp << " TN=" << m.tn << " P=" << m.p
     << " N=" << m.n;
  return os.str();
}

// Config file path plus every config key exposed as a --kebab-case flag.
struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", file, "key=value config file (flags override it)");
    for (const auto& key : config_keys()) {
      options[key] = cmd->add_option("--" + kebab(key), values[key], "overrides '" + key + "'");
    }
  }

  Settings file_settings() const { return file.empty() ? Settings{} : read_settings_file(file); }

  Settings flag_settings() const {
    Settings out;
    for (const auto& key : config_keys()) {
      if (options.at(key)->count() > 0) out.emplace_back(key, values.at(key));
    }
    return out;
  }

  RunConfig resolve() const { return resolve_run_config(file_settings(), flag_settings()); }
};

Dataset open_dataset(const fs::path& manifest, const ModelConfig& model, std::ostream& err) {
  return Dataset(read_manifest(manifest), static_cast<std::size_t>(model.crop), &err);
}

// Requested model settings must agree with the checkpoint's architecture.
void check_model_settings(const RunConfig& stored, const Settings& requested) {
  RunConfig merged = stored;
  for (const auto& [k, v] : requested) {
    if (std::find(kModelKeys.begin(), kModelKeys.end(), k) != kModelKeys.end()) {
      apply_setting(merged, k, v);
    }
  }
  if (merged.model == stored.model) return;
  std::string diff;
  const Settings a = describe(stored);
  const Settings b = describe(merged);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].second != b[i].second) {
      diff += " " + a[i].first + " (checkpoint " + a[i].second + ", requested " + b[i].second + ")";
    }
  }
  throw ConfigError("checkpoint configuration mismatch:" + diff);
}

// ------------------------------------------------------------------ train

struct TrainArgs {
  ConfigFlags cfg;
  std::string train;
  std::string val;
  std::string checkpoint = "model.cgdn";
  std::string log = "train_log.csv";
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig cfg = a.cfg.resolve();
  cfg.train_manifest = a.train;
  cfg.val_manifest = a.val;
  cfg.checkpoint = a.checkpoint;
  cfg.log = a.log;

  const Dataset train = open_dataset(cfg.train_manifest, cfg.model, err);
  std::optional<Dataset> val;
  if (!a.val.empty()) val.emplace(open_dataset(cfg.val_manifest, cfg.model, err));

  std::ofstream log(cfg.log);
  if (!log) throw DataError("cannot write log " + cfg.log.string());
  const std::string header = config_header(cfg) + "# train=" + a.train + "\n# val=" + a.val +
                             "\n# checkpoint=" + a.checkpoint + "\n";
  log << header << kLogColumns << "\n" << std::flush;
  out << header << kLogColumns << "\n" << std::flush;

  Net net(cfg.model, cfg.seed);
  const TrainResult res = train_network(net, cfg, train, val ? &*val : nullptr, [&](const EpochRecord& r) {
    const std::string row = format_log_row(r);
    log << row << "\n" << std::flush;
    out << row << "\n" << std::flush;
  });

  write_checkpoint_file(cfg.checkpoint, make_checkpoint(net, cfg));
  out << "final checkpoint: " << cfg.checkpoint.string() << "\n";
  if (res.best_epoch >= 0) {
    const fs::path best = best_checkpoint_path(cfg.checkpoint);
    write_checkpoint_file(best, res.best);
    out << "best checkpoint: " << best.string() << " (epoch " << res.best_epoch
        << ", val " << percent(res.best_val_acc) << ")\n";
  }
  return kExitOk;
}

// ------------------------------------------------------------------- eval

struct EvalArgs {
  ConfigFlags cfg;
  std::string checkpoint;
  std::string manifest;
  int repeat_splits = 0;
  std::string ratios = "10:3:4";
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  LoadedModel model = load_model(a.checkpoint);
  Settings requested = a.cfg.file_settings();
  for (auto& kv : a.cfg.flag_settings()) requested.push_back(kv);
  check_model_settings(model.config, requested);
  RunConfig cfg = model.config;
  for (const auto& [k, v] : requested) apply_setting(cfg, k, v);
  cfg.validate();

  if (a.repeat_splits <= 0) {
    const Dataset data = open_dataset(a.manifest, cfg.model, err);
    const Evaluation ev = evaluate(*model.net, data, static_cast<std::size_t>(cfg.sgd.batch_size));
    out << metrics_line(ev.metrics) << "\n";
    return kExitOk;
  }

  // Re-split the pool and retrain from scratch for every split.
  const Manifest pool = read_manifest(a.manifest);
  const SplitRatios ratios = parse_ratios(a.ratios);
  double sum = 0.0;
  for (int i = 0; i < a.repeat_splits; ++i) {
    RunConfig run = cfg;
    run.seed = cfg.seed + static_cast<std::uint64_t>(i);
    const ManifestSplit split = split_manifest(pool, ratios, run.seed);
    const Dataset train(split.train, static_cast<std::size_t>(run.model.crop), &err);
    const Dataset val(split.val, static_cast<std::size_t>(run.model.crop), &err);
    const Dataset test(split.test, static_cast<std::size_t>(run.model.crop), &err);
    Net net(run.model, run.seed);
    const TrainResult res = train_network(net, run, train, &val);
    const LoadedModel best = model_from_checkpoint(res.best);
    const Evaluation ev = evaluate(*best.net, test, static_cast<std::size_t>(run.sgd.batch_size));
    out << "split " << i << " (seed " << run.seed << ", best epoch " << res.best_epoch
        << "): " << metrics_line(ev.metrics) << "\n"
        << std::flush;
    sum += ev.metrics.acc;
  }
  out << "mean Acc over " << a.repeat_splits << " splits: " << percent(sum / a.repeat_splits)
      << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- predict

struct PredictArgs {
  std::string checkpoint;
  std::vector<std::string> images;
};

int cmd_predict(const PredictArgs& a, std::ostream& out) {
  const LoadedModel model = load_model(a.checkpoint);
  const auto crop = static_cast<std::size_t>(model.config.model.crop);
  for (const auto& path : a.images) {
    const auto t0 = std::chrono::steady_clock::now();
    const Tensor4<float> x = load_and_crop(path, crop);
    const Tensor4<float> p = softmax(model.net->predict(x));
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    const double cg = p(0, 0, 0, 0);
    const double pg = p(0, 1, 0, 0);
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s\t%s\tp_cg=%.6f\tp_pg=%.6f\tlatency_ms=%.2f", path.c_str(),
                  pg > cg ? "pg" : "cg", cg, pg, ms);
    out << buf << "\n";
  }
  return kExitOk;
}

// -------------------------------------------------------------- gradcheck

int cmd_gradcheck(const SuiteOptions& opt, std::ostream& out) {
  const auto entries = run_gradcheck_suite(opt);
  std::size_t failed = 0;
  for (const auto& e : entries) {
    out << format_suite_entry(e) << "\n";
    if (!e.report.passed) ++failed;
  }
  if (failed == 0) {
    out << "all " << entries.size() << " gradient checks passed\n";
    return kExitOk;
  }
  out << failed << " of " << entries.size() << " gradient checks failed\n";
  return kExitNumeric;
}

// ----------------------------------------------------------------- ablate

struct AblateArgs {
  ConfigFlags cfg;
  std::string family;
  std::string train;
  std::string val;
  std::string test;
  std::string csv;
};

struct AblationResult {
  AblationRow row;
  std::size_t params = 0;
  double val_acc = std::nan("");
  double test_acc = std::nan("");
  double seconds = 0.0;
  std::string status = "ok";
};

std::string format_acc(double v) { return std::isnan(v) ? "-" : percent(v); }

void print_table(const std::string& family, const std::vector<AblationResult>& rows,
                 std::ostream& out) {
  std::size_t w = std::string("Model").size();
  for (const auto& r : rows) w = std::max(w, r.row.label.size());
  out << "ablation: " << family << "\n";
  out << std::left << std::setw(static_cast<int>(w)) << "Model" << "  " << std::setw(22)
      << "variant" << std::right << std::setw(10) << "params" << std::setw(10) << "val_acc"
      << std::setw(10) << "test_acc" << std::setw(10) << "seconds" << "  status\n";
  for (const auto& r : rows) {
    char secs[32];
    std::snprintf(secs, sizeof secs, "%.1f", r.seconds);
    out << std::left << std::setw(static_cast<int>(w)) << r.row.label << "  " << std::setw(22)
        << r.row.variant << std::right << std::setw(10) << r.params << std::setw(10)
        << format_acc(r.val_acc) << std::setw(10) << format_acc(r.test_acc) << std::setw(10)
        << secs << "  " << r.status << "\n";
  }
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

std::string table_csv(const std::string& family, const std::vector<AblationResult>& rows) {
  std::ostringstream os;
  os << "family,model,variant,params,val_acc,test_acc,seconds,status\n";
  for (const auto& r : rows) {
    os << family << "," << csv_field(r.row.label) << "," << r.row.variant << "," << r.params << ","
       << (std::isnan(r.val_acc) ? "" : format_number(r.val_acc)) << ","
       << (std::isnan(r.test_acc) ? "" : format_number(r.test_acc)) << ","
       << format_number(std::round(r.seconds * 10) / 10) << "," << csv_field(r.status) << "\n";
  }
  return os.str();
}

int cmd_ablate(const AblateArgs& a, std::ostream& out, std::ostream& err) {
  const std::vector<AblationRow> rows = ablation_rows(a.family);
  const RunConfig base = a.cfg.resolve();
  out << config_header(base) << std::flush;
  const Manifest train_m = read_manifest(a.train);
  const Manifest val_m = read_manifest(a.val);
  std::optional<Manifest> test_m;
  if (!a.test.empty()) test_m = read_manifest(a.test);

  std::vector<AblationResult> results;
  for (const auto& row : rows) {
    AblationResult res{row};
    const auto t0 = std::chrono::steady_clock::now();
    try {
      RunConfig cfg = base;
      cfg.model = ablation_variant(row.variant, base.model);
      const auto crop = static_cast<std::size_t>(cfg.model.crop);
      const Dataset train(train_m, crop, &err);
      const Dataset val(val_m, crop, &err);
      Net net(cfg.model, cfg.seed);
      res.params = net.parameter_count();
      const TrainResult tr = train_network(net, cfg, train, &val);
      res.val_acc = tr.best_val_acc;
      if (test_m) {
        const Dataset test(*test_m, crop, &err);
        const LoadedModel best = model_from_checkpoint(tr.best);
        res.test_acc = evaluate(*best.net, test, static_cast<std::size_t>(cfg.sgd.batch_size)).metrics.acc;
      }
    } catch (const std::exception& e) {
      res.status = std::string("error: ") + e.what();
    }
    res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    err << "[" << a.family << "] " << row.label << ": " << res.status << "\n";
    results.push_back(res);
  }

  print_table(a.family, results, out);
  const std::string csv = table_csv(a.family, results);
  if (a.csv.empty()) {
    out << "\n" << csv;
  } else {
    std::ofstream f(a.csv);
    f << csv;
    if (!f) throw DataError("cannot write " + a.csv);
  }
  const bool any_failed = std::any_of(results.begin(), results.end(),
                                      [](const auto& r) { return r.status != "ok"; });
  return any_failed ? kExitData : kExitOk;
}

// ----------------------------------------------------------- small tools

int cmd_dump_kernels(const std::string& subset, std::ostream& out) {
  const FilterBank& bank = load_bank();
  if (subset.empty()) {
    out << dump_kernels(bank);
    return kExitOk;
  }
  const FilterSubset s = bank.subset(subset);
  out << s.name << " (" << s.members.size() << " kernels, " << 3 * s.members.size()
      << " residual maps):";
  for (const auto& m : s.members) out << " " << m;
  out << "\n";
  return kExitOk;
}

int cmd_generate(const std::string& dir, const SyntheticOptions& opt, std::ostream& out) {
  const Manifest m = generate_synthetic(dir, opt);
  out << "wrote " << m.records.size() << " images and " << (fs::path(dir) / "manifest.tsv").string()
      << "\n";
  return kExitOk;
}

int cmd_split(const std::string& manifest, const std::string& ratios, std::uint64_t seed,
              std::ostream& out) {
  const Manifest m = read_manifest(manifest);
  const ManifestSplit s = split_manifest(m, parse_ratios(ratios), seed);
  const std::array<std::pair<const char*, const Manifest*>, 3> parts{
      {{".train", &s.train}, {".val", &s.val}, {".test", &s.test}}};
  for (const auto& [suffix, part] : parts) {
    const std::string path = manifest + suffix;
    write_manifest(path, *part);
    out << path << ": " << part->records.size() << " (cg " << part->count(Label::cg) << ", pg "
        << part->count(Label::pg) << ")\n";
  }
  return kExitOk;
}

int cmd_summary(const ConfigFlags& flags, std::ostream& out) {
  const RunConfig cfg = flags.resolve();
  out << config_header(cfg);
  const Net net(cfg.model, cfg.seed);
  out << net.summary();
  return kExitOk;
}

}  // namespace

std::vector<AblationRow> ablation_rows(std::string_view family) {
  if (family == "streams") {
    return {{"Only residual stream", "only_residual"},
            {"Only joint channel stream", "only_joint"},
            {"Ours", "default"}};
  }
  if (family == "filters") {
    return {{"1st order", "subset:first_order"}, {"2nd order", "subset:second_order"},
            {"3rd order", "subset:third_order"}, {"3x3", "subset:all_3x3"},
            {"5x5", "subset:all_5x5"},           {"Ours", "default"}};
  }
  if (family == "residual") {
    return {{"VA", "VA"},
            {"VB", "VB"},
            {"VC", "VC"},
            {"Ours (3 layers)", "default"},
            {"4 layers", "layers4"},
            {"5 layers", "layers5"}};
  }
  if (family == "pooling") {
    return {{"M1", "M1"}, {"M2", "M2"}, {"M3", "M3"}, {"Ours", "default"}};
  }
  throw ConfigError("unknown ablation family '" + std::string(family) +
                    "' (expected streams, filters, residual or pooling)");
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dual-stream CNN for computer-generated vs photographic image detection"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "train a model and write checkpoints and a CSV log");
  train.cfg.attach(train_cmd);
  train_cmd->add_option("--train", train.train, "training manifest")->required();
  train_cmd->add_option("--val", train.val, "validation manifest");
  train_cmd->add_option("--checkpoint", train.checkpoint, "final checkpoint path")->capture_default_str();
  train_cmd->add_option("--log", train.log, "CSV log path")->capture_default_str();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "report accuracy of a checkpoint on a manifest");
  eval.cfg.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "checkpoint path")->required();
  eval_cmd->add_option("--manifest", eval.manifest, "manifest to evaluate (or split pool)")->required();
  eval_cmd->add_option("--repeat-splits", eval.repeat_splits,
                       "re-split the manifest k times, retrain and average test accuracy");
  eval_cmd->add_option("--ratios", eval.ratios, "train:val:test ratios for --repeat-splits")->capture_default_str();

  PredictArgs predict;
  auto* predict_cmd = app.add_subcommand("predict", "classify images as cg or pg");
  predict_cmd->add_option("--checkpoint", predict.checkpoint, "checkpoint path")->required();
  predict_cmd->add_option("images", predict.images, "PNG or JPEG files")->required();

  SuiteOptions suite;
  auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every backward pass");
  grad_cmd->add_option("--seed", suite.seed, "random seed")->capture_default_str();
  grad_cmd->add_flag("--perturb-softpool", suite.perturb_softpool,
                     "negative control: corrupt the SoftPool gradient");

  AblateArgs ablate;
  auto* ablate_cmd = app.add_subcommand("ablate", "train every row of an ablation table");
  ablate.cfg.attach(ablate_cmd);
  ablate_cmd->add_option("--family", ablate.family, "streams, filters, residual or pooling")
      ->required()
      ->check(CLI::IsMember({"streams", "filters", "residual", "pooling"}));
  ablate_cmd->add_option("--train", ablate.train, "training manifest")->required();
  ablate_cmd->add_option("--val", ablate.val, "validation manifest")->required();
  ablate_cmd->add_option("--test", ablate.test, "test manifest");
  ablate_cmd->add_option("--csv", ablate.csv, "write the CSV table here instead of stdout");

  std::string subset;
  auto* dump_cmd = app.add_subcommand("dump-kernels", "print the SRM kernel bank");
  dump_cmd->add_option("--subset", subset, "list the members of one subset instead");

  std::string gen_dir;
  SyntheticOptions gen;
  auto* gen_cmd = app.add_subcommand("generate", "write a synthetic cg/pg-like dataset");
  gen_cmd->add_option("--out", gen_dir, "output directory")->required();
  gen_cmd->add_option("--count", gen.count_per_class, "images per class")->capture_default_str();
  gen_cmd->add_option("--size", gen.size, "image side, a multiple of 32")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "random seed")->capture_default_str();
  gen_cmd->add_option("--noise-sigma", gen.noise_sigma, "sensor-noise sigma on 0-255")->capture_default_str();

  std::string split_manifest_path;
  std::string split_ratios = "10:3:4";
  std::uint64_t split_seed = 0;
  auto* split_cmd = app.add_subcommand("split", "stratified train/val/test split of a manifest");
  split_cmd->add_option("--manifest", split_manifest_path, "manifest to split")->required();
  split_cmd->add_option("--ratios", split_ratios, "train:val:test")->capture_default_str();
  split_cmd->add_option("--seed", split_seed, "shuffle seed")->capture_default_str();

  ConfigFlags summary;
  auto* summary_cmd = app.add_subcommand("summary", "print the layer table and parameter count");
  summary.attach(summary_cmd);

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*train_cmd) return cmd_train(train, out, err);
    if (*eval_cmd) return cmd_eval(eval, out, err);
    if (*predict_cmd) return cmd_predict(predict, out);
    if (*grad_cmd) return cmd_gradcheck(suite, out);
    if (*ablate_cmd) return cmd_ablate(ablate, out, err);
    if (*dump_cmd) return cmd_dump_kernels(subset, out);
    if (*gen_cmd) return cmd_generate(gen_dir, gen, out);
    if (*split_cmd) return cmd_split(split_manifest_path, split_ratios, split_seed, out);
    if (*summary_cmd) return cmd_summary(summary, out);
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace cgd
