#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "cgdetect/run_config.hpp"

using namespace cgd;

TEST(RunConfig, DefaultsArePublishedSettings) {
  const RunConfig c;
  EXPECT_DOUBLE_EQ(c.sgd.lr0, 1e-3);
  EXPECT_EQ(c.sgd.batch_size, 64);
  EXPECT_EQ(c.sgd.epochs, 120);
  EXPECT_EQ(c.sgd.lr_step_epochs, 20);
  EXPECT_DOUBLE_EQ(c.sgd.lr_gamma, 0.5);
  EXPECT_DOUBLE_EQ(c.sgd.weight_decay, 1e-3);
  EXPECT_EQ(c.model.crop, 224);
  EXPECT_EQ(c.model.fusion, Fusion::concat);
  EXPECT_EQ(c.model.filter_subset, "all_30");
  EXPECT_EQ(c.model.residual_block_layers, (std::set<int>{2, 3, 4}));
  EXPECT_EQ(c.model.pooling_residual, PoolKind::softpool);
  EXPECT_NO_THROW(c.validate());
}

TEST(RunConfig, HeaderListsEveryKey) {
  const std::string h = config_header(RunConfig{});
  EXPECT_EQ(h.substr(0, 11), "# lr=0.001\n");
  for (const auto& k : config_keys()) EXPECT_NE(h.find("# " + k + "="), std::string::npos) << k;
  EXPECT_NE(h.find("# residual_layers=2,3,4\n"), std::string::npos);
  EXPECT_EQ(describe(RunConfig{}).size(), config_keys().size());
}

TEST(RunConfig, ParseSettings) {
  const Settings s = parse_settings("# comment\nlr = 0.01\n\nfusion=logit_avg  # trailing\n");
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], (std::pair<std::string, std::string>{"lr", "0.01"}));
  EXPECT_EQ(s[1].second, "logit_avg");
  EXPECT_THROW(parse_settings("learning_rate=1\n"), ConfigError);
  EXPECT_THROW(parse_settings("lr 0.1\n"), ConfigError);
}

TEST(RunConfig, FlagsOverrideFileOverrideDefaults) {
  const Settings file{{"lr", "0.01"}, {"epochs", "5"}, {"crop", "96"}};
  const Settings flags{{"epochs", "7"}};
  const RunConfig c = resolve_run_config(file, flags);
  EXPECT_DOUBLE_EQ(c.sgd.lr0, 0.01);
  EXPECT_EQ(c.sgd.epochs, 7);
  EXPECT_EQ(c.model.crop, 96);
  EXPECT_EQ(c.sgd.batch_size, 64);
}

TEST(RunConfig, BadValuesAreConfigErrors) {
  RunConfig c;
  EXPECT_THROW(apply_setting(c, "lr", "fast"), ConfigError);
  EXPECT_THROW(apply_setting(c, "epochs", "2.5"), ConfigError);
  EXPECT_THROW(apply_setting(c, "fusion", "sum"), ConfigError);
  EXPECT_THROW(apply_setting(c, "pooling_joint", "avg"), ConfigError);
  EXPECT_THROW(apply_setting(c, "joint_residual", "maybe"), ConfigError);
  EXPECT_THROW(apply_setting(c, "colour", "red"), ConfigError);
  EXPECT_THROW(resolve_run_config({{"batch_size", "0"}}, {}), ConfigError);
  EXPECT_THROW(resolve_run_config({{"crop", "100"}}, {}), ConfigError);
  EXPECT_THROW(resolve_run_config({{"filter_set", "nope"}}, {}), ConfigError);
}

TEST(RunConfig, SettingsFile) {
  const auto p = std::filesystem::temp_directory_path() / "cgd_settings.cfg";
  std::ofstream(p) << "residual_layers=2,3,4,5\njoint_residual=true\n";
  const RunConfig c = resolve_run_config(read_settings_file(p), {});
  EXPECT_EQ(c.model.residual_block_layers, (std::set<int>{2, 3, 4, 5}));
  EXPECT_TRUE(c.model.joint_stream_residual_blocks);
  EXPECT_THROW(read_settings_file("/nonexistent.cfg"), ConfigError);
}

TEST(RunConfig, JsonRoundTrip) {
  RunConfig c = resolve_run_config({{"lr", "0.0123"}, {"seed", "99"}, {"fusion", "joint_only"},
                                    {"width_multiplier", "0.375"}, {"pooling_residual", "maxpool"}},
                                   {});
  const RunConfig back = run_config_from_json(run_config_to_json(c));
  EXPECT_EQ(back.sgd, c.sgd);
  EXPECT_EQ(back.model, c.model);
  EXPECT_EQ(back.seed, 99u);
}

TEST(RunConfig, NumberFormatting) {
  EXPECT_EQ(format_number(0.001), "0.001");
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(1), "1");
  EXPECT_EQ(std::stod(format_number(0.1 + 0.2)), 0.1 + 0.2);
}
