// tests/test_runconfig.cc

// Copyright 2026  The KWS Engine Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "doctest.h"
#include "kws/runconfig.h"
#include "synth.h"

namespace kws {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

std::string error_message(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

TEST_SUITE("runconfig") {

TEST_CASE("defaults roundtrip losslessly with stable key order") {
  RunConfig cfg;
  cfg.data.dataset_dir = "/data/speech";
  cfg.data.keywords = {"yes", "no"};
  cfg.train.strategy = "da_dat";
  cfg.train.attack_levels = {0.05f, 0.1f};
  cfg.eval.test_snr_db = 10.0f;

  const ordered_json j = to_json(cfg);
  const RunConfig back = run_config_from_json(j);
  const ordered_json j2 = to_json(back);
  CHECK(j.dump(2) == j2.dump(2));

  CHECK(back.train.strategy == "da_dat");
  CHECK(back.train.attack_levels == std::vector<float>{0.05f, 0.1f});
  CHECK(back.data.keywords == std::vector<std::string>{"yes", "no"});
  CHECK(back.eval.test_snr_db == 10.0f);
  CHECK(back.seed == cfg.seed);

  // Key order is fixed: top-level sections in declaration order.
  auto it = j.begin();
  CHECK(it.key() == "seed");
  ++it;
  CHECK(it.key() == "frontend");
}

TEST_CASE("unknown keys are config errors naming the path") {
  ordered_json j = to_json(RunConfig{});
  j["bogus"] = 1;
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);
  CHECK(error_message([&] { run_config_from_json(j); }).find("bogus") !=
        std::string::npos);

  ordered_json j2 = to_json(RunConfig{});
  j2["train"]["turbo"] = true;
  const std::string msg = error_message([&] { run_config_from_json(j2); });
  CHECK(msg.find("train.turbo") != std::string::npos);
  CHECK(msg.find("unknown key") != std::string::npos);
}

TEST_CASE("wrong types are config errors") {
  ordered_json j = to_json(RunConfig{});
  j["train"]["epochs"] = "ten";
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);

  ordered_json j2 = to_json(RunConfig{});
  j2["train"] = 3;
  CHECK_THROWS_AS(run_config_from_json(j2), ConfigError);
}

TEST_CASE("frontend constants must match the build") {
  ordered_json j = to_json(RunConfig{});
  j["frontend"]["sample_rate"] = 8000;
  const std::string msg = error_message([&] { run_config_from_json(j); });
  CHECK(msg.find("frontend.sample_rate") != std::string::npos);

  ordered_json j2 = to_json(RunConfig{});
  j2["frontend"]["num_mel_bins"] = 80;
  CHECK_THROWS_AS(run_config_from_json(j2), ConfigError);
}

TEST_CASE("semantic validation") {
  ordered_json j = to_json(RunConfig{});
  j["train"]["strategy"] = "warp";
  CHECK_THROWS_AS(run_config_from_json(j), ConfigError);

  ordered_json j2 = to_json(RunConfig{});
  j2["train"]["epochs"] = 0;
  CHECK_THROWS_AS(run_config_from_json(j2), ConfigError);

  ordered_json j4 = to_json(RunConfig{});
  j4["eval"]["aggregation"] = "median";
  CHECK_THROWS_AS(run_config_from_json(j4), ConfigError);

  ordered_json j5 = to_json(RunConfig{});
  j5["train"]["generation_branch"] = "sideways";
  CHECK_THROWS_AS(run_config_from_json(j5), ConfigError);
}

TEST_CASE("file roundtrip") {
  const std::string dir = testing::fresh_temp_dir("runconfig");
  RunConfig cfg;
  cfg.seed = 99;
  cfg.data.dataset_dir = "/tmp/ds";
  cfg.train.strategy = "dat";
  const std::string path = dir + "/run.json";
  save_run_config(path, cfg);
  const RunConfig back = load_run_config(path);
  CHECK(to_json(back).dump() == to_json(cfg).dump());

  // An unreadable config is a configuration problem, not a data problem.
  CHECK_THROWS_AS(load_run_config(dir + "/missing.json"), ConfigError);
  {
    std::ofstream f(dir + "/broken.json");
    f << "{ nope";
  }
  CHECK_THROWS_AS(load_run_config(dir + "/broken.json"), ConfigError);
  fs::remove_all(dir);
}

TEST_CASE("overrides rewrite existing leaves") {
  ordered_json j = to_json(RunConfig{});
  apply_override(j, "train.epochs=3");
  CHECK(j["train"]["epochs"] == 3);
  apply_override(j, "train.base_lr=0.125");
  CHECK(j["train"]["base_lr"] == doctest::Approx(0.125));
  apply_override(j, "train.strategy=fg_dat");
  CHECK(j["train"]["strategy"] == "fg_dat");
  apply_override(j, "train.attack_levels=[0.1,0.2]");
  CHECK(j["train"]["attack_levels"].size() == 2);
  apply_override(j, "data.dataset_dir=/some/path");
  CHECK(j["data"]["dataset_dir"] == "/some/path");
  apply_override(j, "train.collapse_routing=true");
  CHECK(j["train"]["collapse_routing"] == true);

  // The rewritten document still parses and carries the overrides.
  const RunConfig cfg = run_config_from_json(j);
  CHECK(cfg.train.epochs == 3);
  CHECK(cfg.train.strategy == "fg_dat");
  CHECK(cfg.train.collapse_routing);
}

TEST_CASE("overrides must name existing paths") {
  ordered_json j = to_json(RunConfig{});
  CHECK_THROWS_AS(apply_override(j, "train.bogus=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "nosection.epochs=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(j, "train.epochs"), ConfigError);  // no '='
  CHECK_THROWS_AS(apply_override(j, "=5"), ConfigError);
}

TEST_CASE("to_train_config translates names to enums") {
  RunConfig cfg;
  cfg.seed = 77;
  cfg.train.strategy = "da_dat";
  cfg.train.generation_branch = "parent";
  cfg.train.epochs = 4;
  cfg.train.attack_levels = {0.25f};
  cfg.train.window_frames = 64;
  cfg.train.audit_adversarial_grad = true;
  const TrainConfig tc = to_train_config(cfg);
  CHECK(tc.strategy == Strategy::kDA_DAT);
  CHECK(tc.generation_branch == GenerationBranch::kParent);
  CHECK(tc.epochs == 4);
  CHECK(tc.attack_levels == std::vector<float>{0.25f});
  CHECK(tc.window_frames == 64);
  CHECK(tc.audit_adversarial_grad);
  CHECK(tc.seed == 77);
}

}  // TEST_SUITE

}  // namespace
}  // namespace kws
