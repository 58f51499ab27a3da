// Copyright 2026 The twigsim Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include <doctest.h>

#include "twigsim/errors.hpp"
#include "twigsim/pipeline.hpp"
#include "twigsim/run_record.hpp"
#include "unit/support.hpp"

using namespace twigsim;
using namespace twigsim::pipeline;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

PipelineConfig toy_config(const fs::path& work) {
  const auto toy = testing::toy_dir();
  nlohmann::json j = {
      {"graph", {{"train", (toy / "train.tsv").string()},
                 {"valid", (toy / "valid.tsv").string()},
                 {"test", (toy / "test.tsv").string()}}},
      {"paths", {{"runs", "runs"}, {"dataset", "dataset"},
                 {"checkpoints", "ckpt"}, {"reports", "reports"}}},
      {"grid", "subsample:9"},
      {"seeds", {1, 2}},
      {"kge", {{"epochs", 2}}},
      {"twig", {{"protocol", {{"phase1_epochs", 2}, {"phase2_epochs", 2}}}}},
  };
  return config_from_json(j, work);
}

}  // namespace

TEST_CASE("grid modes") {
  CHECK(GridMode::parse("full").n == 0);
  CHECK(GridMode::parse("subsample:81").n == 81);
  CHECK(GridMode::parse("synthetic").synthetic());
  CHECK(GridMode::parse("synthetic:81").n == 81);
  CHECK(GridMode::parse("subsample:81").to_string() == "subsample:81");
  CHECK(GridMode::parse("synthetic").to_string() == "synthetic");
  for (const char* bad : {"subsample", "subsample:0", "subsample:x", "full:3", "nope", "subsample:5000"}) {
    CHECK_THROWS_AS(GridMode::parse(bad), UsageError);
  }
}

TEST_CASE("seed lists") {
  CHECK(parse_seed_list("2") == std::vector<int>{1, 2});
  CHECK(parse_seed_list("4") == std::vector<int>{1, 2, 3, 4});
  CHECK(parse_seed_list("7,3") == std::vector<int>{7, 3});
  CHECK_THROWS_AS(parse_seed_list("0"), UsageError);
  CHECK_THROWS_AS(parse_seed_list("1,,2"), UsageError);
}

TEST_CASE("config round trip and overrides") {
  const auto work = testing::scratch_dir("cfg");
  const auto c = toy_config(work);
  CHECK(c.run_root == work / "runs");
  CHECK(c.effective_holdout() == 2);
  CHECK(selected_configs(c).size() == 9);
  const auto again = config_from_json(to_json(c), "/");
  CHECK(to_json(again) == to_json(c));
  CHECK(run_key(again) == run_key(c));

  auto other = c;
  other.kge.epochs = 3;
  CHECK(run_key(other) != run_key(c));
  auto more_seeds = c;
  more_seeds.seeds = {1, 2, 3};
  CHECK(run_key(more_seeds) == run_key(c));

  std::ofstream(work / "c.json") << R"({"grid": "full", "seeds": 4, "paths": {"runs": "r"}})";
  const auto loaded = load_config(work / "c.json");
  CHECK(loaded.grid.n == 0);
  CHECK(loaded.seeds.size() == 4);
  CHECK(loaded.run_root == work / "r");
  CHECK(selected_configs(loaded).size() == 1215);

  std::ofstream(work / "bad.json") << R"({"seeds": [1, 1]})";
  CHECK_THROWS_AS(load_config(work / "bad.json"), UsageError);
  std::ofstream(work / "worse.json") << "{ not json";
  CHECK_THROWS_AS(load_config(work / "worse.json"), UsageError);
  CHECK_THROWS_AS(load_config(work / "absent.json"), UsageError);

  auto s = c;
  setenv("TWIGSIM_SEED", "1234", 1);
  apply_seed_env(s);
  CHECK(s.seed == 1234);
  setenv("TWIGSIM_SEED", "abc", 1);
  CHECK_THROWS_AS(apply_seed_env(s), UsageError);
  unsetenv("TWIGSIM_SEED");
}

TEST_CASE("exit codes") {
  CHECK(exit_code(UsageError("u")) == 1);
  CHECK(exit_code(DataError("d")) == 2);
  CHECK(exit_code(NumericalError("n")) == 3);
}

TEST_CASE("toy pipeline end to end") {
  const auto work = testing::scratch_dir("pipe");
  const auto c = toy_config(work);
  std::ostringstream log;

  CHECK_THROWS_AS(cmd_mine_features(c, log), DataError);  // no runs yet

  const auto summary = cmd_run_grid(c, log);
  CHECK(summary.completed + summary.failed == 18);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(run_dir(c))) {
    files += e.path().filename().string().rfind("cfg", 0) == 0;
  }
  CHECK(files == 18);
  CHECK(fs::exists(run_dir(c) / "grid.json"));
  CHECK(cmd_run_grid(c, log).reused == summary.completed);

  const auto ds = cmd_mine_features(c, log);
  CHECK(ds.num_queries() == 4);
  CHECK(ds.batches.size() + ds.failed_runs_excluded == 18);
  const std::string meta = slurp(c.dataset_dir / "meta.json");
  cmd_mine_features(c, log);
  CHECK(slurp(c.dataset_dir / "meta.json") == meta);
  CHECK(nlohmann::json::parse(meta)["provenance"].contains("inputs"));

  const auto outcome = cmd_train(c, log);
  CHECK(outcome.log.size() == 4);
  CHECK(fs::exists(c.checkpoint_dir / kFinalCheckpoint));
  CHECK(fs::exists(c.checkpoint_dir / kPhase1Checkpoint));
  CHECK(fs::exists(c.checkpoint_dir / "training_log.csv"));

  const auto report = cmd_evaluate(c, log);
  CHECK_NOTHROW(validate_report(report));
  CHECK(report["parameters"]["twig"] == 2590);
  CHECK(report["num_configs"].get<std::size_t>() == report["per_config"].size());
  CHECK(nlohmann::json::parse(slurp(c.report_dir / "report.json")) == report);

  auto broken = report;
  broken.erase("r2");
  CHECK_THROWS_AS(validate_report(broken), DataError);
  broken = report;
  broken["per_config"][0].erase("true_mrr");
  CHECK_THROWS_AS(validate_report(broken), DataError);

  const auto signal = cmd_analyze_signal(c, log);
  CHECK(signal.seeds == std::vector<int>{1, 2});
  for (const char* f : {"signal_report.json", "mrr_corr.csv", "same_config_kl.csv", "ranklist_corr_hist.dat"}) {
    CHECK(fs::exists(c.report_dir / f));
  }

  auto single = c;
  single.seeds = {1};
  CHECK_THROWS_AS(cmd_analyze_signal(single, log), UsageError);
  single.dataset_dir = work / "single_ds";
  cmd_mine_features(single, log);
  CHECK_THROWS_AS(cmd_evaluate(single, log), DataError);  // no hold-out seed
}

TEST_CASE("synthetic grid mode") {
  const auto work = testing::scratch_dir("pipe_synth");
  auto c = toy_config(work);
  c.grid = GridMode::parse("synthetic:20");
  std::ostringstream log;
  const auto summary = cmd_run_grid(c, log);
  CHECK(summary.completed == 40);
  const auto runs = kge::read_run_dir(run_dir(c));
  CHECK(runs.size() == 40);
  CHECK(runs[0].metadata["source"] == "synthetic");
}
