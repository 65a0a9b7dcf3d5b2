#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "aquinv/io/csv.hpp"
#include "aquinv/io/tensor_file.hpp"

namespace fs = std::filesystem;

#ifndef AQUINV_CLI_PATH
#define AQUINV_CLI_PATH "aquinv"
#endif

namespace {

const fs::path& work() {
  static fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "aquinv_test_cli";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(AQUINV_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

fs::path write_config(const char* name, const std::string& body) {
  fs::path p = work() / name;
  std::ofstream(p) << body;
  return p;
}

const std::string kTinyConfig = R"({
  "grid": {"height_cells": 13, "width_cells": 25, "domain_height": 10.0, "domain_width": 20.0},
  "conductivity": {"mode": "fixed", "fixed_log_k": 2.0},
  "transport": {"dt": 0.25}
})";

}  // namespace

TEST_CASE("cli rejects bad invocations with the documented exit codes") {
  fs::path cfg = write_config("tiny.json", kTinyConfig);

  SUBCASE("unknown config key -> 2") {
    fs::path bad = write_config("bad.json", R"({"grid": {"heigth_cells": 10}})");
    CHECK(run_cli("sample-prior --config " + bad.string() + " --count 2 --out " +
                  (work() / "x").string()) == 2);
  }
  SUBCASE("invalid config value -> 2") {
    fs::path bad = write_config("bad2.json", R"({"transport": {"porosity": 1.5}})");
    CHECK(run_cli("sample-prior --config " + bad.string() + " --count 2 --out " +
                  (work() / "x").string()) == 2);
  }
  SUBCASE("missing input file -> 4") {
    CHECK(run_cli("simulate --config " + cfg.string() + " --params " +
                  (work() / "nope.aqtn").string() + " --out " + (work() / "x").string()) == 4);
  }
  SUBCASE("bad evaluator -> 2") {
    fs::path obs = work() / "obs.csv";
    std::ofstream(obs) << "observed,sigma\n1,0.1\n";
    CHECK(run_cli("invert --config " + cfg.string() + " --evaluator teleport --obs " +
                  obs.string() + " --out " + (work() / "x").string()) == 2);
  }
  SUBCASE("missing required option -> 2") {
    CHECK(run_cli("sample-prior --count 2 --out " + (work() / "x").string()) == 2);
  }
}

TEST_CASE("cli pipeline produces coherent artifacts") {
  fs::path cfg = write_config("tiny2.json", kTinyConfig);
  const std::string prior = (work() / "prior").string();
  const std::string data = (work() / "data").string();

  REQUIRE(run_cli("sample-prior --config " + cfg.string() + " --count 5 --seed 3 --out " + prior) ==
          0);
  auto t = aquinv::io::read_tensor(prior + "/params.aqtn");
  CHECK(t.dims == std::vector<std::uint64_t>{5, 7});  // fixed conductivity: source only

  REQUIRE(run_cli("simulate --config " + cfg.string() + " --params " + prior +
                  "/params.aqtn --seed 3 --make-obs --mass-balance --out " + data) == 0);
  CHECK(fs::exists(data + "/fields_0004.aqtn"));
  CHECK(fs::exists(data + "/mass_balance.csv"));

  auto obs = aquinv::io::read_csv(data + "/obs.csv");
  CHECK(obs.header.size() == 21 * 8);
  CHECK(obs.header.front() == "w00_t2_c");
  CHECK(obs.header.back() == "w20_head");
  CHECK(obs.rows.size() == 5);

  auto ref = aquinv::io::read_csv(data + "/obs_reference.csv");
  CHECK(ref.rows.size() == 168);
  CHECK(ref.column("sigma") >= 0);

  SUBCASE("simulate resumes instead of recomputing") {
    fs::remove(data + "/fields_0002.aqtn");
    REQUIRE(run_cli("simulate --config " + cfg.string() + " --params " + prior +
                    "/params.aqtn --seed 3 --out " + data) == 0);
    CHECK(fs::exists(data + "/fields_0002.aqtn"));
  }

  SUBCASE("metrics on identical truth and prediction datasets is exact") {
    const std::string rep = (work() / "report_self").string();
    REQUIRE(run_cli("metrics --config " + cfg.string() + " --dataset " + data +
                    " --predictions " + data + " --out " + rep) == 0);
    auto summary = aquinv::io::read_csv(rep + "/summary.csv");
    CHECK(summary.rows[0][summary.column("r2")] == doctest::Approx(1.0));
    CHECK(summary.rows[0][summary.column("rmse")] == 0.0);
    CHECK(summary.rows[0][summary.column("max_abs_error_mean")] == 0.0);
  }
}

TEST_CASE("training pipeline: sweep directories and the generalization gap") {
  fs::path cfg = write_config("train.json", R"({
  "grid": {"height_cells": 13, "width_cells": 25, "domain_height": 10.0, "domain_width": 20.0},
  "conductivity": {"mode": "fixed", "fixed_log_k": 2.0},
  "transport": {"dt": 0.25},
  "network": {"preset": "desk", "initial_features": 8, "block_layers": [1, 1, 1], "growth_rate": 4},
  "train": {"epochs": 12, "batch_size_ar": 16, "scheduler": {"patience": 30}}
})");
  const std::string train_dir = (work() / "gtrain").string();
  const std::string test_dir = (work() / "gtest").string();
  REQUIRE(run_cli("sample-prior --config " + cfg.string() + " --count 8 --seed 11 --out " +
                  train_dir + "/prior") == 0);
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --params " + train_dir +
                  "/prior/params.aqtn --seed 11 --out " + train_dir + "/data") == 0);
  REQUIRE(run_cli("sample-prior --config " + cfg.string() + " --count 4 --seed 12 --out " +
                  test_dir + "/prior") == 0);
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --params " + test_dir +
                  "/prior/params.aqtn --seed 12 --out " + test_dir + "/data") == 0);

  SUBCASE("wc sweep trains one checkpoint per weight") {
    REQUIRE(run_cli("train --config " + cfg.string() + " --dataset " + train_dir +
                    "/data --mode ar-net-wl --wc-sweep 1,5 --seed 2 --out " +
                    (work() / "sweep").string()) == 0);
    CHECK(fs::exists(work() / "sweep/wc_1/checkpoint.aqtn"));
    CHECK(fs::exists(work() / "sweep/wc_5/checkpoint.aqtn"));
    CHECK(fs::exists(work() / "sweep/wc_5/loss.csv"));
  }

  SUBCASE("checkpoint scores its own training set at least as well as the test set") {
    REQUIRE(run_cli("train --config " + cfg.string() + " --dataset " + train_dir +
                    "/data --mode ar-net --seed 2 --out " + (work() / "gnet").string()) == 0);
    REQUIRE(run_cli("metrics --config " + cfg.string() + " --dataset " + train_dir +
                    "/data --checkpoint " + (work() / "gnet").string() + " --out " +
                    (work() / "rep_train").string()) == 0);
    REQUIRE(run_cli("metrics --config " + cfg.string() + " --dataset " + test_dir +
                    "/data --checkpoint " + (work() / "gnet").string() + " --out " +
                    (work() / "rep_test").string()) == 0);
    auto on_train = aquinv::io::read_csv((work() / "rep_train/summary.csv"));
    auto on_test = aquinv::io::read_csv((work() / "rep_test/summary.csv"));
    CHECK(on_train.rows[0][on_train.column("r2")] >= on_test.rows[0][on_test.column("r2")]);
  }
}
