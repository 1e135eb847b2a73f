#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "stlf/cli.hpp"
#include "stlf/error.hpp"

using namespace stlf;
using namespace stlf::cli;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("stlf-cli-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter()++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static int& counter() {
    static int c = 0;
    return c;
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string line; std::getline(in, line);) ++n;
  return n;
}

RunOutcome run_in(const TempDir& dir, const std::string& command, std::vector<std::string> overrides,
                  const std::optional<fs::path>& config = std::nullopt) {
  std::ostringstream log;
  RunOptions opts;
  opts.output_root = dir.path;
  opts.log = &log;
  return run(command, config, overrides, opts);
}

std::vector<std::string> station_overrides(const fs::path& synth_dir) {
  return {"stations.0.id=synthetic", "stations.0.load=" + (synth_dir / "synthetic_load.csv").string(),
          "stations.0.temp=" + (synth_dir / "synthetic_temp.csv").string()};
}

}  // namespace

TEST_CASE("command list") {
  const auto names = command_names();
  for (const char* c : {"ingest", "sweep", "train", "evaluate", "step1", "step2", "step3", "step4", "robustness",
                        "cost-benefit", "synth"}) {
    CHECK(std::find(names.begin(), names.end(), c) != names.end());
  }
}

TEST_CASE("overrides use dotted paths and parse JSON values") {
  json c = default_config();
  apply_override(c, "train.epochs=7");
  CHECK(c["train"]["epochs"] == 7);
  apply_override(c, "model.cell=lstm");
  CHECK(c["model"]["cell"] == "lstm");
  apply_override(c, "model.layers=[8,8]");
  CHECK(c["model"]["layers"] == json::array({8, 8}));
  apply_override(c, "model.layers.1=4");
  CHECK(c["model"]["layers"][1] == 4);
  apply_override(c, "stations.0.id=a");
  CHECK(c["stations"][0]["id"] == "a");
  CHECK_THROWS_AS(apply_override(c, "no_equals_sign"), ConfigError);
  const auto cfg = parse_config(resolve_config(json::object(), {"train.epochs=3"}), fs::current_path());
  CHECK(cfg.train.epochs == 3);
}

TEST_CASE("config validation names the offending field") {
  auto diagnostic = [](std::vector<std::string> overrides) {
    try {
      (void)parse_config(resolve_config(json::object(), overrides), fs::current_path());
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  CHECK(diagnostic({"train.epoch=3"}).find("train.epoch") != std::string::npos);
  CHECK(diagnostic({"model.cell=rnn"}).find("model.cell") != std::string::npos);
  CHECK(diagnostic({"window.scheme=nine"}).find("window.scheme") != std::string::npos);
  CHECK(diagnostic({"window.n_points=0"}).find("window.n_points") != std::string::npos);
  CHECK(diagnostic({"train.batch_size=\"x\""}).find("train.batch_size") != std::string::npos);
  CHECK(diagnostic({"window.conditions=[\"max@30\"]"}).find("window.conditions.0") != std::string::npos);
  CHECK(diagnostic({"split.test=[\"15-16\"]"}).find("split") != std::string::npos);
  CHECK(diagnostic({"stations.0.load=x.csv"}).find("stations.0.id") != std::string::npos);
  CHECK(diagnostic({"calendar.holidays=[\"2016-02-30\"]"}).find("calendar.holidays.0") != std::string::npos);
  CHECK(diagnostic({"synth.noise_sd_mw=-1"}).find("synth") != std::string::npos);
  CHECK(diagnostic({"cost_benefit.methods.0.mape=9"}).find("cost_benefit.methods.0.mape") != std::string::npos);
}

TEST_CASE("exit codes and fresh output directories") {
  TempDir dir;
  SUBCASE("unknown command") { CHECK(run_in(dir, "forecast", {}).exit_code == 2); }
  SUBCASE("config error") {
    const auto r = run_in(dir, "cost-benefit", {"train.nonsense=1"});
    CHECK(r.exit_code == 2);
    CHECK(r.message.find("train.nonsense") != std::string::npos);
    CHECK(r.output_dir.empty());
  }
  SUBCASE("missing data file is a config error naming the field") {
    const auto r = run_in(dir, "sweep", {"stations.0.id=a", "stations.0.load=/nonexistent.csv", "stations.0.temp=/x.csv"});
    CHECK(r.exit_code == 2);
    CHECK(r.message.find("stations.0.load") != std::string::npos);
  }
  SUBCASE("malformed data is a data error") {
    std::ofstream(dir.path / "bad_load.csv") << "timestamp,load_mw\n2016-01-01T00:00,abc\n";
    std::ofstream(dir.path / "bad_temp.csv") << "timestamp,temp_c\n2016-01-01T00:00,20\n";
    const auto r = run_in(dir, "sweep", {"stations.0.id=a", "stations.0.load=" + (dir.path / "bad_load.csv").string(),
                                         "stations.0.temp=" + (dir.path / "bad_temp.csv").string()});
    CHECK(r.exit_code == 3);
  }
  SUBCASE("missing config file") { CHECK(run_in(dir, "synth", {}, dir.path / "missing.json").exit_code == 2); }
  SUBCASE("two runs never share a directory") {
    const auto a = run_in(dir, "cost-benefit", {});
    const auto b = run_in(dir, "cost-benefit", {});
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);
    CHECK(a.output_dir != b.output_dir);
    CHECK(a.output_dir.parent_path() == dir.path);
  }
}

TEST_CASE("cost-benefit command") {
  TempDir dir;
  const auto r = run_in(dir, "cost-benefit", {});
  REQUIRE(r.exit_code == 0);
  const auto report = json::parse(slurp(r.output_dir / "report.json"));
  CHECK(report["command"] == "cost-benefit");
  CHECK(report["config"]["cost_benefit"]["annual_consumption_twh"].is_number());
  const std::string csv = slurp(r.output_dir / "cost_benefit.csv");
  CHECK(csv.find("three_temps") != std::string::npos);
  CHECK(csv.find("56620000") != std::string::npos);
  CHECK(csv.find("80460000") != std::string::npos);
}

TEST_CASE("synth then sweep") {
  TempDir dir;
  const auto s = run_in(dir, "synth", {"synth.days=40", "synth.lag_hours=3"});
  REQUIRE(s.exit_code == 0);
  for (const char* f : {"synthetic_load.csv", "synthetic_temp.csv", "synthetic_truth.json", "stations.json", "report.json"}) {
    CHECK(fs::exists(s.output_dir / f));
  }
  CHECK(line_count(s.output_dir / "synthetic_load.csv") == 40 * 48 + 1);
  const auto truth = json::parse(slurp(s.output_dir / "synthetic_truth.json"));
  CHECK(truth["lag_hours"] == 3.0);

  const auto w = run_in(dir, "sweep", station_overrides(s.output_dir));
  REQUIRE(w.exit_code == 0);
  for (const char* kind : {"instantaneous", "max", "mean"}) {
    const auto p = w.output_dir / ("synthetic_sweep_" + std::string(kind) + ".csv");
    REQUIRE(fs::exists(p));
    CHECK(line_count(p) == 49);
  }
  CHECK(slurp(w.output_dir / "synthetic_sweep_max.csv").rfind("lead_hours,rho,r2o1,r2o2\n", 0) == 0);
}

TEST_CASE("report payloads are byte-identical across reruns") {
  TempDir dir;
  const auto a = run_in(dir, "synth", {"synth.days=20", "synth.seed=9"});
  const auto b = run_in(dir, "synth", {"synth.days=20", "synth.seed=9"});
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  for (const char* f : {"report.json", "synthetic_load.csv", "synthetic_temp.csv", "synthetic_truth.json"}) {
    CHECK(slurp(a.output_dir / f) == slurp(b.output_dir / f));
  }

  const auto data = run_in(dir, "synth", {"synth.seasons=2", "synth.seed=4"});
  REQUIRE(data.exit_code == 0);
  auto overrides = station_overrides(data.output_dir);
  for (std::string o : {"split.train=[\"15-16\"]", "split.test=[\"16-17\"]", "train.epochs=1", "train.stride=16",
                        "model.layers=[4]", "model.dense=[1]", "window.n_points=8", "window.conditions=[\"max@3\"]"}) {
    overrides.push_back(o);
  }
  const auto t1 = run_in(dir, "train", overrides);
  const auto t2 = run_in(dir, "train", overrides);
  REQUIRE(t1.exit_code == 0);
  REQUIRE(t2.exit_code == 0);
  CHECK(slurp(t1.output_dir / "report.json") == slurp(t2.output_dir / "report.json"));
  CHECK(slurp(t1.output_dir / "model.ckpt") == slurp(t2.output_dir / "model.ckpt"));
  CHECK(slurp(t1.output_dir / "loss.csv") == slurp(t2.output_dir / "loss.csv"));

  auto eval = overrides;
  eval.push_back("evaluate.checkpoint=" + (t1.output_dir / "model.ckpt").string());
  const auto e = run_in(dir, "evaluate", eval);
  REQUIRE(e.exit_code == 0);
  CHECK(fs::exists(e.output_dir / "predictions.csv"));
  CHECK(fs::exists(e.output_dir / "metrics.csv"));
}
