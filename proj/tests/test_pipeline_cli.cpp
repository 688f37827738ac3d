// Exercises the installed command-line tool end to end via std::system.
// The binary path arrives through the NBI_TOOL_PATH compile definition.

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <iterator>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <doctest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

std::string tool() { return NBI_TOOL_PATH; }

int run(const std::string& command) {
  const int status = std::system(command.c_str());
  if (status == -1) return -1;
  return WEXITSTATUS(status);
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE_MESSAGE(in.good(), "cannot open ", path.string());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path("cli_scratch") / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const std::vector<std::string> kDataArtifacts = {
    "schema.json", "data_train.csv", "data_validation.csv", "data_test.csv",
    "split_manifest.json"};

const std::vector<std::string> kAllArtifacts = {
    "schema.json",          "data_train.csv",
    "data_validation.csv",  "data_test.csv",
    "split_manifest.json",  "benchmark_glm.json",
    "benchmark_summary.json", "cann_model.json",
    "training_log.csv",     "nid_scores.csv",
    "nid_top.csv",          "nid_input_scores.csv",
    "mini_glm_comparison.csv", "recommendation.json",
    "benchmark_updated.json", "lift_predetermined.csv",
    "lift_quantile.csv",    "kpi_summary.json",
    "pipeline_state.json"};

}  // namespace

TEST_CASE("generate writes identical artifacts for identical settings") {
  const fs::path a = scratch("gen_a");
  const fs::path b = scratch("gen_b");
  const std::string flags = " generate --n 1200 --seed 11";
  REQUIRE(run(tool() + flags + " --out " + a.string()) == 0);
  REQUIRE(run(tool() + flags + " --out " + b.string()) == 0);
  for (const auto& name : kDataArtifacts)
    CHECK_MESSAGE(slurp(a / name) == slurp(b / name), name);

  // Rerunning in place must not churn any bytes either.
  const std::string before = slurp(a / "data_train.csv");
  REQUIRE(run(tool() + flags + " --out " + a.string()) == 0);
  CHECK(slurp(a / "data_train.csv") == before);
}

TEST_CASE("usage problems exit with code 2") {
  const fs::path dir = scratch("usage");
  CHECK(run(tool() + " generate --n 0 --out " + dir.string() +
            " 2>/dev/null") == 2);
  CHECK(run(tool() + " no-such-command 2>/dev/null") == 2);
  CHECK(run(tool() + " generate --bogus-flag 2>/dev/null") == 2);
  CHECK(run(tool() + " tune --mode sideways --out " + dir.string() +
            " 2>/dev/null") == 2);
}

TEST_CASE("running a stage before its inputs exist exits with code 1") {
  const fs::path dir = scratch("missing");
  const std::string err = (dir / "err.txt").string();
  CHECK(run(tool() + " detect --out " + dir.string() + " 2>" + err) == 1);
  const std::string message = slurp(err);
  CHECK(message.find("missing artifact") != std::string::npos);
  CHECK(run(tool() + " fit-benchmark --out " + dir.string() +
            " 2>/dev/null") == 1);
}

TEST_CASE("run-all produces every artifact and is stable under reruns") {
  const fs::path dir = scratch("runall");
  const std::string base =
      tool() + " run-all --n 20000 --seed 3 --tune none --out " + dir.string();
  REQUIRE(run(base) == 0);
  for (const auto& name : kAllArtifacts)
    CHECK_MESSAGE(fs::exists(dir / name), name);

  std::vector<std::string> bytes;
  for (const auto& name : kAllArtifacts) bytes.push_back(slurp(dir / name));

  // Second invocation: everything fresh, so nothing may change.
  REQUIRE(run(base) == 0);
  for (std::size_t k = 0; k < kAllArtifacts.size(); ++k)
    CHECK_MESSAGE(slurp(dir / kAllArtifacts[k]) == bytes[k], kAllArtifacts[k]);

  // Deleting one detect artifact rebuilds that stage alone; the CANN model
  // file is untouched and the rebuilt ranking is byte-identical.
  const auto cann_stamp = fs::last_write_time(dir / "cann_model.json");
  fs::remove(dir / "nid_top.csv");
  REQUIRE(run(base) == 0);
  CHECK(fs::last_write_time(dir / "cann_model.json") == cann_stamp);
  CHECK(slurp(dir / "nid_top.csv") ==
        bytes[std::distance(kAllArtifacts.begin(),
                            std::find(kAllArtifacts.begin(),
                                      kAllArtifacts.end(), "nid_top.csv"))]);

  const nlohmann::json recommendation =
      nlohmann::json::parse(slurp(dir / "recommendation.json"));
  CHECK(recommendation.contains("term_to_add"));
  CHECK(recommendation.contains("winner"));
}

TEST_CASE("detect refuses a model trained against different data") {
  const fs::path dir = scratch("stale");
  const std::string out = " --out " + dir.string();
  REQUIRE(run(tool() + " generate --n 6000 --seed 1" + out) == 0);
  REQUIRE(run(tool() + " fit-benchmark" + out) == 0);
  REQUIRE(run(tool() + " train-cann --epochs 2" + out) == 0);
  REQUIRE(run(tool() + " detect" + out) == 0);

  // New data under the model's feet.
  REQUIRE(run(tool() + " generate --n 6000 --seed 2" + out) == 0);
  const std::string err = (dir / "err.txt").string();
  CHECK(run(tool() + " detect" + out + " 2>" + err) == 1);
  const std::string message = slurp(err);
  CHECK(message.find("stale artifact") != std::string::npos);
  CHECK(message.find("re-run train-cann") != std::string::npos);
}

TEST_CASE("config files steer the run and flags override them") {
  const fs::path dir = scratch("config");
  const fs::path cfg_dir = dir / "from_config";
  const fs::path flag_dir = dir / "from_flag";

  nlohmann::json cfg;
  cfg["output_dir"] = cfg_dir.string();
  cfg["data"]["rows"] = 800;
  cfg["data"]["seed"] = 9;
  const fs::path cfg_path = dir / "run.json";
  std::ofstream(cfg_path) << cfg.dump(2);

  REQUIRE(run(tool() + " generate --config " + cfg_path.string()) == 0);
  const nlohmann::json manifest =
      nlohmann::json::parse(slurp(cfg_dir / "split_manifest.json"));
  CHECK(manifest.at("rows").get<int>() == 800);

  // --out beats the config file's output_dir; --n beats data.rows.
  REQUIRE(run(tool() + " generate --config " + cfg_path.string() + " --n 500" +
              " --out " + flag_dir.string()) == 0);
  const nlohmann::json overridden =
      nlohmann::json::parse(slurp(flag_dir / "split_manifest.json"));
  CHECK(overridden.at("rows").get<int>() == 500);
  CHECK_FALSE(fs::exists(cfg_dir / "does_not_exist"));
}

TEST_CASE("NBI_OUTPUT_DIR supplies the default output directory") {
  const fs::path dir = scratch("envvar");
  const fs::path env_dir = dir / "from_env";
  REQUIRE(run("NBI_OUTPUT_DIR=" + env_dir.string() + " " + tool() +
              " generate --n 400 --seed 2") == 0);
  CHECK(fs::exists(env_dir / "schema.json"));
  CHECK(fs::exists(env_dir / "data_train.csv"));
}
