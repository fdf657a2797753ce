// Runs the dbsvi executable end to end and checks exit codes and outputs.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <json.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string err;
};

fs::path scratch(const std::string& name) {
  const fs::path p = fs::path(DBSVI_TEST_TMP) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Outcome dbsvi(const std::string& args, const fs::path& dir) {
  const fs::path err = dir / "stderr.txt";
  const std::string cmd = std::string("\"") + DBSVI_CLI + "\" " + args + " > \"" + (dir / "stdout.txt").string() +
                          "\" 2> \"" + err.string() + "\"";
  const int status = std::system(cmd.c_str());
  Outcome o;
  if (WIFEXITED(status)) o.code = WEXITSTATUS(status);
  o.err = slurp(err);
  return o;
}

std::string config(const std::string& name) { return std::string(DBSVI_CONFIG_DIR) + "/" + name + ".jsonc"; }

}  // namespace

TEST_CASE("successful runs are byte-identical") {
  const auto dir = scratch("repeat");
  const auto args = config("quadratic_delayed") + " --out " + (dir / "out").string();
  REQUIRE(dbsvi(args, dir).code == 0);
  const auto first = slurp(dir / "out" / "report.json");
  REQUIRE(dbsvi(args, dir).code == 0);
  CHECK_FALSE(first.empty());
  CHECK(first == slurp(dir / "out" / "report.json"));
  CHECK(fs::exists(dir / "out" / "timings.json"));
  const auto j = nlohmann::json::parse(first);
  CHECK(j.contains("config"));
  CHECK(j.contains("epsilon_table"));
}

TEST_CASE("csv bundle") {
  const auto dir = scratch("csv");
  const auto o = dbsvi(config("indicator_box") + " --format csv --out " + (dir / "out").string(), dir);
  REQUIRE(o.code == 0);
  for (const char* f : {"epsilon_table.csv", "picard_distances.csv", "audits.csv", "timings.json"})
    CHECK(fs::exists(dir / "out" / f));
  CHECK_FALSE(fs::exists(dir / "out" / "report.json"));
  const auto table = slurp(dir / "out" / "epsilon_table.csv");
  CHECK(std::count(table.begin(), table.end(), '\n') == 11);
}

TEST_CASE("exit codes") {
  const auto dir = scratch("codes");
  const auto out = " --out " + (dir / "out").string();
  CHECK(dbsvi(config("hard_gate") + out, dir).code == 4);
  CHECK(dbsvi(config("quadratic_delayed") + " --hard-gate" + out, dir).code == 0);
  CHECK(dbsvi(config("delay_reduction") + " --hard-gate" + out, dir).code == 4);

  const auto div = dbsvi(config("divergent_delay") + out, dir);
  CHECK(div.code == 3);
  const auto err = nlohmann::json::parse(div.err);
  CHECK(err["error"]["kind"] == "diverged");
  CHECK(err["error"]["diagnostics"]["iterations_used"].get<int>() > 0);

  CHECK(dbsvi(dir.string() + "/missing.jsonc" + out, dir).code == 2);
  CHECK(dbsvi(config("minimal_classical") + " --format xml" + out, dir).code == 2);
  CHECK(dbsvi("", dir).code == 2);

  std::ofstream(dir / "broken.jsonc") << "{\n  \"horizon\": 1,\n  oops\n}\n";
  const auto parse = dbsvi((dir / "broken.jsonc").string() + out, dir);
  CHECK(parse.code == 2);
  const auto perr = nlohmann::json::parse(parse.err);
  CHECK(perr["error"]["kind"] == "parse");
  CHECK(perr["error"]["position"]["line"] == 3);

  std::ofstream(dir / "blocker") << "x";
  CHECK(dbsvi(config("minimal_classical") + " --out " + (dir / "blocker" / "sub").string(), dir).code == 5);
}

TEST_CASE("overrides") {
  const auto dir = scratch("overrides");
  CHECK(dbsvi(config("minimal_classical") + " --max-nodes 10 --out " + (dir / "o").string(), dir).code == 2);
  REQUIRE(dbsvi(config("minimal_classical") + " --beta 2.5 --out " + (dir / "o").string(), dir).code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "o" / "report.json"));
  CHECK(j["wellposedness"]["beta"].get<double>() == 2.5);
}
