#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("rfbsde_cli_" + std::to_string(::getpid()));
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

Run run(const std::string& args) {
  const char* exe = std::getenv("RFBSDE_CLI");
  REQUIRE_MESSAGE(exe != nullptr, "RFBSDE_CLI must point at the CLI binary");
  const auto out = scratch() / "stdout.txt", err = scratch() / "stderr.txt";
  const std::string cmd = std::string(exe) + " " + args + " > " + out.string() + " 2> " + err.string();
  const int status = std::system(cmd.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(out), slurp(err)};
}

fs::path config(const std::string& name, const std::string& body) {
  const auto p = scratch() / name;
  std::ofstream(p) << body;
  return p;
}

}  // namespace

TEST_CASE("usage and config errors exit 2 with one line") {
  auto r = run("");
  CHECK(r.code == 2);
  CHECK(r.err.rfind("error: E_CLI_USAGE", 0) == 0);
  r = run("solve --config " + config("unknown.json", R"({"grid":{"time_step":10}})").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("E_CONFIG_UNKNOWN_KEY") != std::string::npos);
  CHECK(r.err.find("grid.time_step") != std::string::npos);
  CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
  r = run("paper 9.9 --out " + (scratch() / "p").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("5.1, 5.2") != std::string::npos);
  r = run("cost --config " + (scratch() / "missing.json").string());
  CHECK(r.code == 2);
}

TEST_CASE("explicit CFL violation reports the required step") {
  const auto c = config("cfl.json", R"({"grid":{"time_steps":50,"space_steps":100},"hjb":{"substeps":1}})");
  const auto r = run("solve --config " + c.string() + " --out " + (scratch() / "cfl").string());
  CHECK(r.code == 2);
  CHECK(r.err.find("E_HJB_CFL") != std::string::npos);
  CHECK(r.err.find("required dt") != std::string::npos);
}

TEST_CASE("solve writes artifacts reproducibly and flags the kink") {
  const auto c = config("solve.json", R"({"model":{"name":"example-viscosity"},"grid":{"time_steps":200,"space_steps":40}})");
  const auto a = scratch() / "solve_a", b = scratch() / "solve_b";
  REQUIRE(run("solve --config " + c.string() + " --out " + a.string()).code == 0);
  REQUIRE(run("solve --config " + c.string() + " --out " + b.string() + " --workers 2").code == 0);
  for (const char* f : {"surface.csv", "residual.csv", "law.csv"}) {
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  const auto manifest = slurp(a / "manifest.json");
  CHECK(manifest.find("\"kink_columns\": \"20\"") != std::string::npos);
  CHECK(manifest.find("\"fingerprint\"") != std::string::npos);
}

TEST_CASE("cost prints value and SE and appends rows") {
  const auto dir = scratch() / "cost";
  auto r = run("cost --config " + config("zero.json", R"({"model":{"name":"zero"},"mc":{"paths":100,"steps":10}})").string() +
               " --out " + dir.string());
  CHECK(r.code == 0);
  CHECK(r.out.find("J = 0  SE = 0") != std::string::npos);
  r = run("cost --config " + config("tree.json", R"({"cost":{"method":"tree","tree_depth":16}})").string() + " --out " +
          dir.string());
  CHECK(r.code == 0);
  const double j = std::stod(r.out.substr(r.out.find("J = ") + 4));
  CHECK(std::fabs(j / std::exp(2.0) - 1.0) < 2e-2);
  const auto csv = slurp(dir / "cost.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("verify exit codes follow the report") {
  const std::string base =
      R"({"model":{"name":"example-viscosity"},"point":{"t":0,"x":0},"mc":{"paths":2000,"steps":40,"sample_times":4,"sample_paths":4},)"
      R"("verify":{"mode":"viscosity","surface":"candidate-viscosity","law_value":[1],"battery_random":0,"triple":)";
  auto r = run("verify --config " + config("v_ok.json", base + "[0,1,0]}}").string() + " --out " +
               (scratch() / "v_ok").string());
  CHECK(r.code == 0);
  CHECK(fs::exists(scratch() / "v_ok" / "report.json"));
  r = run("verify --config " + config("v_bad.json", base + "[0,1,-1]}}").string() + " --out " +
          (scratch() / "v_bad").string());
  CHECK(r.code == 1);
  CHECK(r.out.find("[FAIL] (i)") != std::string::npos);
}

TEST_CASE("assumptions command") {
  const auto dir = scratch() / "assume";
  const auto r = run("assumptions --out " + dir.string());
  CHECK(r.code == 0);
  CHECK(slurp(dir / "assumptions.json").find("\"H1\"") != std::string::npos);
}

TEST_CASE("tolerance overrides change the fingerprint") {
  const auto a = scratch() / "fp_a", b = scratch() / "fp_b";
  const auto c = config("fp.json", R"({"model":{"name":"zero"},"mc":{"paths":10,"steps":2}})");
  REQUIRE(run("cost --config " + c.string() + " --out " + a.string()).code == 0);
  REQUIRE(run("cost --config " + c.string() + " --out " + b.string() + " --tol.z 0.2").code == 0);
  const auto fa = slurp(a / "manifest.json"), fb = slurp(b / "manifest.json");
  CHECK(fa.substr(fa.find("fingerprint"), 40) != fb.substr(fb.find("fingerprint"), 40));
}
