#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "hsm/raster_io.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(HSM_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch_dir() {
  const fs::path d = fs::temp_directory_path() / ("hsm_cli_test_" + std::to_string(::getpid()));
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("cli: generate, match, eval, augment") {
  const fs::path d = scratch_dir();
  const std::string s = (d / "s").string();
  REQUIRE(run("generate --width 256 --height 128 --d0 16 --smoothing 4 --out-prefix " + s) == 0);
  CHECK(fs::exists(s + "-left.pfm"));
  CHECK(fs::exists(s + "-gt.pfm"));

  const std::string m = (d / "m").string();
  REQUIRE(run("match " + s + "-left.pfm " + s + "-right.pfm --dmax 64 --out-prefix " + m) == 0);
  for (const char* st : {"F1", "F2", "F3"}) CHECK(fs::exists(m + "-" + st + ".pfm"));
  CHECK(slurp(m + "-manifest.json").find("-F3.pfm") != std::string::npos);

  const std::string z = (d / "z").string();
  REQUIRE(run("match " + s + "-left.pfm " + s + "-right.pfm --dmax 64 --budget-ms 0 --out-prefix " + z) == 0);
  CHECK(fs::exists(z + "-F1.pfm"));
  CHECK_FALSE(fs::exists(z + "-F2.pfm"));

  const fs::path csv = d / "eval.csv";
  REQUIRE(run("eval " + s + "-gt.pfm " + s + "-gt.pfm --out " + csv.string()) == 0);
  const std::string text = slurp(csv);
  CHECK(text.rfind("range,bad1,bad2,bad4,avgerr", 0) == 0);
  CHECK(text.find("All,0,0,0,0") != std::string::npos);

  const std::string a = (d / "a").string();
  REQUIRE(run("augment " + s + "-left.pfm " + s + "-right.pfm --seed 3 --out-left " + a + "-l.pfm --out-right " + a +
              "-r.pfm --out-spec " + a + ".json") == 0);
  const std::string spec1 = slurp(a + ".json");
  const hsm::Bytes right1 = hsm::read_file(a + "-r.pfm");
  REQUIRE(run("augment " + s + "-left.pfm " + s + "-right.pfm --seed 3 --out-left " + a + "-l.pfm --out-right " + a +
              "-r.pfm --out-spec " + a + ".json") == 0);
  CHECK(spec1 == slurp(a + ".json"));
  CHECK(right1 == hsm::read_file(a + "-r.pfm"));
  fs::remove_all(d);
}

TEST_CASE("cli: error exit codes") {
  const fs::path d = scratch_dir();
  const fs::path bad = d / "bad.pfm";
  std::ofstream(bad) << "P7\n1 1\n-1.0\n";
  CHECK(run("eval " + bad.string() + " " + bad.string()) == 3);
  const fs::path cfg = d / "bad.cfg";
  std::ofstream(cfg) << "decoder.alpha=7\n";
  CHECK(run("match " + bad.string() + " " + bad.string() + " --config " + cfg.string()) == 2);
  CHECK(run("frobnicate") != 0);
  fs::remove_all(d);
}
