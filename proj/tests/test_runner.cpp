#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "bhplab/error.hpp"
#include "bhplab/runner.hpp"

using namespace bhplab;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("bhplab_runner_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

ErrorKind parse_kind(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("accepted: " << text);
  return ErrorKind::SingularSystem;
}

const char* kCapacity =
    "# small capacity run\n"
    "[run]\n"
    "experiment = capacity\n"
    "domain = preset:big_square\n"
    "h = 1/32\n"
    "seed = 3\n"
    "[params]\n"
    "center = 0, 0\n"
    "R = 1\n"
    "radii = 0.5, 0.25\n";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(BHPLAB_CLI) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("config parsing") {
  const RunConfig c = parse_config(kCapacity, "/base");
  CHECK(c.experiment == "capacity");
  CHECK(c.h == doctest::Approx(1.0 / 32));
  CHECK(c.seed == 3);
  CHECK(c.stencil == Stencil::eight);
  CHECK(c.params.at("R") == "1");
  CHECK(c.resolve("preset:big_square") == "preset:big_square");
  CHECK(c.resolve("dom.txt") == "/base/dom.txt");

  CHECK(parse_kind("[run]\nexperiment capacity\n") == ErrorKind::ParseError);
  CHECK(parse_kind("[nope]\nx = 1\n") == ErrorKind::ParseError);
  CHECK(parse_kind("[run]\nexperiment = capacity\n") == ErrorKind::ConfigError);  // no h
  CHECK(parse_kind("[run]\nexperiment = teleport\nh = 1/8\n") == ErrorKind::ConfigError);
  CHECK(parse_kind("[run]\nexperiment = capacity\nh = -1\n") == ErrorKind::ConfigError);
  CHECK(parse_kind("[run]\nexperiment = capacity\nh = 1/8\nstencil = 12\n") == ErrorKind::ConfigError);
  CHECK(parse_kind("[run]\nexperiment = capacity\nh = 1/8\ncolour = red\n") == ErrorKind::ConfigError);
}

TEST_CASE("config hash ignores output location and worker count") {
  RunConfig a = parse_config(kCapacity);
  RunConfig b = a;
  b.output = "elsewhere";
  b.workers = 4;
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  b.params["R"] = "0.9";
  CHECK(a.hash() != b.hash());
  RunConfig c = a;
  c.seed = 4;
  CHECK(a.hash() != c.hash());
}

TEST_CASE("experiment catalogue") {
  const auto kinds = experiment_kinds();
  for (const char* k : {"capacity", "width", "harnack", "heat", "carleson", "green_bhp", "solution_bhp", "decay",
                        "geometry_audit"}) {
    CHECK(std::find(kinds.begin(), kinds.end(), k) != kinds.end());
    CHECK(!experiment_parameters(k).empty());
  }
}

TEST_CASE("validation") {
  CHECK(validate_config(parse_config(kCapacity)).empty());

  RunConfig missing = parse_config(kCapacity);
  missing.params.erase("R");
  const auto d1 = validate_config(missing);
  REQUIRE(!d1.empty());
  CHECK(d1[0].rfind("error:", 0) == 0);

  RunConfig unknown = parse_config(kCapacity);
  unknown.params["Q"] = "1";
  CHECK(!validate_config(unknown).empty());

  RunConfig coarse = parse_config(
      "[run]\nexperiment = heat\ndomain = preset:slit_square\nh = 0.6\n[params]\npoint = 0.75, 0.25\nt = 0.1\n");
  bool warned = false;
  for (const std::string& line : validate_config(coarse)) warned = warned || line.rfind("warning:", 0) == 0;
  CHECK(warned);
}

TEST_CASE("runs are reproducible byte for byte") {
  const fs::path dir = scratch("repro");
  RunConfig c = parse_config(kCapacity);
  c.output = (dir / "a").string();
  const RunResult first = run_experiment(c);
  c.output = (dir / "b").string();
  c.workers = 2;
  run_experiment(c);
  CHECK(std::find(first.files.begin(), first.files.end(), (dir / "a" / "capacity.csv").string()) !=
        first.files.end());
  const std::string csv = slurp(dir / "a" / "capacity.csv");
  CHECK(csv == slurp(dir / "b" / "capacity.csv"));
  CHECK(csv.rfind("# bhplab experiment=capacity config_hash=" + c.hash() + " seed=3\n", 0) == 0);
  CHECK(csv.find("r,R,cap,integral,rho,disk_oracle\n") != std::string::npos);
  CHECK(fs::exists(dir / "a" / "summary.txt"));
  CHECK(first.summary.get("experiment") == "capacity");
  CHECK(first.summary.get("config_hash") == c.hash());
  fs::remove_all(dir);
}

TEST_CASE("parallel_for") {
  std::vector<int> seen(50, 0);
  parallel_for(50, 4, [&](int i) { seen[i] += 1; });
  CHECK(std::count(seen.begin(), seen.end(), 1) == 50);
  try {
    parallel_for(20, 3, [](int i) {
      if (i == 7 || i == 13) throw Error(ErrorKind::SingularSystem, std::to_string(i));
    });
    FAIL("no exception");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("7") != std::string::npos);
  }
}

TEST_CASE("command line exit codes") {
  const fs::path dir = scratch("cli");
  {
    std::ofstream(dir / "ok.ini") << kCapacity;
    std::ofstream(dir / "bad.ini") << "[run]\nexperiment = teleport\nh = 1/8\n";
    std::ofstream(dir / "fine.ini") << "[run]\nexperiment = green_bhp\ndomain = preset:square\nh = 1/32\n"
                                       "[params]\nxi = 0.5, 0\nradii = 0.01\nA0 = 8\n";
  }
  CHECK(run_cli("list-domains") == 0);
  CHECK(run_cli("validate " + (dir / "ok.ini").string()) == 0);
  CHECK(run_cli("validate " + (dir / "bad.ini").string()) == 2);
  CHECK(run_cli("run " + (dir / "ok.ini").string() + " --out " + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "capacity.csv"));
  CHECK(run_cli("run " + (dir / "missing.ini").string()) == 2);
  CHECK(run_cli("run " + (dir / "bad.ini").string()) == 2);
  CHECK(run_cli("run " + (dir / "fine.ini").string() + " --out " + (dir / "fine").string()) == 3);

  const std::string listing = [&] {
    const std::string cmd = std::string(BHPLAB_CLI) + " list-domains > " + (dir / "list.txt").string();
    CHECK(std::system(cmd.c_str()) == 0);
    return slurp(dir / "list.txt");
  }();
  CHECK(std::count(listing.begin(), listing.end(), '\n') >= 5);
  fs::remove_all(dir);
}
