#include <doctest.h>

#include <algorithm>
#include <filesystem>

#include "bhplab/domain_io.hpp"
#include "bhplab/error.hpp"

using namespace bhplab;

TEST_CASE("preset list includes the standard domains") {
  const auto names = list_domains();
  CHECK(names.size() >= 5);
  for (const char* n : {"square", "slit_square", "comb_3", "L_shape", "double_slit"}) {
    CAPTURE(n);
    CHECK(std::find(names.begin(), names.end(), n) != names.end());
  }
  for (const auto& n : names) CHECK_NOTHROW(preset_domain(n).validate());
}

TEST_CASE("domain text round-trips exactly") {
  for (const auto& name : list_domains()) {
    const Domain d = preset_domain(name);
    CHECK(parse_domain(format_domain(d)) == d);
  }
  Domain odd;
  odd.name = "odd";
  odd.rectangles = {{0.1, 0.2, 0.7000000000000001, 1.0 / 3.0}};
  odd.slits = {{{0.1, 0.25}, {0.3, 0.25}}};
  CHECK(parse_domain(format_domain(odd)) == odd);

  const auto path = std::filesystem::temp_directory_path() / "bhplab_domain_roundtrip.txt";
  write_domain(odd, path.string());
  CHECK(read_domain(path.string()) == odd);
  CHECK(load_domain(path.string()) == odd);
  std::filesystem::remove(path);
}

TEST_CASE("domain parser accepts comments and rejects garbage") {
  const Domain d = parse_domain("# unit square\nname = s\n[rectangles]\n0 0 1 1  # the only one\n[slits]\n");
  CHECK(d.name == "s");
  CHECK(d.rectangles.size() == 1);
  CHECK(d.slits.empty());
  for (const char* bad : {"[rectangles]\n0 0 1\n", "[circles]\n", "[rectangles]\n0 0 1 x\n", "0 0 1 1\n"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(parse_domain(bad), Error);
  }
}

TEST_CASE("unknown preset is a config error") {
  try {
    load_domain("preset:nope");
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ConfigError);
  }
}
