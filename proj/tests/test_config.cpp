#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "crt/config.hpp"
#include "crt/errors.hpp"

using namespace crt;

TEST_CASE("defaults cover the whole schema") {
  const auto c = Config::defaults();
  for (const auto& k : Config::schema()) CHECK(c.str(k.key) == k.def);
  CHECK(c.num("budget.eps_out") == doctest::Approx(0.05));
  CHECK(c.integer("dynamics.T") == 50);
  CHECK_FALSE(c.flag("resources.qram"));
  CHECK(c.list("bench.alphas") == std::vector<double>{0.0, 0.5, 1.0});
}

TEST_CASE("text parsing, sections and comments") {
  auto c = Config::from_text("# comment\n[dynamics]\nT = 7  # inline\n\n[bench]\nalphas = 0 1\n", "t");
  CHECK(c.integer("dynamics.T") == 7);
  CHECK(c.list("bench.alphas").size() == 2);
  CHECK(c.origin() == "t");
  CHECK_THROWS_AS(Config::from_text("[dynamics]\nbogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::from_text("T = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::from_text("[dynamics\nT = 1\n"), ConfigError);
  CHECK_THROWS_AS(Config::from_text("[dynamics]\nT 1\n"), ConfigError);
}

TEST_CASE("typed access rejects malformed values") {
  auto c = Config::defaults();
  c.set("dynamics.T", "2.5");
  CHECK_THROWS_AS(c.integer("dynamics.T"), ConfigError);
  c.set("dynamics.T", "abc");
  CHECK_THROWS_AS(c.num("dynamics.T"), ConfigError);
  c.set("resources.qram", "maybe");
  CHECK_THROWS_AS(c.flag("resources.qram"), ConfigError);
  CHECK_THROWS_AS(c.set("nope.key", "1"), ConfigError);
  CHECK_THROWS_AS(c.str("nope.key"), ConfigError);
}

TEST_CASE("presets, files and hashing") {
  CHECK(Config::is_preset("toy_affine"));
  CHECK_THROWS_AS(Config::preset("toy_missing"), ConfigError);
  const auto a = Config::load("toy_affine");
  const auto n = Config::load("toy_noncontractive");
  CHECK(a.origin() == "preset:toy_affine");
  CHECK(n.integer("lift.N") == 2);
  CHECK(a.hash() != n.hash());
  const std::string path = "cfg_roundtrip.ini";
  {
    std::ofstream f(path);
    f << a.dump();
  }
  const auto b = Config::load(path);
  std::remove(path.c_str());
  CHECK(b.dump() == a.dump());
  CHECK(b.hash() == a.hash());
  CHECK(hex64(b.hash()).size() == 16);
  CHECK_THROWS_AS(Config::load("missing_file.ini"), IoError);
  CHECK(Config::load("").dump() == Config::defaults().dump());
}
