#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "rydloss/io.hpp"
#include "rydloss/medium.hpp"

using namespace rydloss;

TEST_CASE("config parsing: sections, comments, types, overrides") {
  const auto c = Config::parse(R"(# preset
omega_c_MHz = 25      # control
name = "paper # not a comment"
flag = true
[simulate]
grid = 96
)");
  CHECK(c.number("omega_c_MHz") == 25.0);
  CHECK(c.string_or("name", "") == "paper # not a comment");
  CHECK(c.to_json()["flag"] == true);
  CHECK(c.number("simulate.grid") == 96.0);
  CHECK(c.medium_values().count("simulate.grid") == 0);
  CHECK(c.medium_values().at("omega_c_MHz") == 25.0);

  auto d = c;
  d.set("omega_c_MHz=23.5");
  CHECK(d.number("omega_c_MHz") == 23.5);
  CHECK_THROWS_AS(d.set("novalue"), ValidationError);
  CHECK_THROWS_AS(Config::parse("just words"), ValidationError);
  CHECK_THROWS_AS(Config::parse("[open"), ValidationError);
  CHECK_THROWS_AS(c.number("missing"), ValidationError);
  CHECK_THROWS_AS(c.number("name"), ValidationError);
}

TEST_CASE("bundled presets build valid media") {
  for (const char* name : {"paper.toml", "experiment.toml"}) {
    const auto path = std::filesystem::path(RYDLOSS_SOURCE_DIR) / "presets" / name;
    const auto c = Config::load(path.string());
    const auto p = from_experiment_units(c.medium_values(),
                                         profile_from_string(c.string_or("profile", "gaussian")));
    CHECK_NOTHROW(p.validate());
    CHECK(p.od == 37.0);
    CHECK(p.sigma_z == 40.0);
  }
}

TEST_CASE("grid specifications") {
  const auto g = parse_grid("10:30:0.5", "delta");
  CHECK(g.size() == 41);
  CHECK(g.front() == 10.0);
  CHECK(g.back() == doctest::Approx(30.0));
  CHECK(parse_grid("-3:3:0.25", "deltas").size() == 25);
  CHECK(parse_grid("1, 2.5,4", "x") == std::vector<double>{1.0, 2.5, 4.0});
  CHECK(parse_grid("7", "x") == std::vector<double>{7.0});
  CHECK_THROWS_AS(parse_grid("1:2", "x"), ValidationError);
  CHECK_THROWS_AS(parse_grid("3:1:1", "x"), ValidationError);
  CHECK_THROWS_AS(parse_grid("1:2:0", "x"), ValidationError);
  CHECK_THROWS_AS(parse_grid("a,b", "x"), ValidationError);
  CHECK_THROWS_AS(parse_grid("", "x"), ValidationError);
}

TEST_CASE("atomic writes replace whole files and leave no temporaries") {
  const auto dir = std::filesystem::temp_directory_path() / "rydloss_io_test";
  std::filesystem::remove_all(dir);
  const auto file = dir / "sub" / "out.txt";
  atomic_write(file.string(), "first");
  atomic_write(file.string(), "second");
  std::ifstream in(file);
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "second");
  std::size_t entries = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir / "sub")) ++entries;
  CHECK(entries == 1);
  CHECK_THROWS_AS(atomic_write("/proc/rydloss/forbidden.txt", "x"), ValidationError);
  std::filesystem::remove_all(dir);
}
