#include <fstream>

#include "dg/config.hpp"
#include "doctest.h"

using namespace dg;

namespace {

std::string write_cfg(const std::string& name, const std::string& body) {
  std::string path = "build/" + name;
  std::ofstream out(path);
  out << body;
  return path;
}

}  // namespace

TEST_CASE("config parses keys, comments, and typed getters") {
  std::string path = write_cfg("t_basic.cfg",
                               "# comment line\n"
                               "sim.dt = 0.01\n"
                               "sim.iterations = 35\n"
                               "opt.pattern = true\n"
                               "paths.pattern = assets/strip.obj\n"
                               "scene.pins = 0,1,2\n"
                               "body.nu = 0.02, -0.01\n");
  Config cfg(path);
  CHECK(cfg.get_double("sim.dt", 0.0) == 0.01);
  CHECK(cfg.get_int("sim.iterations", 0) == 35);
  CHECK(cfg.get_bool("opt.pattern", false));
  CHECK(cfg.get_str("paths.pattern", "") == "assets/strip.obj");
  CHECK(cfg.get_int_list("scene.pins", {}) == std::vector<int>{0, 1, 2});
  CHECK(cfg.get_list("body.nu", {}) == std::vector<double>{0.02, -0.01});
  // Defaults pass through for absent keys.
  CHECK(cfg.get_double("sim.damping", 0.998) == 0.998);
  CHECK(!cfg.has("sim.damping"));
}

TEST_CASE("command-line overrides replace file values") {
  std::string path = write_cfg("t_override.cfg", "sim.dt = 0.01\nopt.mode = cage\n");
  Config cfg(path);
  cfg.apply_overrides({"--sim.dt", "0.02", "--opt.mode", "direct", "--extra.key", "7"});
  CHECK(cfg.get_double("sim.dt", 0.0) == 0.02);
  CHECK(cfg.get_str("opt.mode", "") == "direct");
  CHECK(cfg.get_int("extra.key", 0) == 7);
}

TEST_CASE("malformed overrides and missing required keys throw with the offending token") {
  Config cfg;
  CHECK_THROWS_WITH_AS(cfg.apply_overrides({"sim.dt", "0.02"}),
                       doctest::Contains("sim.dt"), std::runtime_error);
  CHECK_THROWS_WITH_AS(cfg.apply_overrides({"--sim.dt"}),
                       doctest::Contains("sim.dt"), std::runtime_error);
  CHECK_THROWS_WITH_AS((void)cfg.require_str("paths.pattern"),
                       doctest::Contains("paths.pattern"), std::runtime_error);
}

TEST_CASE("type errors name the key") {
  std::string path = write_cfg("t_badtype.cfg", "sim.dt = banana\n");
  Config cfg(path);
  CHECK_THROWS_WITH_AS((void)cfg.get_double("sim.dt", 0.0),
                       doctest::Contains("sim.dt"), std::runtime_error);
}

TEST_CASE("echoed effective config reproduces the same values") {
  std::string path = write_cfg("t_echo.cfg",
                               "sim.dt = 0.0125\n"
                               "opt.pattern = true\n"
                               "scene.pins = 3,1,4\n");
  Config cfg(path);
  cfg.apply_overrides({"--sim.iterations", "42"});
  // Read some keys (observed) and leave others untouched; echo must cover both.
  (void)cfg.get_double("sim.dt", 0.0);
  (void)cfg.get_int("sim.iterations", 0);
  (void)cfg.get_double("sim.damping", 0.998);  // default, also recorded

  cfg.echo("build/t_echo_out.cfg");
  Config re("build/t_echo_out.cfg");
  CHECK(re.get_double("sim.dt", 0.0) == 0.0125);
  CHECK(re.get_int("sim.iterations", 0) == 42);
  CHECK(re.get_double("sim.damping", 0.0) == 0.998);
  CHECK(re.get_bool("opt.pattern", false));
  CHECK(re.get_int_list("scene.pins", {}) == std::vector<int>{3, 1, 4});
}

TEST_CASE("loading a missing file throws") {
  Config cfg;
  CHECK_THROWS_AS(cfg.load("build/definitely_missing.cfg"), std::runtime_error);
}
