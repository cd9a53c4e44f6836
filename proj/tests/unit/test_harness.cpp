#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "anisodiff/experiments.hpp"
#include "anisodiff/io.hpp"
#include "test_helpers.hpp"

using namespace anisodiff;

TEST_CASE("fit_slope recovers exact power laws") {
  ConvergenceTable t;
  t.n = {16, 32, 64};
  for (int n : t.n) t.error.push_back(std::pow(n, -2.0));
  CHECK(fit_slope(t) == Catch::Approx(2.0).margin(1e-12));

  ConvergenceTable one;
  one.n = {16};
  one.error = {1.0};
  CHECK_THROWS_AS(fit_slope(one), std::invalid_argument);

  ConvergenceTable bad;
  bad.n = {16, 32};
  bad.error = {1.0, 0.0};
  CHECK_THROWS_AS(fit_slope(bad), std::invalid_argument);
}

TEST_CASE("tables round-trip through the tab-separated format") {
  ConvergenceTable t;
  t.n = {21, 41};
  t.error = {0.125, 0.03333333333333333};
  const std::string path =
      (std::filesystem::temp_directory_path() / "anisodiff_table.tsv").string();
  write_table(t, path, {"experiment = test"});
  ConvergenceTable back = read_table(path);
  REQUIRE(back.n.size() == 2);
  CHECK(back.n == t.n);
  CHECK(back.error[0] == t.error[0]);
  CHECK(back.error[1] == t.error[1]);
  std::filesystem::remove(path);
}

TEST_CASE("field dump is row-wise with x varying fastest") {
  Grid2D g = make_grid_2d(0.0, 1.0, 3, 0.0, 2.0, 3);
  std::vector<double> u(g.size(), 0.0);
  const std::string path =
      (std::filesystem::temp_directory_path() / "anisodiff_field.tsv").string();
  write_field(u, g, path);
  std::ifstream is(path);
  std::string line;
  std::vector<std::array<double, 3>> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::array<double, 3> r{};
    ls >> r[0] >> r[1] >> r[2];
    rows.push_back(r);
  }
  REQUIRE(rows.size() == 9);
  for (const auto& r : rows) CHECK(r[2] == 0.0);
  CHECK(rows[0][0] == 0.0);
  CHECK(rows[1][0] == 0.5);  // x advances first
  CHECK(rows[0][1] == rows[1][1]);
  CHECK(rows[3][1] == 1.0);  // then y
  std::filesystem::remove(path);
}

TEST_CASE("numeric formatting is locale-independent with a '.' decimal point") {
  const std::string s = format_double(1.0 / 3.0);
  CHECK(s.find('.') != std::string::npos);
  CHECK(s.find(',') == std::string::npos);
  CHECK(s.substr(0, 8) == "0.333333");
  CHECK(format_double(2.5e-13, 6) == "2.5e-13");
}

TEST_CASE("config files parse key = value lines with comments") {
  const std::string path =
      (std::filesystem::temp_directory_path() / "anisodiff_cfg.txt").string();
  {
    std::ofstream os(path);
    os << "# comment line\n"
       << "order = 4\n"
       << "t_final = 0.25  # trailing comment\n"
       << "out_dir = /tmp/results\n";
  }
  auto kv = read_config_file(path);
  CHECK(kv.at("order") == "4");
  CHECK(kv.at("t_final") == "0.25");
  CHECK(kv.at("out_dir") == "/tmp/results");
  std::filesystem::remove(path);
}

TEST_CASE("experiment config validation") {
  ExperimentConfig cfg;
  cfg.experiment = "mms";
  cfg.order = 3;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.order = 2;
  cfg.resolutions = {21, 21};
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.resolutions = {21, 41};
  cfg.experiment = "bogus";
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
  cfg.experiment = "mms";
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("contour segments locate a linear level set") {
  Grid2D g = make_grid_2d(0.0, 1.0, 11, 0.0, 1.0, 11);
  std::vector<double> u(g.size());
  for (int i = 0; i < 11; ++i)
    for (int j = 0; j < 11; ++j) u[g.flat(i, j)] = g.x(i);
  auto segs = contour_segments(u, g, 0.37);
  CHECK(segs.size() == 10);  // one vertical segment per cell row
  for (const auto& s : segs) {
    CHECK(s.x1 == Catch::Approx(0.37).margin(1e-12));
    CHECK(s.x2 == Catch::Approx(0.37).margin(1e-12));
  }
}

TEST_CASE("contour segments trace a radial bump consistently") {
  Grid2D g = make_grid_2d(-1.0, 1.0, 41, -1.0, 1.0, 41);
  std::vector<double> u(g.size());
  for (int i = 0; i < 41; ++i)
    for (int j = 0; j < 41; ++j)
      u[g.flat(i, j)] = g.x(i) * g.x(i) + g.y(j) * g.y(j);
  auto segs = contour_segments(u, g, 0.25);  // circle of radius 1/2
  CHECK(segs.size() > 20);
  for (const auto& s : segs) {
    for (auto [x, y] : {std::pair{s.x1, s.y1}, std::pair{s.x2, s.y2}}) {
      CHECK(std::sqrt(x * x + y * y) == Catch::Approx(0.5).margin(0.02));
    }
  }
}

TEST_CASE("relative l2 error of identical fields vanishes") {
  Grid2D g = make_grid_2d(0.0, 1.0, 5, 0.0, 1.0, 5);
  std::vector<double> u = random_vector(g.size(), 2);
  CHECK(relative_l2_error(u, u, g) == 0.0);
  std::vector<double> v = u;
  for (auto& x : v) x *= 1.01;
  CHECK(relative_l2_error(v, u, g) == Catch::Approx(0.01).epsilon(1e-6));
}

TEST_CASE("mms runner produces decreasing errors on refinement") {
  ExperimentConfig cfg;
  cfg.experiment = "mms";
  cfg.order = 2;
  cfg.resolutions = {21, 31};
  cfg.kappa_perp = {1.0};
  cfg.t_final = 0.02;
  auto tables = run_mms(cfg);
  REQUIRE(tables.size() == 1);
  REQUIRE(tables[0].table.error.size() == 2);
  CHECK(tables[0].table.error[0] > tables[0].table.error[1]);
  CHECK(tables[0].table.error[1] > 0.0);
}

TEST_CASE("nimrod exact solution spot value") {
  // (1 - e^{-1}) psi(0,0) at t_f = 1/(2 pi^2), kappa = 1
  const double tf = nimrod::default_t_final();
  CHECK(nimrod::exact(0.0, 0.0, tf, 1.0) == Catch::Approx(0.6321205588).epsilon(1e-9));
  // kappa -> 0 limit: u = 2 pi^2 t psi
  CHECK(nimrod::exact(0.0, 0.0, tf, 0.0) == Catch::Approx(1.0).epsilon(1e-12));
}
