#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include <doctest.h>

#include "koopeig/cli.hpp"
#include "koopeig/keig.hpp"

using namespace koopeig;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / ("koopeig_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kObserver = R"({
  "system": {"name": "lin2d", "params": [1, 2]},
  "manifold": {"type": "segment", "from": [0.25, 1], "to": [3, 1], "s_range": [0.25, 3], "n": 201},
  "t_window": [0, 1],
  "eigen": {"lambda": 2, "h": "s"},
  "lattice": {"ranges": [[1, 2, 12], [1, 7, 12]]}
})";

const char* kDecompose = R"({
  "system": "vdp",
  "t_window": [0, 2],
  "grid": {"n": 12, "m": 12},
  "target": {"type": "gaussian", "amplitude": 3, "width": 10},
  "lambda_sweep": {"re_range": [-5, 5], "count": 41},
  "K": 4,
  "certify_points": 5
})";

cli::RunConfig with_out(const char* text, const fs::path& out) {
  auto cfg = cli::parse_config(text);
  cli::apply_overrides(cfg, {.output_dir = out});
  return cfg;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = cli::parse_config(kObserver);
  CHECK(cfg.system.name == "lin2d");
  CHECK(cfg.manifold->type == "segment");
  CHECK(cfg.manifold->s_range->second == 3.0);
  CHECK(cfg.lambda == Complex(2.0, 0.0));
  CHECK(cfg.h.terms.size() == 1);
  CHECK(cfg.h.terms[0].power == 1.0);
  CHECK(cfg.lattice->counts == std::vector<std::size_t>{12, 12});
  CHECK(cfg.K == 8);
  CHECK(cfg.integrator_tol == 1e-10);

  const auto d = cli::parse_config(kDecompose);
  CHECK(d.lambda_sweep.re_count == 41);
  CHECK(d.target->terms[0].width == 10.0);
  CHECK(cli::build_candidates(d.lambda_sweep).size() == 41);

  const auto list = cli::parse_config(R"({"lambda_sweep": {"list": [1, [2, -1]]}, "eigen": {"h": "s^2.5"}})");
  CHECK(cli::build_candidates(list.lambda_sweep) == std::vector<Complex>{1.0, Complex(2.0, -1.0)});
  CHECK(list.h.terms[0].power == 2.5);
}

TEST_CASE("config diagnostics name the field") {
  auto message = [](const char* text) {
    try {
      (void)cli::parse_config(text);
    } catch (const cli::ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message(R"({"grid": {"n": -3}})").find("grid.n") != std::string::npos);
  CHECK(message(R"({"sytem": "lin2d"})").find("sytem") != std::string::npos);
  CHECK(message(R"({"system": "lorenz"})").find("system.name") != std::string::npos);
  CHECK(message(R"({"target": {"terms": [{"type": "gaussian", "width": 0}]}})").find("target.terms[0].width") !=
        std::string::npos);
  CHECK(message("{\n  \"K\": 3,\n  \"x\" 1\n}").find("line 3") != std::string::npos);
  CHECK(message(R"({"t_window": [0.5, 1]})").find("t_window") != std::string::npos);
}

TEST_CASE("overrides") {
  auto cfg = cli::parse_config("{}");
  cli::apply_overrides(cfg, {.output_dir = "elsewhere", .tol = 1e-9, .seed = 42, .threads = 3});
  CHECK(cfg.output_dir == "elsewhere");
  CHECK(cfg.integrator_tol == 1e-9);
  CHECK(cfg.seed == 42);
  CHECK(cfg.threads == 3);
  CHECK(cfg.echo["seed"] == 42);
  CHECK_FALSE(cfg.echo.contains("threads"));
}

TEST_CASE("number formatting and csv round trip") {
  CHECK(cli::format_number(0.1) == "0.10000000000000001");
  CHECK(std::stod(cli::format_number(1.0 / 3.0)) == 1.0 / 3.0);
  const auto dir = scratch("csv");
  cli::write_file_atomic(dir / "t.csv", "a,b\n1,2.5\n-3,1e-300\n");
  const auto t = cli::read_csv(dir / "t.csv");
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  CHECK(t.rows.size() == 2);
  CHECK(t.rows[1][1] == 1e-300);
  CHECK_FALSE(fs::exists(dir / "t.csv.tmp"));
}

TEST_CASE("eval writes a grid that re-evaluates") {
  const auto dir = scratch("eval");
  std::ostringstream log;
  const auto cfg = with_out(kObserver, dir);
  REQUIRE(cli::cmd_eval(cfg, log) == cli::kOk);
  const auto table = cli::read_csv(dir / "keig_grid.csv");
  CHECK(table.header == std::vector<std::string>{"x1", "x2", "re_phi", "im_phi", "r_star", "s_star"});
  REQUIRE(table.rows.size() >= 10);

  const auto system = cli::build_system(cfg);
  const auto manifold = cli::build_manifold(cfg, system);
  const Keig keig(cfg.lambda, DataFunction::sample(manifold, cli::build_data_function(cfg.h)), manifold,
                  system.field, cli::build_window(cfg, system));
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<std::size_t> pick(0, table.rows.size() - 1);
  for (int k = 0; k < 10; ++k) {
    const auto& row = table.rows[pick(rng)];
    const Complex v = keig(State{row[0], row[1]});
    CHECK(std::abs(v - Complex(row[2], row[3])) <= 1e-9);
    // x1 sqrt(x2) in closed form.
    CHECK(std::abs(row[2] - row[0] * std::sqrt(row[1])) <= 1e-6);
  }
  const auto summary = nlohmann::json::parse(slurp(dir / "eval_summary.json"));
  CHECK(summary["certification"]["pass"] == true);
}

TEST_CASE("eval outside the swept domain exits 3") {
  const auto dir = scratch("eval_outside");
  auto cfg = with_out(kObserver, dir);
  cfg.lattice = cli::LatticeSpec{{{10, 11}, {100, 101}}, {3, 3}};
  std::ostringstream log;
  CHECK(cli::cmd_eval(cfg, log) == cli::kDomainFailure);
}

TEST_CASE("Hopf eval certifies itself") {
  const auto dir = scratch("hopf");
  const auto cfg = with_out(R"({
    "system": {"name": "hopf", "params": [1]},
    "manifold": {"type": "circle", "center": [0, 0], "radius": 5, "n": 721},
    "t_window": [0, 2],
    "eigen": {"lambda": [-1, 0.5], "h": "s"},
    "lattice": {"ranges": [[-4, 4, 9], [-4, 4, 9]]}
  })",
                            dir);
  std::ostringstream log;
  REQUIRE(cli::cmd_eval(cfg, log) == cli::kOk);
  const auto summary = nlohmann::json::parse(slurp(dir / "eval_summary.json"));
  CHECK(summary["certification"]["koopman_residual"].get<double>() <= 1e-4);
}

TEST_CASE("decompose outputs and determinism") {
  const auto a = scratch("dec_a");
  const auto b = scratch("dec_b");
  std::ostringstream log;
  auto cfg_a = with_out(kDecompose, a);
  auto cfg_b = with_out(kDecompose, b);
  cfg_b.threads = 3;
  REQUIRE(cli::cmd_decompose(cfg_a, log) == cli::kOk);
  REQUIRE(cli::cmd_decompose(cfg_b, log) == cli::kOk);
  for (const char* f : {"residuals.csv", "lambda_curves.csv", "h_functions.csv", "term_grid.csv"}) {
    CHECK(fs::exists(a / f));
    CHECK(slurp(a / f) == slurp(b / f));
  }
  // The echo records the output directory, which differs here.
  auto ja = nlohmann::json::parse(slurp(a / "decomposition.json"));
  auto jb = nlohmann::json::parse(slurp(b / "decomposition.json"));
  ja.erase("config_echo");
  jb.erase("config_echo");
  CHECK(ja == jb);
  CHECK(ja["terms"].size() == 4);
  const auto res = cli::read_csv(a / "residuals.csv");
  for (std::size_t k = 1; k < res.rows.size(); ++k) CHECK(res.rows[k][1] < res.rows[k - 1][1]);

  const auto again = scratch("dec_a");
  REQUIRE(cli::cmd_decompose(cfg_a, log) == cli::kOk);
  CHECK(slurp(again / "decomposition.json").size() > 0);
}

TEST_CASE("decompose of a zero target exits 4") {
  const auto dir = scratch("dec_zero");
  auto cfg = with_out(kDecompose, dir);
  cfg.target = cli::TargetSpec{{cli::TargetSpec::Term{.kind = "gaussian", .amplitude = 0.0}}};
  std::ostringstream log;
  CHECK(cli::cmd_decompose(cfg, log) == cli::kEmptyTarget);
}

TEST_CASE("spectrum summary") {
  const auto dir = scratch("spectrum");
  std::ostringstream log;
  REQUIRE(cli::cmd_spectrum(with_out("{}", dir), log) == cli::kOk);
  const auto summary = nlohmann::json::parse(slurp(dir / "spectrum_summary.json"));
  CHECK(summary["slope"].get<double>() >= -1.1);
  CHECK(summary["slope"].get<double>() <= -0.9);
  CHECK(summary["wedge"]["pass"] == true);
  CHECK(summary["wedge"]["residuals"].size() == 25);
  CHECK(cli::read_csv(dir / "spectrum_scaling.csv").rows.size() == 7);

  const auto single = scratch("spectrum_single");
  REQUIRE(cli::cmd_spectrum(with_out(R"({"spectrum": {"n_list": [16]}})", single), log) == cli::kOk);
  CHECK_FALSE(nlohmann::json::parse(slurp(single / "spectrum_summary.json")).contains("slope"));
}

TEST_CASE("command-line exit codes") {
  const auto dir = scratch("binary");
  const std::string exe = KOOPEIG_CLI_PATH;
  auto run = [&](const std::string& args) {
    const int status = std::system((exe + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  {
    std::ofstream(dir / "bad.json") << "{\"K\": 0}";
    std::ofstream(dir / "good.json") << kObserver;
  }
  CHECK(run("decompose --config " + (dir / "bad.json").string()) == 2);
  CHECK(run("eval --config " + (dir / "good.json").string() + " --out " + (dir / "o").string()) == 0);
  CHECK(fs::exists(dir / "o" / "keig_grid.csv"));
  CHECK(run("spectrum --spectrum-demo --out " + (dir / "s").string()) == 0);
  CHECK(run("eval") == 2);
}
