#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "koopeig/benchmarks.hpp"
#include "koopeig/manifold.hpp"
#include "koopeig/spectrum.hpp"
#include "koopeig/types.hpp"

namespace koopeig::cli {

enum ExitCode : int {
  kOk = 0,
  kFailure = 1,
  kConfigError = 2,
  kDomainFailure = 3,
  kEmptyTarget = 4,
};

/// Parse or validation failure, with the JSON path of the offending field
/// (or line/column for syntax errors).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SystemSpec {
  std::string name = "lin2d";
  std::vector<double> params;
};

/// {type: "segment", from, to, n, s_range?} | {type: "circle", center,
/// radius, arc, n} | {type: "point", x}
struct ManifoldSpec {
  std::string type;
  State from;
  State to;
  std::optional<std::pair<double, double>> s_range;
  State center;
  double radius = 1.0;
  std::pair<double, double> arc{0.0, 1.0};
  std::size_t n = 201;
  double point = 0.0;
};

/// Sum of coeff * s^power.
struct DataSpec {
  struct Term {
    Complex coeff{1.0, 0.0};
    double power = 0.0;
  };
  std::vector<Term> terms{Term{}};
};

/// Sum of builtins: gaussian amplitude * exp(-|x - center|^2 / width),
/// monomials coeff * prod x_k^{p_k}, and "eigenfunction" (the pullback
/// eigenfunction with the given lambda and h on the run's manifold).
struct TargetSpec {
  struct Term {
    std::string kind;  // "gaussian" | "monomial" | "eigenfunction"
    double amplitude = 1.0;
    double width = 1.0;
    State center;
    Complex coeff{1.0, 0.0};
    std::vector<double> powers;
    Complex lambda{1.0, 0.0};
    DataSpec h;
  };
  std::vector<Term> terms;
};

struct LambdaSweepSpec {
  std::vector<Complex> explicit_list;
  std::pair<double, double> re_range{-5.0, 5.0};
  std::pair<double, double> im_range{0.0, 0.0};
  std::size_t re_count = 101;
  std::size_t im_count = 1;
  bool refine = true;
};

/// Per-axis [lo, hi, count] ranges of the evaluation lattice.
struct LatticeSpec {
  std::vector<std::pair<double, double>> ranges;
  std::vector<std::size_t> counts;
};

struct SpectrumSpec {
  double omega = 1.0;
  double t = 1.0;
  std::vector<int> n_list{4, 8, 16, 32, 64, 128, 256};
  std::size_t quad_points = 256;
  Wedge wedge;
  std::vector<Complex> wedge_lambdas;  // default: 5 x 5 over [-2, 2] x [-2, 2] i
  double wedge_h_power = 1.0;          // h(I) = I^p
};

struct RunConfig {
  SystemSpec system;
  std::optional<ManifoldSpec> manifold;
  std::optional<TimeWindow> t_window;
  std::size_t grid_n = 40;
  std::size_t grid_m = 40;
  Complex lambda{1.0, 0.0};
  DataSpec h;
  std::optional<LatticeSpec> lattice;
  std::optional<TargetSpec> target;
  LambdaSweepSpec lambda_sweep;
  std::size_t K = 8;
  double stop_tol = 1e-12;
  double integrator_tol = 1e-10;
  std::filesystem::path output_dir = "out";
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t certify_points = 10;
  SpectrumSpec spectrum;
  nlohmann::json echo;  // the parsed document plus applied overrides
};

[[nodiscard]] RunConfig parse_config(std::string_view text);
[[nodiscard]] RunConfig load_config(const std::filesystem::path& path);

struct Overrides {
  std::optional<std::filesystem::path> output_dir;
  std::optional<double> tol;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};
void apply_overrides(RunConfig& config, const Overrides& overrides);

/// Builders shared by the commands and the tests.
[[nodiscard]] BenchmarkSystem build_system(const RunConfig& config);
[[nodiscard]] DataManifold build_manifold(const RunConfig& config, const BenchmarkSystem& system);
[[nodiscard]] DataFunction::ClosedForm build_data_function(const DataSpec& spec);
[[nodiscard]] TimeWindow build_window(const RunConfig& config, const BenchmarkSystem& system);
[[nodiscard]] std::function<Complex(StateView)> build_target(const RunConfig& config,
                                                             const BenchmarkSystem& system,
                                                             const DataManifold& manifold);
[[nodiscard]] std::vector<Complex> build_candidates(const LambdaSweepSpec& spec);

/// Each command writes its artifacts into config.output_dir and returns an
/// exit code. Library errors are mapped to codes; messages go to `log`.
int cmd_eval(const RunConfig& config, std::ostream& log);
int cmd_decompose(const RunConfig& config, std::ostream& log);
int cmd_spectrum(const RunConfig& config, std::ostream& log);

/// "%.17g" formatting used by every CSV column.
[[nodiscard]] std::string format_number(double v);

/// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Minimal reader for the CSV files written here: header plus numeric rows.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};
[[nodiscard]] CsvTable read_csv(const std::filesystem::path& path);

}  // namespace koopeig::cli
