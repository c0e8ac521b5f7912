#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "koopeig/cli.hpp"
#include "koopeig/errors.hpp"
#include "koopeig/keig.hpp"
#include "koopeig/okeedmd.hpp"
#include "koopeig/parallel.hpp"

namespace koopeig::cli {

namespace {

using nlohmann::json;

Complex real_power(double base, double p) {
  if (p == 0.0) return {1.0, 0.0};
  if (base >= 0.0 || std::floor(p) == p) return {std::pow(base, p), 0.0};
  return std::pow(Complex(base, 0.0), p);
}

json complex_json(Complex z) { return json::array({z.real(), z.imag()}); }

IntegratorOptions integrator_options(const RunConfig& config) {
  IntegratorOptions opts;
  opts.tol = config.integrator_tol;
  return opts;
}

PullbackOptions pullback_options(const RunConfig& config) {
  PullbackOptions opts;
  opts.integrator = integrator_options(config);
  return opts;
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::empty_target: return kEmptyTarget;
    case ErrorCode::invalid_argument: return kConfigError;
    default: return kDomainFailure;
  }
}

template <class F>
int guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kFailure;
  }
}

std::vector<double> linspace(double lo, double hi, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t k = 0; k < count; ++k) {
    out[k] = count == 1 ? lo : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(count - 1);
  }
  if (count > 1) out.back() = hi;
  return out;
}

// Lattice over the bounding box of a coarse sweep of the manifold.
LatticeSpec default_lattice(const BenchmarkSystem& system, const DataManifold& manifold, TimeWindow window,
                            const RunConfig& config) {
  GridOptions opts;
  opts.integrator = integrator_options(config);
  opts.threads = config.threads;
  const auto grid = build_grid(system.field, manifold, window, 20, 20, opts);
  const std::size_t d = manifold.dim();
  LatticeSpec spec;
  for (std::size_t k = 0; k < d; ++k) {
    double lo = grid.points.front()[k];
    double hi = lo;
    for (const auto& p : grid.points) {
      lo = std::min(lo, p[k]);
      hi = std::max(hi, p[k]);
    }
    spec.ranges.emplace_back(lo, hi);
    spec.counts.push_back(30);
  }
  return spec;
}

std::vector<State> lattice_points(const LatticeSpec& spec) {
  std::vector<std::vector<double>> axes;
  for (std::size_t k = 0; k < spec.ranges.size(); ++k) {
    axes.push_back(linspace(spec.ranges[k].first, spec.ranges[k].second, spec.counts[k]));
  }
  std::vector<State> out{State{}};
  for (std::size_t k = axes.size(); k-- > 0;) {
    std::vector<State> next;
    for (double v : axes[k]) {
      for (const auto& prefix : out) {
        State p = prefix;
        p.insert(p.begin(), v);
        next.push_back(std::move(p));
      }
    }
    out = std::move(next);
  }
  // x1 runs fastest, the last axis slowest.
  std::sort(out.begin(), out.end(), [](const State& a, const State& b) {
    return std::lexicographical_compare(a.rbegin(), a.rend(), b.rbegin(), b.rend());
  });
  return out;
}

// Interior points whose time-t images stay inside the swept domain.
std::vector<State> certification_points(const BenchmarkSystem& system, const DataManifold& manifold,
                                        TimeWindow window, double t, std::size_t count, std::uint64_t seed,
                                        const IntegratorOptions& opts) {
  const double margin = 0.05 * window.length();
  double lo = window.t_begin + margin;
  double hi = window.t_end - std::max(margin, t);
  if (hi < lo) {
    lo = window.t_begin;
    hi = std::max(lo, window.t_end - t);
  }
  return sample_domain(system.field, manifold, lo, hi, count, seed, 0.02, opts);
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace

BenchmarkSystem build_system(const RunConfig& config) {
  try {
    return make_benchmark(config.system.name, config.system.params);
  } catch (const Error& e) {
    throw ConfigError(std::string("field 'system': ") + e.what());
  }
}

DataManifold build_manifold(const RunConfig& config, const BenchmarkSystem& system) {
  if (!config.manifold) return system.default_manifold;
  const ManifoldSpec& m = *config.manifold;
  if (m.type == "segment") {
    const auto range = m.s_range.value_or(std::pair{0.0, 1.0});
    return DataManifold::segment(m.from, m.to, m.n, range.first, range.second);
  }
  if (m.type == "circle") return DataManifold::circle(m.center, m.radius, m.arc.first, m.arc.second, m.n);
  return DataManifold::point(m.point);
}

DataFunction::ClosedForm build_data_function(const DataSpec& spec) {
  return [terms = spec.terms](double s) {
    Complex sum{0.0, 0.0};
    for (const auto& term : terms) sum += term.coeff * real_power(s, term.power);
    return sum;
  };
}

TimeWindow build_window(const RunConfig& config, const BenchmarkSystem& system) {
  return config.t_window.value_or(system.default_window);
}

std::function<Complex(StateView)> build_target(const RunConfig& config, const BenchmarkSystem& system,
                                               const DataManifold& manifold) {
  if (!config.target) throw ConfigError("field 'target': missing");
  const std::size_t d = system.field.dim();
  std::vector<std::function<Complex(StateView)>> parts;
  for (const auto& term : config.target->terms) {
    if (term.kind == "gaussian") {
      State center = term.center.empty() ? State(d, 0.0) : term.center;
      if (center.size() != d) throw ConfigError("field 'target': gaussian center has the wrong dimension");
      parts.emplace_back([amp = term.amplitude, width = term.width, center](StateView x) {
        double r2 = 0.0;
        for (std::size_t k = 0; k < x.size(); ++k) r2 += (x[k] - center[k]) * (x[k] - center[k]);
        return Complex(amp * std::exp(-r2 / width), 0.0);
      });
    } else if (term.kind == "monomial") {
      if (term.powers.size() != d) throw ConfigError("field 'target': monomial powers have the wrong dimension");
      parts.emplace_back([coeff = term.coeff, powers = term.powers](StateView x) {
        Complex v = coeff;
        for (std::size_t k = 0; k < powers.size(); ++k) v *= real_power(x[k], powers[k]);
        return v;
      });
    } else {
      auto keig = std::make_shared<const Keig>(term.lambda, DataFunction::sample(manifold, build_data_function(term.h)),
                                               manifold, system.field, build_window(config, system),
                                               pullback_options(config));
      parts.emplace_back([keig](StateView x) { return (*keig)(x); });
    }
  }
  return [parts = std::move(parts)](StateView x) {
    Complex sum{0.0, 0.0};
    for (const auto& part : parts) sum += part(x);
    return sum;
  };
}

std::vector<Complex> build_candidates(const LambdaSweepSpec& spec) {
  if (!spec.explicit_list.empty()) return spec.explicit_list;
  return complex_candidates(spec.re_range.first, spec.re_range.second, spec.re_count, spec.im_range.first,
                            spec.im_range.second, spec.im_count);
}

int cmd_eval(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const auto system = build_system(config);
    const auto manifold = build_manifold(config, system);
    const auto window = build_window(config, system);
    const Keig keig(config.lambda, DataFunction::sample(manifold, build_data_function(config.h)), manifold,
                    system.field, window, pullback_options(config));

    const LatticeSpec lattice = config.lattice ? *config.lattice : default_lattice(system, manifold, window, config);
    if (lattice.ranges.size() != manifold.dim()) {
      throw ConfigError("field 'lattice.ranges': expected " + std::to_string(manifold.dim()) + " axes");
    }
    const auto points = lattice_points(lattice);

    struct Row {
      bool inside = false;
      Keig::Evaluation eval;
    };
    std::vector<Row> rows(points.size());
    parallel_for(points.size(), config.threads, [&](std::size_t k) {
      try {
        rows[k] = Row{true, keig.evaluate(points[k])};
      } catch (const Error& e) {
        if (e.code() != ErrorCode::not_in_domain && e.code() != ErrorCode::blow_up &&
            e.code() != ErrorCode::step_underflow) {
          throw;
        }
      }
    });

    std::ostringstream csv;
    csv << "x1";
    if (manifold.dim() > 1) csv << ",x2";
    csv << ",re_phi,im_phi,r_star,s_star\n";
    std::size_t inside = 0;
    for (std::size_t k = 0; k < points.size(); ++k) {
      if (!rows[k].inside) continue;
      ++inside;
      const auto& e = rows[k].eval;
      for (std::size_t c = 0; c < points[k].size(); ++c) csv << (c ? "," : "") << format_number(points[k][c]);
      csv << ',' << format_number(e.value.real()) << ',' << format_number(e.value.imag()) << ','
          << format_number(e.pullback.r_star) << ',' << format_number(e.pullback.s_star) << '\n';
    }
    write_file_atomic(config.output_dir / "keig_grid.csv", csv.str());

    const double fraction =
        points.empty() ? 0.0 : static_cast<double>(inside) / static_cast<double>(points.size());
    json summary;
    summary["system"] = system.field.name();
    summary["lambda"] = complex_json(config.lambda);
    summary["lattice_points"] = points.size();
    summary["in_domain"] = inside;
    summary["in_domain_fraction"] = fraction;

    const bool domain_ok = inside > 0 && 1.0 - fraction <= 0.5;
    if (domain_ok && config.certify_points > 0) {
      constexpr double t = 0.1;
      const auto opts = integrator_options(config);
      const auto cert = certification_points(system, manifold, window, t, config.certify_points, config.seed, opts);
      const double residual = koopman_residual(system.field, keig.as_eigenfunction(), cert, t, opts);
      summary["certification"] = {{"points", cert.size()},
                                  {"t", t},
                                  {"koopman_residual", residual},
                                  {"pass", residual <= 1e-4}};
    }
    summary["config_echo"] = config.echo;
    write_file_atomic(config.output_dir / "eval_summary.json", dump(summary));

    if (!domain_ok) {
      log << "error: " << (points.size() - inside) << " of " << points.size()
          << " lattice points lie outside the swept domain\n";
      return static_cast<int>(kDomainFailure);
    }
    return static_cast<int>(kOk);
  });
}

int cmd_decompose(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const auto system = build_system(config);
    const auto manifold = build_manifold(config, system);
    const auto window = build_window(config, system);
    const auto q = build_target(config, system, manifold);
    const auto candidates = build_candidates(config.lambda_sweep);

    GridOptions grid_opts;
    grid_opts.integrator = integrator_options(config);
    grid_opts.threads = config.threads;
    const auto grid = build_grid(system.field, manifold, window, config.grid_n, config.grid_m, grid_opts);
    const auto target = sample_target(grid, q);

    DecomposeOptions opts;
    opts.sweep.refine = config.lambda_sweep.refine;
    opts.sweep.threads = config.threads;
    opts.pullback = pullback_options(config);
    const auto result = greedy_decompose(grid, target, candidates, config.K, config.stop_tol, opts);

    // Interior grid nodes whose time-t images stay on the grid.
    const double t = window.length() / (2.0 * static_cast<double>(grid.cols() - 1));
    std::vector<State> cert;
    if (config.certify_points > 0 && grid.rows() > 2 && grid.cols() > 3) {
      std::mt19937_64 rng(config.seed);
      std::uniform_int_distribution<std::size_t> pick_i(1, grid.rows() - 2);
      std::uniform_int_distribution<std::size_t> pick_j(1, grid.cols() - 3);
      for (std::size_t k = 0; k < config.certify_points; ++k) cert.push_back(grid.at(pick_i(rng), pick_j(rng)));
    }

    json report;
    report["terms"] = json::array();
    for (const auto& term : result.terms) {
      json h = json::array();
      for (const auto& v : term.h.values()) h.push_back(complex_json(v));
      json entry{{"lambda", complex_json(term.lambda)}, {"c", term.c}, {"h_samples", h}};
      if (!cert.empty()) {
        const double r = koopman_residual(system.field, term.keig.as_eigenfunction(), cert, t,
                                          opts.pullback.integrator);
        entry["koopman_residual"] = r;
      }
      report["terms"].push_back(std::move(entry));
    }
    report["residuals"] = result.residual_norms;
    json relative = json::array();
    for (double r : result.residual_norms) relative.push_back(r / result.residual_norms.front());
    report["relative_residuals"] = relative;
    if (!cert.empty()) report["certification"] = {{"points", cert.size()}, {"t", t}};
    report["config_echo"] = config.echo;
    write_file_atomic(config.output_dir / "decomposition.json", dump(report));

    std::ostringstream residuals;
    residuals << "k,residual,relative_residual\n";
    for (std::size_t k = 0; k < result.residual_norms.size(); ++k) {
      residuals << k << ',' << format_number(result.residual_norms[k]) << ','
                << format_number(result.residual_norms[k] / result.residual_norms.front()) << '\n';
    }
    write_file_atomic(config.output_dir / "residuals.csv", residuals.str());

    std::ostringstream curves;
    curves << "stage,re_lambda,im_lambda,residual\n";
    for (std::size_t k = 0; k < result.terms.size(); ++k) {
      for (const auto& p : result.terms[k].lambda_curve) {
        curves << k + 1 << ',' << format_number(p.lambda.real()) << ',' << format_number(p.lambda.imag()) << ','
               << format_number(p.residual) << '\n';
      }
    }
    write_file_atomic(config.output_dir / "lambda_curves.csv", curves.str());

    std::ostringstream hs;
    hs << "stage,s,re_h,im_h\n";
    for (std::size_t k = 0; k < result.terms.size(); ++k) {
      const auto& h = result.terms[k].h;
      for (std::size_t i = 0; i < h.size(); ++i) {
        hs << k + 1 << ',' << format_number(h.s_at(i)) << ',' << format_number(h.values()[i].real()) << ','
           << format_number(h.values()[i].imag()) << '\n';
      }
    }
    write_file_atomic(config.output_dir / "h_functions.csv", hs.str());

    std::ostringstream tg;
    const std::size_t d = manifold.dim();
    tg << "stage,i,j,x1";
    if (d > 1) tg << ",x2";
    tg << ",re_phi,im_phi\n";
    for (std::size_t k = 0; k < result.terms.size(); ++k) {
      const auto& phi = result.terms[k].normalized_phi;
      for (std::size_t i = 0; i < grid.rows(); ++i) {
        for (std::size_t j = 0; j < grid.cols(); ++j) {
          const auto& x = grid.at(i, j);
          const Complex v = phi[j * grid.rows() + i];
          tg << k + 1 << ',' << i << ',' << j << ',' << format_number(x[0]);
          if (d > 1) tg << ',' << format_number(x[1]);
          tg << ',' << format_number(v.real()) << ',' << format_number(v.imag()) << '\n';
        }
      }
    }
    write_file_atomic(config.output_dir / "term_grid.csv", tg.str());

    log << "decompose: " << result.terms.size() << " terms, relative residual "
        << result.residual_norms.back() / result.residual_norms.front() << '\n';
    return static_cast<int>(kOk);
  });
}

int cmd_spectrum(const RunConfig& config, std::ostream& log) {
  return guarded(log, [&] {
    const SpectrumSpec& spec = config.spectrum;
    const auto report = scaling_fit(spec.omega, spec.t, spec.n_list, spec.quad_points);

    std::ostringstream csv;
    csv << "n,residual,phi_norm,relative_residual\n";
    json points = json::array();
    for (const auto& p : report.points) {
      csv << p.n << ',' << format_number(p.residual.residual_norm) << ',' << format_number(p.residual.phi_norm)
          << ',' << format_number(p.residual.relative_residual) << '\n';
      points.push_back({{"n", p.n},
                        {"residual", p.residual.residual_norm},
                        {"phi_norm", p.residual.phi_norm},
                        {"relative_residual", p.residual.relative_residual}});
    }
    write_file_atomic(config.output_dir / "spectrum_scaling.csv", csv.str());

    json summary;
    summary["omega"] = spec.omega;
    summary["t"] = spec.t;
    summary["points"] = points;
    if (report.points.size() >= 2) summary["slope"] = report.slope;

    const auto lambdas =
        spec.wedge_lambdas.empty() ? complex_candidates(-2.0, 2.0, 5, -2.0, 2.0, 5) : spec.wedge_lambdas;
    const double p = spec.wedge_h_power;
    const auto wedge = wedge_point_spectrum_check(lambdas, spec.wedge,
                                                  [p](double action) { return Complex(std::pow(action, p), 0.0); },
                                                  0.1, 100, config.seed);
    json wedge_json;
    wedge_json["lambdas"] = json::array();
    for (const auto& l : lambdas) wedge_json["lambdas"].push_back(complex_json(l));
    wedge_json["residuals"] = wedge.residuals;
    wedge_json["max_residual"] = wedge.max_residual;
    wedge_json["pass"] = wedge.max_residual <= 1e-8;
    summary["wedge"] = wedge_json;
    summary["config_echo"] = config.echo;
    write_file_atomic(config.output_dir / "spectrum_summary.json", dump(summary));

    if (report.points.size() >= 2) log << "spectrum: slope " << report.slope << '\n';
    return static_cast<int>(kOk);
  });
}

}  // namespace koopeig::cli
