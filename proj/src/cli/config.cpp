#include <algorithm>
#include <fstream>
#include <numbers>
#include <regex>
#include <set>
#include <sstream>

#include "koopeig/cli.hpp"

namespace koopeig::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ConfigError("field '" + path + "': " + what);
}

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

std::string index(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void allow_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [key, value] : obj.items()) {
    if (!allowed.contains(key)) fail(join(path, key), "unknown key");
  }
}

double as_number(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

std::size_t as_count(const json& j, const std::string& path) {
  if (!j.is_number_integer() || j.get<long long>() < 0) fail(path, "expected a non-negative integer");
  return j.get<std::size_t>();
}

Complex as_complex(const json& j, const std::string& path) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return {j[0].get<double>(), j[1].get<double>()};
  }
  fail(path, "expected a number or [re, im]");
}

std::vector<double> as_vector(const json& j, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_number(j[i], index(path, i)));
  return out;
}

std::pair<double, double> as_range(const json& j, const std::string& path) {
  const auto v = as_vector(j, path);
  if (v.size() != 2) fail(path, "expected [lo, hi]");
  if (v[1] < v[0]) fail(path, "expected lo <= hi");
  return {v[0], v[1]};
}

std::vector<Complex> as_complex_list(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array");
  std::vector<Complex> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(as_complex(j[i], index(path, i)));
  return out;
}

DataSpec parse_data(const json& j, const std::string& path) {
  DataSpec spec;
  spec.terms.clear();
  auto term_from_string = [&](const std::string& text) {
    static const std::regex pattern(R"(^\s*s\s*(\^\s*([-+]?[0-9]*\.?[0-9]+)\s*)?$)");
    std::smatch m;
    if (std::regex_match(text, m, pattern)) {
      return DataSpec::Term{{1.0, 0.0}, m[2].matched ? std::stod(m[2].str()) : 1.0};
    }
    if (text == "one" || text == "1") return DataSpec::Term{{1.0, 0.0}, 0.0};
    fail(path, "unrecognised data function '" + text + "' (use \"1\", \"s\", \"s^p\" or terms)");
  };
  auto term_from_object = [&](const json& t, const std::string& p) {
    allow_keys(t, p, {"coeff", "power"});
    DataSpec::Term term;
    if (t.contains("coeff")) term.coeff = as_complex(t["coeff"], join(p, "coeff"));
    if (t.contains("power")) term.power = as_number(t["power"], join(p, "power"));
    return term;
  };
  if (j.is_string()) {
    spec.terms.push_back(term_from_string(j.get<std::string>()));
  } else if (j.is_number() || (j.is_array() && j.size() == 2 && j[0].is_number())) {
    spec.terms.push_back(DataSpec::Term{as_complex(j, path), 0.0});
  } else if (j.is_object()) {
    spec.terms.push_back(term_from_object(j, path));
  } else if (j.is_array()) {
    for (std::size_t i = 0; i < j.size(); ++i) {
      const auto p = index(path, i);
      spec.terms.push_back(j[i].is_string() ? term_from_string(j[i].get<std::string>())
                                            : term_from_object(j[i], p));
    }
  } else {
    fail(path, "expected a data function");
  }
  if (spec.terms.empty()) fail(path, "data function has no terms");
  return spec;
}

ManifoldSpec parse_manifold(const json& j, const std::string& path) {
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) fail(join(path, "type"), "expected a string");
  ManifoldSpec spec;
  spec.type = j["type"].get<std::string>();
  if (spec.type == "segment") {
    allow_keys(j, path, {"type", "from", "to", "n", "s_range"});
    if (!j.contains("from") || !j.contains("to")) fail(path, "segment needs 'from' and 'to'");
    spec.from = as_vector(j["from"], join(path, "from"));
    spec.to = as_vector(j["to"], join(path, "to"));
    if (j.contains("s_range")) spec.s_range = as_range(j["s_range"], join(path, "s_range"));
  } else if (spec.type == "circle") {
    allow_keys(j, path, {"type", "center", "radius", "arc", "n"});
    spec.center = j.contains("center") ? as_vector(j["center"], join(path, "center")) : State{0.0, 0.0};
    if (!j.contains("radius")) fail(join(path, "radius"), "missing");
    spec.radius = as_number(j["radius"], join(path, "radius"));
    spec.arc = j.contains("arc") ? as_range(j["arc"], join(path, "arc"))
                                 : std::pair{-std::numbers::pi, std::numbers::pi};
  } else if (spec.type == "point") {
    allow_keys(j, path, {"type", "x"});
    if (!j.contains("x")) fail(join(path, "x"), "missing");
    spec.point = as_number(j["x"], join(path, "x"));
    spec.n = 1;
  } else {
    fail(join(path, "type"), "unknown manifold type '" + spec.type + "'");
  }
  if (j.contains("n")) spec.n = as_count(j["n"], join(path, "n"));
  return spec;
}

TargetSpec parse_target(const json& j, const std::string& path) {
  TargetSpec spec;
  auto parse_term = [&](const json& t, const std::string& p) {
    if (!t.is_object() || !t.contains("type") || !t["type"].is_string()) fail(join(p, "type"), "expected a string");
    TargetSpec::Term term;
    term.kind = t["type"].get<std::string>();
    if (term.kind == "gaussian") {
      allow_keys(t, p, {"type", "amplitude", "width", "center"});
      if (t.contains("amplitude")) term.amplitude = as_number(t["amplitude"], join(p, "amplitude"));
      if (t.contains("width")) term.width = as_number(t["width"], join(p, "width"));
      if (!(term.width > 0.0)) fail(join(p, "width"), "must be positive");
      if (t.contains("center")) term.center = as_vector(t["center"], join(p, "center"));
    } else if (term.kind == "monomial") {
      allow_keys(t, p, {"type", "coeff", "powers"});
      if (t.contains("coeff")) term.coeff = as_complex(t["coeff"], join(p, "coeff"));
      if (!t.contains("powers")) fail(join(p, "powers"), "missing");
      term.powers = as_vector(t["powers"], join(p, "powers"));
    } else if (term.kind == "eigenfunction") {
      allow_keys(t, p, {"type", "lambda", "h"});
      if (t.contains("lambda")) term.lambda = as_complex(t["lambda"], join(p, "lambda"));
      if (t.contains("h")) term.h = parse_data(t["h"], join(p, "h"));
    } else {
      fail(join(p, "type"), "unknown target builtin '" + term.kind + "'");
    }
    return term;
  };
  if (j.is_object() && j.contains("terms")) {
    allow_keys(j, path, {"terms"});
    const json& terms = j["terms"];
    if (!terms.is_array() || terms.empty()) fail(join(path, "terms"), "expected a non-empty array");
    for (std::size_t i = 0; i < terms.size(); ++i) spec.terms.push_back(parse_term(terms[i], index(join(path, "terms"), i)));
  } else {
    spec.terms.push_back(parse_term(j, path));
  }
  return spec;
}

void parse_sweep(const json& j, const std::string& path, LambdaSweepSpec& spec) {
  allow_keys(j, path, {"list", "re_range", "im_range", "count", "refine"});
  if (j.contains("list")) spec.explicit_list = as_complex_list(j["list"], join(path, "list"));
  if (j.contains("re_range")) spec.re_range = as_range(j["re_range"], join(path, "re_range"));
  if (j.contains("im_range")) spec.im_range = as_range(j["im_range"], join(path, "im_range"));
  if (j.contains("count")) {
    const json& c = j["count"];
    if (c.is_array()) {
      if (c.size() != 2) fail(join(path, "count"), "expected [re_count, im_count]");
      spec.re_count = as_count(c[0], index(join(path, "count"), 0));
      spec.im_count = as_count(c[1], index(join(path, "count"), 1));
    } else {
      spec.re_count = as_count(c, join(path, "count"));
      spec.im_count = 1;
    }
    if (spec.re_count == 0 || spec.im_count == 0) fail(join(path, "count"), "counts must be positive");
  }
  if (j.contains("refine")) {
    if (!j["refine"].is_boolean()) fail(join(path, "refine"), "expected true or false");
    spec.refine = j["refine"].get<bool>();
  }
}

void parse_spectrum(const json& j, const std::string& path, SpectrumSpec& spec) {
  allow_keys(j, path, {"omega", "t", "n_list", "quad_points", "wedge", "wedge_lambdas", "wedge_h_power"});
  if (j.contains("omega")) spec.omega = as_number(j["omega"], join(path, "omega"));
  if (j.contains("t")) spec.t = as_number(j["t"], join(path, "t"));
  if (j.contains("n_list")) {
    const json& list = j["n_list"];
    if (!list.is_array() || list.empty()) fail(join(path, "n_list"), "expected a non-empty array");
    spec.n_list.clear();
    for (std::size_t i = 0; i < list.size(); ++i) {
      const auto n = as_count(list[i], index(join(path, "n_list"), i));
      if (n == 0) fail(index(join(path, "n_list"), i), "must be positive");
      spec.n_list.push_back(static_cast<int>(n));
    }
  }
  if (j.contains("quad_points")) spec.quad_points = as_count(j["quad_points"], join(path, "quad_points"));
  if (j.contains("wedge")) {
    const std::string p = join(path, "wedge");
    const json& w = j["wedge"];
    allow_keys(w, p, {"a", "b", "alpha1", "alpha2", "ray"});
    if (w.contains("a")) spec.wedge.a = as_number(w["a"], join(p, "a"));
    if (w.contains("b")) spec.wedge.b = as_number(w["b"], join(p, "b"));
    if (w.contains("alpha1")) spec.wedge.alpha1 = as_number(w["alpha1"], join(p, "alpha1"));
    if (w.contains("alpha2")) spec.wedge.alpha2 = as_number(w["alpha2"], join(p, "alpha2"));
    if (w.contains("ray")) spec.wedge.ray = as_number(w["ray"], join(p, "ray"));
  }
  if (j.contains("wedge_lambdas")) {
    LambdaSweepSpec sweep;
    parse_sweep(j["wedge_lambdas"], join(path, "wedge_lambdas"), sweep);
    spec.wedge_lambdas = build_candidates(sweep);
  }
  if (j.contains("wedge_h_power")) spec.wedge_h_power = as_number(j["wedge_h_power"], join(path, "wedge_h_power"));
}

}  // namespace

RunConfig parse_config(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    std::size_t line = 1;
    std::size_t column = 1;
    const std::size_t end = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    for (std::size_t k = 0; k < end; ++k) {
      if (text[k] == '\n') {
        ++line;
        column = 1;
      } else {
        ++column;
      }
    }
    std::ostringstream msg;
    msg << "syntax error at line " << line << ", column " << column << ": " << e.what();
    throw ConfigError(msg.str());
  }

  allow_keys(doc, "", {"system", "manifold", "t_window", "grid", "eigen", "lattice", "target", "lambda_sweep",
                       "K", "stop_tol", "integrator_tol", "output_dir", "seed", "threads", "certify_points",
                       "spectrum"});
  RunConfig cfg;
  if (doc.contains("system")) {
    const json& s = doc["system"];
    if (s.is_string()) {
      cfg.system.name = s.get<std::string>();
    } else {
      allow_keys(s, "system", {"name", "params"});
      if (!s.contains("name") || !s["name"].is_string()) fail("system.name", "expected a string");
      cfg.system.name = s["name"].get<std::string>();
      if (s.contains("params")) cfg.system.params = as_vector(s["params"], "system.params");
    }
    const auto names = benchmark_names();
    if (std::find(names.begin(), names.end(), cfg.system.name) == names.end()) {
      fail("system.name", "unknown system '" + cfg.system.name + "'");
    }
  }
  if (doc.contains("manifold")) cfg.manifold = parse_manifold(doc["manifold"], "manifold");
  if (doc.contains("t_window")) {
    const auto w = as_range(doc["t_window"], "t_window");
    if (w.first > 0.0 || w.second < 0.0) fail("t_window", "window must contain 0");
    cfg.t_window = TimeWindow{w.first, w.second};
  }
  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    allow_keys(g, "grid", {"n", "m"});
    if (g.contains("n")) cfg.grid_n = as_count(g["n"], "grid.n");
    if (g.contains("m")) cfg.grid_m = as_count(g["m"], "grid.m");
    if (cfg.grid_n < 1 || cfg.grid_m < 1) fail("grid", "n and m must be at least 1");
  }
  if (doc.contains("eigen")) {
    const json& e = doc["eigen"];
    allow_keys(e, "eigen", {"lambda", "h"});
    if (e.contains("lambda")) cfg.lambda = as_complex(e["lambda"], "eigen.lambda");
    if (e.contains("h")) cfg.h = parse_data(e["h"], "eigen.h");
  }
  if (doc.contains("lattice")) {
    const json& l = doc["lattice"];
    allow_keys(l, "lattice", {"ranges"});
    if (!l.contains("ranges") || !l["ranges"].is_array() || l["ranges"].empty()) {
      fail("lattice.ranges", "expected a non-empty array of [lo, hi, count]");
    }
    LatticeSpec spec;
    for (std::size_t i = 0; i < l["ranges"].size(); ++i) {
      const auto p = index("lattice.ranges", i);
      const auto v = as_vector(l["ranges"][i], p);
      if (v.size() != 3 || v[2] < 1 || std::floor(v[2]) != v[2]) fail(p, "expected [lo, hi, count]");
      spec.ranges.emplace_back(v[0], v[1]);
      spec.counts.push_back(static_cast<std::size_t>(v[2]));
    }
    cfg.lattice = spec;
  }
  if (doc.contains("target")) cfg.target = parse_target(doc["target"], "target");
  if (doc.contains("lambda_sweep")) parse_sweep(doc["lambda_sweep"], "lambda_sweep", cfg.lambda_sweep);
  if (doc.contains("K")) {
    cfg.K = as_count(doc["K"], "K");
    if (cfg.K < 1) fail("K", "must be at least 1");
  }
  if (doc.contains("stop_tol")) cfg.stop_tol = as_number(doc["stop_tol"], "stop_tol");
  if (doc.contains("integrator_tol")) {
    cfg.integrator_tol = as_number(doc["integrator_tol"], "integrator_tol");
    if (!(cfg.integrator_tol > 0.0)) fail("integrator_tol", "must be positive");
  }
  if (doc.contains("output_dir")) {
    if (!doc["output_dir"].is_string()) fail("output_dir", "expected a string");
    cfg.output_dir = doc["output_dir"].get<std::string>();
  }
  if (doc.contains("seed")) cfg.seed = as_count(doc["seed"], "seed");
  if (doc.contains("threads")) cfg.threads = as_count(doc["threads"], "threads");
  if (doc.contains("certify_points")) cfg.certify_points = as_count(doc["certify_points"], "certify_points");
  if (doc.contains("spectrum")) parse_spectrum(doc["spectrum"], "spectrum", cfg.spectrum);
  cfg.echo = std::move(doc);
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

void apply_overrides(RunConfig& config, const Overrides& overrides) {
  if (overrides.output_dir) {
    config.output_dir = *overrides.output_dir;
    config.echo["output_dir"] = overrides.output_dir->string();
  }
  if (overrides.tol) {
    if (!(*overrides.tol > 0.0)) throw ConfigError("flag '--tol': must be positive");
    config.integrator_tol = *overrides.tol;
    config.echo["integrator_tol"] = *overrides.tol;
  }
  if (overrides.seed) {
    config.seed = *overrides.seed;
    config.echo["seed"] = *overrides.seed;
  }
  if (overrides.threads) config.threads = *overrides.threads;
}

}  // namespace koopeig::cli
