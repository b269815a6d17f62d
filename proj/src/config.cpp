#include "vchsim/config.hpp"

#include "vchsim/error.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace vch {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream is(s);
  std::vector<std::string> out;
  for (std::string w; is >> w;) out.push_back(w);
  return out;
}

[[noreturn]] void syntax(int line, const std::string& msg) {
  throw ConfigError("line " + std::to_string(line) + ": violates (syntax): " + msg, "syntax", line);
}

double to_double(const std::string& s, int line, const std::string& key) {
  const char* b = s.c_str();
  char* end = nullptr;
  const double v = std::strtod(b, &end);
  if (s.empty() || end != b + s.size()) syntax(line, "'" + key + "' expects a number, got '" + s + "'");
  return v;
}

int to_int(const std::string& s, int line, const std::string& key) {
  const char* b = s.c_str();
  char* end = nullptr;
  const long v = std::strtol(b, &end, 10);
  if (s.empty() || end != b + s.size() || v < -2147483647L || v > 2147483647L)
    syntax(line, "'" + key + "' expects an integer, got '" + s + "'");
  return static_cast<int>(v);
}

bool to_bool(const std::string& s, int line, const std::string& key) {
  if (s == "true" || s == "yes" || s == "1") return true;
  if (s == "false" || s == "no" || s == "0") return false;
  syntax(line, "'" + key + "' expects true or false, got '" + s + "'");
}

std::string one_of(const std::string& s, std::initializer_list<const char*> allowed, int line,
                   const std::string& key) {
  std::string list;
  for (const char* a : allowed) {
    if (s == a) return s;
    list += list.empty() ? a : std::string(" | ") + a;
  }
  syntax(line, "'" + key + "' must be " + list + ", got '" + s + "'");
}

std::vector<int> int_list(const std::string& s, int line, const std::string& key) {
  std::vector<int> out;
  for (const auto& w : words(s)) out.push_back(to_int(w, line, key));
  if (out.empty()) syntax(line, "'" + key + "' needs at least one value");
  return out;
}

InitRecipe parse_recipe(const std::string& value, int line, const std::string& key) {
  const auto w = words(value);
  InitRecipe r;
  if (w.empty()) syntax(line, "'" + key + "' needs a recipe");
  if (w[0] == "constant") {
    if (w.size() != 2) syntax(line, "'" + key + " = constant <value>'");
    r.kind = InitKind::Constant;
    r.value = to_double(w[1], line, key);
  } else if (w[0] == "bump") {
    if (w.size() != 4 && w.size() != 5)
      syntax(line, "'" + key + " = bump <center> <radius> <amplitude> [background]'");
    r.kind = InitKind::Bump;
    r.center = to_double(w[1], line, key);
    r.radius = to_double(w[2], line, key);
    r.amplitude = to_double(w[3], line, key);
    if (w.size() == 5) r.background = to_double(w[4], line, key);
    if (!(r.radius > 0.0)) syntax(line, "bump radius must be positive");
  } else if (w[0] == "file") {
    r.kind = InitKind::File;
    r.path = trim(value.substr(value.find("file") + 4));
    if (r.path.empty()) syntax(line, "'" + key + " = file <path>'");
  } else {
    syntax(line, "'" + key + "' recipe must be constant, bump or file");
  }
  return r;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_list(const std::vector<int>& v) {
  std::string s;
  for (int x : v) s += (s.empty() ? "" : " ") + std::to_string(x);
  return s;
}

std::string render_recipe(const InitRecipe& r) {
  switch (r.kind) {
    case InitKind::Constant:
      return "constant " + fmt(r.value);
    case InitKind::Bump:
      return "bump " + fmt(r.center) + " " + fmt(r.radius) + " " + fmt(r.amplitude) + " " +
             fmt(r.background);
    case InitKind::File:
      return "file " + r.path;
  }
  return {};
}

// Which key to blame when a hypothesis check fails after parsing.
const std::map<std::string, std::vector<std::string>>& blame_keys() {
  static const std::map<std::string, std::vector<std::string>> m{
      {"time-grid", {"N", "T"}},
      {"hpstruct", {"delta"}},
      {"hpbeta", {"alpha1", "alpha2", "potential"}},
      {"newh", {"epsilon"}},
      {"hpcost", {"kappa0", "r_star", "m", "mobility"}},
      {"hpK", {"kappa0", "m", "mobility"}},
      {"hpkbis", {"kappa0", "m", "r_star", "mobility"}},
      {"tau-le-kappa-sup", {"N", "T", "kappa0"}},
      {"yosida", {"yosida_lambda"}},
      {"defkt", {"mobility_floor"}},
      {"solver", {"newton_tol", "linear_tol", "newton_max_iter", "linear_max_iter"}},
      {"hpfg", {"coupling", "g_const", "g_width"}},
  };
  return m;
}

}  // namespace

Config parse_config(const std::string& text) {
  Config c;
  std::map<std::string, int> seen;
  std::optional<double> tau;
  StudyBlock study;
  bool study_keys = false;
  std::optional<std::string> study_kind;

  using Setter = std::function<void(const std::string&, int, const std::string&)>;
  const std::map<std::string, Setter> keys{
      {"dim", [&](auto& v, int l, auto& k) { c.dim = to_int(v, l, k); }},
      {"n", [&](auto& v, int l, auto& k) { c.n = to_int(v, l, k); }},
      {"length", [&](auto& v, int l, auto& k) { c.length = to_double(v, l, k); }},
      {"T", [&](auto& v, int l, auto& k) { c.solver.T = to_double(v, l, k); }},
      {"N", [&](auto& v, int l, auto& k) { c.solver.N = to_int(v, l, k); }},
      {"tau", [&](auto& v, int l, auto& k) { tau = to_double(v, l, k); }},
      {"delta", [&](auto& v, int l, auto& k) { c.solver.delta = to_double(v, l, k); }},
      {"yosida_lambda",
       [&](auto& v, int l, auto& k) {
         if (v == "auto") c.solver.yosida_lambda.reset();
         else c.solver.yosida_lambda = to_double(v, l, k);
       }},
      {"newton_tol", [&](auto& v, int l, auto& k) { c.solver.newton_tol = to_double(v, l, k); }},
      {"newton_max_iter", [&](auto& v, int l, auto& k) { c.solver.newton_max_iter = to_int(v, l, k); }},
      {"linear_tol", [&](auto& v, int l, auto& k) { c.solver.linear_tol = to_double(v, l, k); }},
      {"linear_max_iter", [&](auto& v, int l, auto& k) { c.solver.linear_max_iter = to_int(v, l, k); }},
      {"sign_split", [&](auto& v, int l, auto& k) { c.solver.sign_split_reaction = to_bool(v, l, k); }},
      {"mobility_floor",
       [&](auto& v, int l, auto& k) {
         if (v == "auto") c.solver.mobility_floor_tau.reset();
         else c.solver.mobility_floor_tau = to_double(v, l, k);
       }},
      {"potential", [&](auto& v, int l, auto& k) { c.potential = one_of(v, {"clamp", "log"}, l, k); }},
      {"alpha1", [&](auto& v, int l, auto& k) { c.alpha1 = to_double(v, l, k); }},
      {"alpha2", [&](auto& v, int l, auto& k) { c.alpha2 = to_double(v, l, k); }},
      {"coupling", [&](auto& v, int l, auto& k) { c.coupling = one_of(v, {"linear", "constant"}, l, k); }},
      {"epsilon", [&](auto& v, int l, auto& k) { c.epsilon = to_double(v, l, k); }},
      {"g_width", [&](auto& v, int l, auto& k) { c.g_width = to_double(v, l, k); }},
      {"g_const", [&](auto& v, int l, auto& k) { c.g_const = to_double(v, l, k); }},
      {"mobility",
       [&](auto& v, int l, auto& k) {
         c.mobility = one_of(v, {"constant", "tanhpow", "tanh"}, l, k);
         if (c.mobility == "tanh") c.mobility = "tanhpow";
       }},
      {"kappa0", [&](auto& v, int l, auto& k) { c.kappa0 = to_double(v, l, k); }},
      {"m", [&](auto& v, int l, auto& k) { c.m = to_double(v, l, k); }},
      {"r_star", [&](auto& v, int l, auto& k) { c.r_star = to_double(v, l, k); }},
      {"face_average",
       [&](auto& v, int l, auto& k) { c.face_average = one_of(v, {"arithmetic", "harmonic"}, l, k); }},
      {"mu0", [&](auto& v, int l, auto& k) { c.mu0 = parse_recipe(v, l, k); }},
      {"rho0", [&](auto& v, int l, auto& k) { c.rho0 = parse_recipe(v, l, k); }},
      {"stride", [&](auto& v, int l, auto& k) { c.stride = to_int(v, l, k); }},
      {"study",
       [&](auto& v, int l, auto& k) {
         study_kind = one_of(v, {"none", "all", "tau", "oracle", "degenerate"}, l, k);
       }},
      {"study_values", [&](auto& v, int l, auto& k) { study.values = int_list(v, l, k); study_keys = true; }},
      {"study_reference", [&](auto& v, int l, auto& k) { study.reference = to_int(v, l, k); study_keys = true; }},
      {"study_extrapolate",
       [&](auto& v, int l, auto& k) { study.extrapolate = to_bool(v, l, k); study_keys = true; }},
      {"oracle_values", [&](auto& v, int l, auto& k) { study.oracle_values = int_list(v, l, k); study_keys = true; }},
      {"oracle_mu0", [&](auto& v, int l, auto& k) { study.oracle_mu0 = to_double(v, l, k); study_keys = true; }},
      {"oracle_rho0", [&](auto& v, int l, auto& k) { study.oracle_rho0 = to_double(v, l, k); study_keys = true; }},
      {"oracle_lambda",
       [&](auto& v, int l, auto& k) { study.oracle_lambda = to_double(v, l, k); study_keys = true; }},
      {"degenerate_values",
       [&](auto& v, int l, auto& k) { study.degenerate_values = int_list(v, l, k); study_keys = true; }},
      {"degenerate_samples",
       [&](auto& v, int l, auto& k) { study.degenerate_samples = to_int(v, l, k); study_keys = true; }},
      {"degenerate_threshold",
       [&](auto& v, int l, auto& k) { study.degenerate_threshold = to_double(v, l, k); study_keys = true; }},
  };

  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string body = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) syntax(line, "expected 'key = value'");
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) syntax(line, "missing key before '='");
    const auto it = keys.find(key);
    if (it == keys.end()) syntax(line, "unknown key '" + key + "'");
    if (seen.count(key)) syntax(line, "duplicate key '" + key + "' (first set on line " + std::to_string(seen[key]) + ")");
    if (value.empty()) syntax(line, "missing value for '" + key + "'");
    seen[key] = line;
    it->second(value, line, key);
  }

  if (study_kind && *study_kind != "none") {
    study.kind = *study_kind;
    c.study = study;
  } else if (study_keys) {
    if (study_kind) syntax(seen["study"], "study keys given but study = none");
    c.study = study;
  }

  auto line_of = [&](const std::string& hyp, const std::string& what) {
    if (hyp == "hpzero" || hyp == "hprhozbis") {
      const std::string k = what.find("rho0") != std::string::npos ? "rho0" : "mu0";
      return seen.count(k) ? seen[k] : 0;
    }
    const auto it = blame_keys().find(hyp);
    if (it != blame_keys().end())
      for (const auto& k : it->second)
        if (seen.count(k)) return seen[k];
    return 0;
  };
  auto rethrow = [&](const ConfigError& e) {
    const int l = line_of(e.hypothesis(), e.what());
    throw ConfigError(l > 0 ? "line " + std::to_string(l) + ": " + e.what() : std::string(e.what()),
                      e.hypothesis(), l);
  };

  if (tau) {
    const double expected = c.solver.N > 0 ? c.solver.T / c.solver.N : 0.0;
    if (std::abs(*tau - expected) > 4e-16 * std::abs(expected))
      throw ConfigError("line " + std::to_string(seen["tau"]) + ": violates (time-grid): tau = " + fmt(*tau) +
                            " must equal T/N = " + fmt(expected),
                        "time-grid", seen["tau"]);
  }
  if (c.stride < 1) syntax(seen["stride"], "stride must be >= 1");

  Grid g;
  try {
    g = make_grid(c);
  } catch (const std::invalid_argument& e) {
    const int l = seen.count("n") ? seen["n"] : (seen.count("dim") ? seen["dim"] : 0);
    throw ConfigError((l ? "line " + std::to_string(l) + ": " : std::string()) + "violates (grid): " + e.what(),
                      "grid", l);
  }
  try {
    const Laws laws = make_laws(c);
    validate(c.solver, laws);
    if (c.mu0.kind != InitKind::File && c.rho0.kind != InitKind::File)
      validate_initial_data(laws, make_field(c.mu0, g), make_field(c.rho0, g));
    else if (c.mu0.kind != InitKind::File && make_field(c.mu0, g).min() < 0.0)
      throw ConfigError("violates (hpzero): mu0 has negative values", "hpzero");
  } catch (const ConfigError& e) {
    rethrow(e);
  }
  return c;
}

Config load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file '" + path + "'", "io");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string render_config(const Config& c) {
  std::ostringstream os;
  const auto& s = c.solver;
  os << "dim = " << c.dim << "\n"
     << "n = " << c.n << "\n"
     << "length = " << fmt(c.length) << "\n"
     << "T = " << fmt(s.T) << "\n"
     << "N = " << s.N << "\n"
     << "delta = " << fmt(s.delta) << "\n"
     << "yosida_lambda = " << (s.yosida_lambda ? fmt(*s.yosida_lambda) : "auto") << "\n"
     << "newton_tol = " << fmt(s.newton_tol) << "\n"
     << "newton_max_iter = " << s.newton_max_iter << "\n"
     << "linear_tol = " << fmt(s.linear_tol) << "\n"
     << "linear_max_iter = " << s.linear_max_iter << "\n"
     << "sign_split = " << (s.sign_split_reaction ? "true" : "false") << "\n"
     << "mobility_floor = " << (s.mobility_floor_tau ? fmt(*s.mobility_floor_tau) : "auto") << "\n"
     << "potential = " << c.potential << "\n"
     << "alpha1 = " << fmt(c.alpha1) << "\n"
     << "alpha2 = " << fmt(c.alpha2) << "\n"
     << "coupling = " << c.coupling << "\n"
     << "epsilon = " << fmt(c.epsilon) << "\n"
     << "g_width = " << fmt(c.g_width) << "\n"
     << "g_const = " << fmt(c.g_const) << "\n"
     << "mobility = " << c.mobility << "\n"
     << "kappa0 = " << fmt(c.kappa0) << "\n"
     << "m = " << fmt(c.m) << "\n"
     << "r_star = " << fmt(c.r_star) << "\n"
     << "face_average = " << c.face_average << "\n"
     << "mu0 = " << render_recipe(c.mu0) << "\n"
     << "rho0 = " << render_recipe(c.rho0) << "\n"
     << "stride = " << c.stride << "\n";
  if (c.study) {
    const auto& st = *c.study;
    os << "study = " << st.kind << "\n"
       << "study_values = " << fmt_list(st.values) << "\n"
       << "study_reference = " << st.reference << "\n"
       << "study_extrapolate = " << (st.extrapolate ? "true" : "false") << "\n"
       << "oracle_values = " << fmt_list(st.oracle_values) << "\n"
       << "oracle_mu0 = " << fmt(st.oracle_mu0) << "\n"
       << "oracle_rho0 = " << fmt(st.oracle_rho0) << "\n"
       << "oracle_lambda = " << fmt(st.oracle_lambda) << "\n"
       << "degenerate_values = " << fmt_list(st.degenerate_values) << "\n"
       << "degenerate_samples = " << st.degenerate_samples << "\n"
       << "degenerate_threshold = " << fmt(st.degenerate_threshold) << "\n";
  }
  return os.str();
}

Grid make_grid(const Config& c) { return Grid(c.dim, c.n, c.length); }

Laws make_laws(const Config& c) {
  Laws laws{c.potential == "log" ? log_potential(c.alpha1, c.alpha2) : clamp_potential(c.alpha2),
            c.coupling == "constant" ? constant_coupling(c.g_const, c.epsilon)
                                     : linear_coupling(c.epsilon, c.g_width),
            c.mobility == "tanhpow" ? tanh_power_mobility(c.m, c.r_star) : constant_mobility(c.kappa0),
            c.face_average == "harmonic" ? FaceAverage::Harmonic : FaceAverage::Arithmetic};
  return laws;
}

ScalarField make_field(const InitRecipe& r, const Grid& g, const std::string& base_dir) {
  switch (r.kind) {
    case InitKind::Constant:
      return ScalarField(g, r.value);
    case InitKind::Bump: {
      ScalarField f(g, r.background);
      for (int j = 0; j < (g.dim == 2 ? g.n : 1); ++j) {
        for (int i = 0; i < g.n; ++i) {
          const double dx = g.coord(i) - r.center;
          const double dy = g.dim == 2 ? g.coord(j) - r.center : 0.0;
          const double dist = std::sqrt(dx * dx + dy * dy);
          if (dist < r.radius)
            f[g.dim == 2 ? g.index(i, j) : static_cast<std::size_t>(i)] +=
                r.amplitude * 0.5 * (1.0 + std::cos(M_PI * dist / r.radius));
        }
      }
      return f;
    }
    case InitKind::File: {
      std::filesystem::path p(r.path);
      if (p.is_relative() && !base_dir.empty()) p = std::filesystem::path(base_dir) / p;
      std::ifstream in(p);
      if (!in) throw ConfigError("violates (hpzero): cannot read initial data file '" + p.string() + "'", "hpzero");
      ScalarField f = [&] {
        try {
          return read_snapshot(in, nullptr);
        } catch (const std::exception& e) {
          throw ConfigError("violates (hpzero): initial data file '" + p.string() + "': " + e.what(), "hpzero");
        }
      }();
      if (!(f.grid == g))
        throw ConfigError("violates (hpzero): initial data file '" + p.string() + "' does not match the grid",
                          "hpzero");
      return f;
    }
  }
  throw std::logic_error("make_field: unknown recipe");
}

Problem make_problem(const Config& c, const std::string& base_dir) {
  const Grid g = make_grid(c);
  Problem p{c.solver, make_laws(c), make_field(c.mu0, g, base_dir), make_field(c.rho0, g, base_dir)};
  validate(p.cfg, p.laws);
  validate_initial_data(p.laws, p.mu0, p.rho0);
  return p;
}

}  // namespace vch
