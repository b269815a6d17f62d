#pragma once

#include "vchsim/studies.hpp"

#include <optional>
#include <string>
#include <vector>

namespace vch {

enum class InitKind { Constant, Bump, File };

/// constant <value> | bump <center> <radius> <amplitude> [background] | file <path>
struct InitRecipe {
  InitKind kind = InitKind::Constant;
  double value = 0.0;
  double center = 0.0;
  double radius = 0.0;
  double amplitude = 0.0;
  double background = 0.0;
  std::string path;

  bool operator==(const InitRecipe&) const = default;
};

struct StudyBlock {
  std::string kind = "all";  // all | tau | oracle | degenerate
  std::vector<int> values{16, 32, 64, 128};
  int reference = 512;
  bool extrapolate = true;
  std::vector<int> oracle_values{1000, 2000};
  double oracle_mu0 = 1.0;
  double oracle_rho0 = 0.5;
  double oracle_lambda = 0.01;
  std::vector<int> degenerate_values{64, 128, 256};
  int degenerate_samples = 8;
  double degenerate_threshold = 1e-3;

  bool operator==(const StudyBlock&) const = default;
};

struct Config {
  int dim = 1;
  int n = 32;
  double length = 1.0;
  SolverConfig solver;

  std::string potential = "clamp";  // clamp | log
  double alpha1 = 0.5;
  double alpha2 = 2.0;
  std::string coupling = "linear";  // linear | constant
  double epsilon = 1.0;
  double g_width = 0.1;
  double g_const = 0.0;
  std::string mobility = "constant";  // constant | tanhpow
  double kappa0 = 1.0;
  double m = 2.0;
  double r_star = 1.0;
  std::string face_average = "arithmetic";  // arithmetic | harmonic

  InitRecipe mu0{.kind = InitKind::Constant, .value = 1.0, .path = {}};
  InitRecipe rho0{.kind = InitKind::Constant, .value = 0.5, .path = {}};
  int stride = 1;
  std::optional<StudyBlock> study;

  bool operator==(const Config&) const = default;
};

/// Parses the flat `key = value` format and checks every hypothesis that can
/// be checked without reading files. Throws ConfigError with line numbers.
Config parse_config(const std::string& text);
Config load_config(const std::string& path);

/// Canonical text form; parse_config(render_config(c)) == c.
std::string render_config(const Config& cfg);

Grid make_grid(const Config& cfg);
Laws make_laws(const Config& cfg);
ScalarField make_field(const InitRecipe& recipe, const Grid& g, const std::string& base_dir = {});

/// Builds the run inputs, loading file recipes relative to `base_dir`, and
/// validates them. Throws ConfigError.
Problem make_problem(const Config& cfg, const std::string& base_dir = {});

}  // namespace vch
