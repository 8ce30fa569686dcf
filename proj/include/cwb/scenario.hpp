#pragma once

#include <string>

#include "cwb/connection.hpp"

namespace cwb {

/// Declarative scene file: chart, bundles with trigonometric-polynomial
/// coefficient triples (coordinate subset, Fourier multi-index, complex
/// coefficient), and a list of checks with tolerances.
struct BundleSpec {
  struct Entry {
    Subset subset = 0;
    int i = 0, j = 0;
    std::array<int, 4> k{0, 0, 0, 0};
    Complex value;
  };
  std::string name;
  int rank = 1;
  std::vector<Entry> coeff;
  std::vector<Entry> metric;
};

struct CheckSpec {
  std::string kind;
  std::map<std::string, std::string> params;
  std::vector<std::pair<Subset, Complex>> expects;
  double tolerance = -1;  // negative: per-kind defaults
};

struct Scenario {
  std::string name;
  std::string description;
  std::uint64_t seed = 1;
  std::vector<int> grid;
  std::vector<BundleSpec> bundles;
  std::vector<CheckSpec> checks;
};

struct CheckResult {
  std::string kind;
  std::vector<std::pair<std::string, double>> residuals;
  std::vector<std::pair<std::string, Complex>> periods;
  std::vector<std::string> warnings;
  bool pass = false;
};

struct Report {
  std::string scenario;
  std::uint64_t seed = 0;
  int grid_scale = 1;
  std::vector<CheckResult> checks;
  std::vector<std::string> warnings;
  bool pass = false;
  double walltime_ms = 0;
};

/// Parse a scene file; throws ParseError with line information.
Scenario parse_scenario(const std::string& text);

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  int grid_scale = 1;
};

Report run_scenario(const Scenario& s, const RunOverrides& o = {});

/// Machine block (deterministic given seed) followed by a human summary.
std::string render_report(const Report& r);
/// Only the machine block, for byte comparison.
std::string render_machine(const Report& r);

/// Bundled scene files, by name.
std::vector<std::pair<std::string, std::string>> bundled_scenarios();

struct ScenarioListing {
  std::string name;
  std::string description;
  bool bundled = true;
  std::string path;  // empty for bundled
};

/// Bundled scenarios plus *.scn files from the optional directory, sorted
/// by name; duplicate names are an error.
std::vector<ScenarioListing> list_scenarios(const std::string& custom_dir = "");

std::string subset_label(Subset s, int dim);

}  // namespace cwb
