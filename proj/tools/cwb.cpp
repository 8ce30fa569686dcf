// Command-line front end: run scene files against the identity checks and
// emit a structured report.
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "cwb/scenario.hpp"

namespace {

int do_run(const std::string& target, const cwb::RunOverrides& overrides,
           const std::string& outfile, bool strict) {
  std::string text;
  // bundled name or file path
  for (const auto& [name, body] : cwb::bundled_scenarios())
    if (name == target) text = body;
  if (text.empty()) {
    std::ifstream in(target);
    if (!in) {
      std::cerr << "error: no bundled scenario or file named '" << target << "'\n";
      return 2;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    text = ss.str();
  }
  cwb::Scenario s = cwb::parse_scenario(text);
  cwb::Report r = cwb::run_scenario(s, overrides);
  const std::string rendered = cwb::render_report(r);
  std::cout << rendered;
  if (!outfile.empty()) {
    std::ofstream out(outfile);
    if (!out) {
      std::cerr << "error: cannot write " << outfile << "\n";
      return 3;
    }
    out << rendered;
  }
  if (!r.pass) return 1;
  if (strict && !r.warnings.empty()) return 1;
  return 0;
}

int do_list(const std::string& dir) {
  for (const auto& l : cwb::list_scenarios(dir)) {
    std::cout << l.name << (l.bundled ? "  [bundled]  " : "  [custom]   ") << l.description
              << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cwb - characteristic form workbench on flat tori"};
  app.require_subcommand(1);

  std::string target, outfile, dir;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int grid_scale = 1;
  bool strict = false;

  CLI::App* run = app.add_subcommand("run", "run a scene file or bundled scenario");
  run->add_option("scenario", target, "scene file path or bundled name")->required();
  run->add_option("--seed", seed, "override the scenario seed")
      ->each([&](const std::string&) { seed_set = true; });
  run->add_option("--grid-scale", grid_scale, "multiply all grid sizes")
      ->check(CLI::PositiveNumber);
  run->add_option("--out", outfile, "also write the report to a file");
  run->add_flag("--strict", strict, "treat warnings as failures");

  CLI::App* list = app.add_subcommand("list", "list bundled and custom scenarios");
  list->add_option("--dir", dir, "directory with additional .scn files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (run->parsed()) {
      cwb::RunOverrides o;
      if (seed_set) o.seed = seed;
      o.grid_scale = grid_scale;
      return do_run(target, o, outfile, strict);
    }
    return do_list(dir);
  } catch (const cwb::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
