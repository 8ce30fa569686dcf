#include "cwb/scenario.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cwb/random.hpp"
#include "cwb/transgression.hpp"

namespace cwb {

namespace {

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) {
    if (tok[0] == '#') break;
    out.push_back(tok);
  }
  return out;
}

[[noreturn]] void fail(int lineno, const std::string& msg) {
  throw ParseError("line " + std::to_string(lineno) + ": " + msg);
}

Subset parse_subset(const std::string& tok, int lineno) {
  if (tok == "1") return 0;
  Subset s = 0;
  size_t pos = 0;
  while (pos < tok.size()) {
    if (tok[pos] == '^') {
      ++pos;
      continue;
    }
    if (pos + 1 >= tok.size() || tok[pos] != 'd') fail(lineno, "bad subset token " + tok);
    const char c = tok[pos + 1];
    int axis = -1;
    if (c == 'x') axis = 0;
    if (c == 'y') axis = 1;
    if (c == 'z') axis = 2;
    if (c == 'w') axis = 3;
    if (axis < 0) fail(lineno, "bad coordinate in subset " + tok);
    if (s & (1u << axis)) fail(lineno, "repeated coordinate in subset " + tok);
    s |= static_cast<Subset>(1u << axis);
    pos += 2;
  }
  return s;
}

double parse_double(const std::string& tok, int lineno) {
  try {
    size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) fail(lineno, "bad number " + tok);
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (...) {
    fail(lineno, "bad number " + tok);
  }
}

long parse_int(const std::string& tok, int lineno) {
  try {
    size_t used = 0;
    long v = std::stol(tok, &used);
    if (used != tok.size()) fail(lineno, "bad integer " + tok);
    return v;
  } catch (const ParseError&) {
    throw;
  } catch (...) {
    fail(lineno, "bad integer " + tok);
  }
}

// entry line: coeff <subset> <i> <j> : k... : re im
BundleSpec::Entry parse_entry(const std::vector<std::string>& t, int dim, int lineno) {
  BundleSpec::Entry e;
  size_t p = 1;
  if (t.size() < 4) fail(lineno, "truncated coefficient entry");
  e.subset = parse_subset(t[p++], lineno);
  e.i = static_cast<int>(parse_int(t[p++], lineno));
  e.j = static_cast<int>(parse_int(t[p++], lineno));
  if (p >= t.size() || t[p] != ":") fail(lineno, "expected ':' before the Fourier index");
  ++p;
  for (int a = 0; a < dim; ++a) {
    if (p >= t.size()) fail(lineno, "missing Fourier index component");
    e.k[a] = static_cast<int>(parse_int(t[p++], lineno));
  }
  if (p >= t.size() || t[p] != ":") fail(lineno, "expected ':' before the value");
  ++p;
  if (t.size() - p < 2) fail(lineno, "missing complex value");
  const double re = parse_double(t[p++], lineno);
  const double im = parse_double(t[p++], lineno);
  e.value = Complex(re, im);
  return e;
}

}  // namespace

std::string subset_label(Subset s, int dim) {
  if (s == 0) return "1";
  static const char* names[4] = {"dx", "dy", "dz", "dw"};
  std::string out;
  for (int a = 0; a < dim; ++a)
    if (s & (1u << a)) {
      if (!out.empty()) out += "^";
      out += names[a];
    }
  return out;
}

Scenario parse_scenario(const std::string& text) {
  Scenario s;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  std::string section;
  BundleSpec* bundle = nullptr;
  CheckSpec* check = nullptr;
  int dim = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto t = tokenize(line);
    if (t.empty()) continue;
    if (t[0] == "}") {
      if (section.empty()) fail(lineno, "unmatched '}'");
      section.clear();
      bundle = nullptr;
      check = nullptr;
      continue;
    }
    if (t.back() == "{") {
      if (!section.empty()) fail(lineno, "nested sections are not supported");
      if (t[0] == "chart" && t.size() == 2) {
        section = "chart";
      } else if (t[0] == "bundle" && t.size() == 3) {
        s.bundles.push_back(BundleSpec{});
        bundle = &s.bundles.back();
        bundle->name = t[1];
        section = "bundle";
      } else if (t[0] == "check" && t.size() == 3) {
        s.checks.push_back(CheckSpec{});
        check = &s.checks.back();
        check->kind = t[1];
        section = "check";
      } else {
        fail(lineno, "unknown section header");
      }
      continue;
    }
    if (section.empty()) {
      if (t[0] == "name" && t.size() >= 2) {
        s.name = t[1];
      } else if (t[0] == "seed" && t.size() >= 2) {
        s.seed = static_cast<std::uint64_t>(parse_int(t[1], lineno));
      } else if (t[0] == "description") {
        std::string d;
        for (size_t i = 1; i < t.size(); ++i) {
          if (i > 1) d += " ";
          d += t[i];
        }
        s.description = d;
      } else {
        fail(lineno, "unknown top-level key " + t[0]);
      }
    } else if (section == "chart") {
      if (t[0] == "dim" && t.size() >= 2) {
        dim = static_cast<int>(parse_int(t[1], lineno));
      } else if (t[0] == "grid") {
        for (size_t i = 1; i < t.size(); ++i)
          s.grid.push_back(static_cast<int>(parse_int(t[i], lineno)));
      } else {
        fail(lineno, "unknown chart key " + t[0]);
      }
    } else if (section == "bundle") {
      if (t[0] == "rank" && t.size() >= 2) {
        bundle->rank = static_cast<int>(parse_int(t[1], lineno));
      } else if (t[0] == "coeff") {
        bundle->coeff.push_back(parse_entry(t, dim ? dim : 4, lineno));
      } else if (t[0] == "metric") {
        bundle->metric.push_back(parse_entry(t, dim ? dim : 4, lineno));
      } else {
        fail(lineno, "unknown bundle key " + t[0]);
      }
    } else if (section == "check") {
      if (t[0] == "tolerance" && t.size() >= 2) {
        check->tolerance = parse_double(t[1], lineno);
      } else if (t[0] == "expect" && t.size() >= 5 && t[2] == ":") {
        check->expects.emplace_back(
            parse_subset(t[1], lineno),
            Complex(parse_double(t[3], lineno), parse_double(t[4], lineno)));
      } else if (t.size() >= 2) {
        check->params[t[0]] = t[1];
      } else {
        fail(lineno, "bad check line");
      }
    }
  }
  if (!section.empty()) fail(lineno, "unterminated section");
  if (s.name.empty()) fail(lineno, "scenario missing a name");
  if (s.grid.empty()) fail(lineno, "scenario missing a chart");
  if (dim != static_cast<int>(s.grid.size())) {
    if (s.grid.size() == 1 && dim > 1)
      s.grid.assign(dim, s.grid[0]);
    else
      fail(lineno, "chart dim and grid size disagree");
  }
  return s;
}

namespace {

struct BuiltScenario {
  TorusChart chart;
  std::map<std::string, Connection> bundles;
};

Scal synth_field(const TorusChart& chart, const std::vector<BundleSpec::Entry>& entries,
                 Subset subset, int i, int j) {
  Scal hat = Scal::Zero(chart.npts());
  bool any = false;
  for (const auto& e : entries) {
    if (e.subset != subset || e.i != i || e.j != j) continue;
    std::array<int, 4> jj{0, 0, 0, 0};
    for (int a = 0; a < chart.dim; ++a) {
      if (2 * std::abs(e.k[a]) >= chart.n[a])
        throw ParseError("Fourier index beyond the grid Nyquist limit");
      jj[a] = (e.k[a] >= 0) ? e.k[a] : e.k[a] + chart.n[a];
    }
    hat[chart.flat_index(jj)] += e.value * static_cast<double>(chart.npts());
    any = true;
  }
  if (any) fft_inverse(chart, hat);
  return hat;
}

BuiltScenario build(const Scenario& s, int grid_scale) {
  BuiltScenario b;
  std::vector<int> grid = s.grid;
  for (int& n : grid) n *= grid_scale;
  b.chart = TorusChart::make(grid);
  for (const auto& spec : s.bundles) {
    Form coeff = Form::zero(b.chart, spec.rank);
    std::map<Subset, bool> subsets;
    for (const auto& e : spec.coeff) subsets[e.subset] = true;
    for (const auto& [sub, unused] : subsets) {
      if (subset_size(sub) != 1)
        throw ParseError("bundle " + spec.name + ": coefficients must be 1-form entries");
      MatrixField m(spec.rank, spec.rank, b.chart.npts());
      for (int i = 0; i < spec.rank; ++i)
        for (int j = 0; j < spec.rank; ++j)
          m.at(i, j) = synth_field(b.chart, spec.coeff, sub, i, j);
      coeff.comp.emplace(sub, std::move(m));
    }
    std::optional<MatrixField> metric;
    if (!spec.metric.empty()) {
      MatrixField h(spec.rank, spec.rank, b.chart.npts());
      for (int i = 0; i < spec.rank; ++i)
        for (int j = 0; j < spec.rank; ++j)
          h.at(i, j) = synth_field(b.chart, spec.metric, 0, i, j);
      if ((h - h.adjoint()).max_abs() > 1e-12)
        throw ParseError("bundle " + spec.name + ": metric is not hermitian");
      if (h.min_eig_hermitian() <= 0)
        throw ParseError("bundle " + spec.name + ": metric is not positive definite");
      metric = std::move(h);
    }
    b.bundles.emplace(spec.name, Connection::make(b.chart, coeff, std::move(metric)));
  }
  return b;
}

const Connection& need_bundle(const BuiltScenario& b, const CheckSpec& c,
                              const std::string& key) {
  auto it = c.params.find(key);
  if (it == c.params.end()) throw ParseError("check " + c.kind + " missing parameter " + key);
  auto bit = b.bundles.find(it->second);
  if (bit == b.bundles.end()) throw ParseError("check references unknown bundle " + it->second);
  return bit->second;
}

void check_expects(const CheckSpec& spec, const FormClass& cls, int dim, double tol,
                   CheckResult& out) {
  for (const auto& [sub, want] : spec.expects) {
    const Complex got = cls.period(sub, 1)(0, 0);
    out.residuals.emplace_back("expect." + subset_label(sub, dim), std::abs(got - want));
    if (std::abs(got - want) > tol) out.pass = false;
  }
}

void emit_periods(const FormClass& cls, int dim, CheckResult& out) {
  for (const auto& [sub, m] : cls.periods)
    out.periods.emplace_back(subset_label(sub, dim), m(0, 0));
}

CheckResult run_check(const BuiltScenario& b, const CheckSpec& spec, Rng& rng) {
  CheckResult out;
  out.kind = spec.kind;
  out.pass = true;
  const int dim = b.chart.dim;
  const double tol = spec.tolerance > 0 ? spec.tolerance : 1e-8;
  if (spec.tolerance > 1e-4) out.warnings.push_back("tolerance looser than 1e-4");
  if (spec.kind == "nadel") {
    const Connection& e = need_bundle(b, spec, "e");
    const Connection& f = need_bundle(b, spec, "f");
    MatrixField id = MatrixField::identity(e.rank, b.chart.npts());
    FormClass cls = nadel_class(e, f, id);
    emit_periods(cls, dim, out);
    check_expects(spec, cls, dim, tol, out);
  } else if (spec.kind == "chern") {
    const Connection& e = need_bundle(b, spec, "bundle");
    Form ch = chern_character(e);
    const double closed = linf(exterior_derivative(ch));
    out.residuals.emplace_back("closedness", closed);
    if (closed > tol) out.pass = false;
    FormClass cls = raw_periods(ch);
    emit_periods(cls, dim, out);
    check_expects(spec, cls, dim, tol, out);
  } else if (spec.kind == "transgression") {
    const Connection& e = need_bundle(b, spec, "from");
    const Connection& f = need_bundle(b, spec, "to");
    Form t = cs_transgression(e, f);
    const double resid =
        linf(exterior_derivative(t) - chern_character(f) + chern_character(e));
    out.residuals.emplace_back("transgression_identity", resid);
    if (resid > tol) out.pass = false;
    FormClass cls = raw_periods(t);
    emit_periods(cls, dim, out);
    check_expects(spec, cls, dim, tol, out);
  } else if (spec.kind == "conjugation") {
    const Connection& e = need_bundle(b, spec, "bundle");
    MatrixField h1 = random_metric(rng, b.chart, e.rank, 2, 0.15);
    MatrixField h2 = random_metric(rng, b.chart, e.rank, 2, 0.15);
    FormClass k1 = raw_periods(conjugation_transgression(e.with_metric(h1)));
    FormClass k2 = raw_periods(conjugation_transgression(e.with_metric(h2)));
    const double re = class_real_norm(k1);
    const double indep = class_distance(k1, k2);
    out.residuals.emplace_back("imaginarity", re);
    out.residuals.emplace_back("metric_independence", indep);
    if (re > tol || indep > tol) out.pass = false;
    emit_periods(k1, dim, out);
  } else if (spec.kind == "identity_suite") {
    int rank = 2, band = 2;
    double amp = 0.5;
    if (auto it = spec.params.find("rank"); it != spec.params.end()) rank = std::stoi(it->second);
    if (auto it = spec.params.find("band"); it != spec.params.end()) band = std::stoi(it->second);
    if (auto it = spec.params.find("amplitude"); it != spec.params.end())
      amp = std::stod(it->second);
    Form a = Form::zero(b.chart, rank);
    a.comp.emplace(Subset{0}, random_matrix_field(rng, b.chart, rank, band, amp));
    a.comp.emplace(Subset{1}, random_matrix_field(rng, b.chart, rank, band, amp));
    const double d2 = linf(exterior_derivative(exterior_derivative(a)));
    Form p = Form::zero(b.chart, rank);
    p.comp.emplace(Subset{1}, random_matrix_field(rng, b.chart, rank, band, amp));
    Form q = Form::zero(b.chart, rank);
    q.comp.emplace(Subset{0}, random_matrix_field(rng, b.chart, rank, band, amp));
    const double leibniz =
        linf(exterior_derivative(wedge(p, q)) -
             (wedge(exterior_derivative(p), q) - wedge(p, exterior_derivative(q))));
    Form top = Form::zero(b.chart, 1);
    top.comp.emplace(Subset{1}, random_matrix_field(rng, b.chart, 1, band, amp));
    const double stokes = std::abs(integrate_top(exterior_derivative(top)));
    Connection c0 = Connection::make(b.chart, random_one_form(rng, b.chart, rank, band, amp));
    Connection c1 = Connection::make(b.chart, random_one_form(rng, b.chart, rank, band, amp));
    Connection c2 = Connection::make(b.chart, random_one_form(rng, b.chart, rank, band, amp));
    Form tr = cs_transgression(c0, c1);
    const double trans =
        linf(exterior_derivative(tr) - chern_character(c1) + chern_character(c0));
    FormClass t02 = raw_periods(cs_transgression(c0, c2));
    FormClass t01 = raw_periods(tr);
    FormClass t12 = raw_periods(cs_transgression(c1, c2));
    const double cocycle = class_distance(t02, t01 + t12);
    auto gate = [&](const char* name, double val, double dflt) {
      const double lim = spec.tolerance > 0 ? spec.tolerance : dflt;
      out.residuals.emplace_back(name, val);
      if (val > lim) out.pass = false;
    };
    gate("d_squared", d2, 1e-12);
    gate("leibniz", leibniz, 1e-10);
    gate("stokes", stokes, 1e-10);
    gate("transgression_identity", trans, 1e-8);
    gate("cocycle", cocycle, 1e-8);
  } else {
    throw ParseError("unknown check kind " + spec.kind);
  }
  return out;
}

}  // namespace

Report run_scenario(const Scenario& s, const RunOverrides& o) {
  const auto t0 = std::chrono::steady_clock::now();
  Report r;
  r.scenario = s.name;
  r.seed = o.seed ? *o.seed : s.seed;
  r.grid_scale = o.grid_scale;
  BuiltScenario b = build(s, o.grid_scale);
  Rng rng(r.seed);
  r.pass = true;
  for (const auto& spec : s.checks) {
    CheckResult res = run_check(b, spec, rng);
    r.pass = r.pass && res.pass;
    for (const auto& w : res.warnings) r.warnings.push_back(res.kind + ": " + w);
    r.checks.push_back(std::move(res));
  }
  r.walltime_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

namespace {

std::string complex17(Complex z) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "%.17g%+.17gi", z.real(), z.imag());
  return buf;
}

std::string double17(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

std::string render_machine(const Report& r) {
  std::ostringstream out;
  out << "# begin cwb report\n";
  out << "scenario = " << r.scenario << "\n";
  out << "seed = " << r.seed << "\n";
  out << "grid_scale = " << r.grid_scale << "\n";
  for (size_t i = 0; i < r.checks.size(); ++i) {
    const auto& c = r.checks[i];
    const std::string p = "check." + std::to_string(i + 1) + ".";
    out << p << "kind = " << c.kind << "\n";
    for (const auto& [name, val] : c.residuals)
      out << p << "residual." << name << " = " << double17(val) << "\n";
    for (const auto& [name, val] : c.periods)
      out << p << "period." << name << " = " << complex17(val) << "\n";
    out << p << "pass = " << (c.pass ? "true" : "false") << "\n";
  }
  for (size_t i = 0; i < r.warnings.size(); ++i)
    out << "warning." << i + 1 << " = " << r.warnings[i] << "\n";
  out << "overall = " << (r.pass ? "pass" : "fail") << "\n";
  out << "# end cwb report\n";
  return out.str();
}

std::string render_report(const Report& r) {
  std::ostringstream out;
  out << render_machine(r);
  out << "\n";
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-4s %-18s %-6s %s\n", "NO", "CHECK", "STATUS", "DETAIL");
  out << buf;
  for (size_t i = 0; i < r.checks.size(); ++i) {
    const auto& c = r.checks[i];
    double worst = 0;
    for (const auto& [name, v] : c.residuals) worst = std::max(worst, v);
    std::snprintf(buf, sizeof(buf), "%-4zu %-18s %-6s worst residual %.3g\n", i + 1,
                  c.kind.c_str(), c.pass ? "PASS" : "FAIL", worst);
    out << buf;
  }
  std::snprintf(buf, sizeof(buf), "overall: %s (%.0f ms)\n", r.pass ? "PASS" : "FAIL",
                r.walltime_ms);
  out << buf;
  return out.str();
}

std::vector<std::pair<std::string, std::string>> bundled_scenarios() {
  static const char* flat_line_nadel = R"(name flat_line_nadel
description Nadel class of the flat line-bundle pair (d, d + 0.3 i dx) on the circle
seed 42

chart {
  dim 1
  grid 64
}

bundle E {
  rank 1
}

bundle F {
  rank 1
  coeff dx 0 0 : 0 : 0 0.3
}

check nadel {
  e E
  f F
  tolerance 1e-10
  expect dx : -0.047746482927568605 0
}
)";
  static const char* identity_suite_t2 = R"(name identity_suite_t2
description Exterior-calculus and transgression identity battery on the 2-torus
seed 7

chart {
  dim 2
  grid 64 64
}

check identity_suite {
  rank 2
  band 2
  amplitude 0.5
}
)";
  static const char* conjugation_t2 = R"(name conjugation_t2
description Conjugation transgression of a twisted bundle: imaginarity and metric independence
seed 11

chart {
  dim 2
  grid 48 48
}

bundle E {
  rank 1
  coeff dx 0 0 : 0 0 : 0 0.45
  coeff dy 0 0 : 1 0 : 0.2 0
  coeff dy 0 0 : -1 0 : 0.2 0
}

check conjugation {
  bundle E
}

check transgression {
  from E
  to E
}
)";
  return {{"flat_line_nadel", flat_line_nadel},
          {"identity_suite_t2", identity_suite_t2},
          {"conjugation_t2", conjugation_t2}};
}

std::vector<ScenarioListing> list_scenarios(const std::string& custom_dir) {
  std::vector<ScenarioListing> out;
  for (const auto& [name, text] : bundled_scenarios()) {
    Scenario s = parse_scenario(text);
    out.push_back({name, s.description, true, ""});
  }
  if (!custom_dir.empty()) {
    namespace fs = std::filesystem;
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(custom_dir))
      if (e.path().extension() == ".scn") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& p : files) {
      std::ifstream in(p);
      std::stringstream ss;
      ss << in.rdbuf();
      Scenario s = parse_scenario(ss.str());
      out.push_back({s.name, s.description, false, p.string()});
    }
  }
  std::sort(out.begin(), out.end(),
            [](const ScenarioListing& a, const ScenarioListing& b) { return a.name < b.name; });
  for (size_t i = 1; i < out.size(); ++i)
    if (out[i].name == out[i - 1].name)
      throw ParseError("duplicate scenario name " + out[i].name);
  return out;
}

}  // namespace cwb
