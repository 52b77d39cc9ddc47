#include "rpde/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <sstream>

namespace rpde {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

double to_double(const std::string& key, const std::string& value) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(value, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != value.size() || !std::isfinite(x))
    throw ConfigError("config: '" + key + "' expects a number, got '" + value + "'");
  return x;
}

std::size_t to_count(const std::string& key, const std::string& value) {
  const double x = to_double(key, value);
  if (x < 0.0 || std::floor(x) != x) throw ConfigError("config: '" + key + "' expects a nonnegative integer");
  return static_cast<std::size_t>(x);
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config: '" + key + "' expects true or false");
}

std::vector<double> to_list(const std::string& key, const std::string& value) {
  std::vector<double> out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_double(key, trim(item)));
  if (out.empty()) throw ConfigError("config: '" + key + "' expects a comma-separated list");
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"schema_version", [](auto& c, auto& k, auto& v) { c.schema_version = static_cast<int>(to_count(k, v)); }},
      {"name", [](auto& c, auto&, auto& v) { c.name = v; }},
      {"mode",
       [](auto& c, auto& k, auto& v) {
         if (v == "solve") c.mode = RunMode::solve;
         else if (v == "k_zero_synthetic") c.mode = RunMode::k_zero_synthetic;
         else if (v == "separable") c.mode = RunMode::separable;
         else throw ConfigError("config: '" + k + "' must be solve, k_zero_synthetic or separable");
       }},
      {"dimension", [](auto& c, auto& k, auto& v) { c.dim = static_cast<int>(to_count(k, v)); }},
      {"family", [](auto& c, auto&, auto& v) { c.family = v; }},
      {"grid.radius", [](auto& c, auto& k, auto& v) { c.radius = to_double(k, v); }},
      {"grid.intervals", [](auto& c, auto& k, auto& v) { c.intervals = to_count(k, v); }},
      {"grid.grading",
       [](auto& c, auto& k, auto& v) {
         if (v == "uniform") c.grading = Grading::uniform;
         else if (v == "geometric") c.grading = Grading::geometric;
         else throw ConfigError("config: '" + k + "' must be uniform or geometric");
       }},
      {"grid.ratio", [](auto& c, auto& k, auto& v) { c.ratio = to_double(k, v); }},
      {"data.eps_rel", [](auto& c, auto& k, auto& v) { c.eps_rel = to_double(k, v); }},
      {"separable.delta", [](auto& c, auto& k, auto& v) { c.separable_delta = to_double(k, v); }},
      {"solver.scheme",
       [](auto& c, auto& k, auto& v) {
         if (v == "semi_implicit") c.scheme = Scheme::semi_implicit;
         else if (v == "explicit") c.scheme = Scheme::explicit_euler;
         else throw ConfigError("config: '" + k + "' must be semi_implicit or explicit");
       }},
      {"solver.cfl_safety", [](auto& c, auto& k, auto& v) { c.cfl_safety = to_double(k, v); }},
      {"solver.ds_init", [](auto& c, auto& k, auto& v) { c.ds_init = to_double(k, v); }},
      {"solver.s_end", [](auto& c, auto& k, auto& v) { c.s_end = to_double(k, v); }},
      {"solver.extrapolate", [](auto& c, auto& k, auto& v) { c.extrapolate = to_bool(k, v); }},
      {"identity.p_list", [](auto& c, auto& k, auto& v) { c.p_list = to_list(k, v); }},
      {"tgrid.count", [](auto& c, auto& k, auto& v) { c.tgrid.count = to_count(k, v); }},
      {"tgrid.t_min", [](auto& c, auto& k, auto& v) { c.tgrid.t_min = to_double(k, v); }},
      {"tgrid.t_max", [](auto& c, auto& k, auto& v) { c.tgrid.t_max = to_double(k, v); }},
      {"scenario", [](auto& c, auto&, auto& v) { c.scenario = v; }},
      {"fit.law",
       [](auto& c, auto& k, auto& v) {
         if (v == "auto") c.fit_law = FitLaw::automatic;
         else if (v == "log_slope") c.fit_law = FitLaw::log_slope;
         else if (v == "power") c.fit_law = FitLaw::power;
         else if (v == "log_corrected") c.fit_law = FitLaw::log_corrected;
         else throw ConfigError("config: '" + k + "' must be auto, log_slope, power or log_corrected");
       }},
      {"fit.decades", [](auto& c, auto& k, auto& v) { c.fit_decades = to_double(k, v); }},
      {"fit.burn_in", [](auto& c, auto& k, auto& v) { c.burn_in = to_double(k, v); }},
      {"fit.r2_min", [](auto& c, auto& k, auto& v) { c.r2_min = to_double(k, v); }},
      {"verdict.lower", [](auto& c, auto& k, auto& v) { c.verdict_lower = to_double(k, v); }},
      {"verdict.upper", [](auto& c, auto& k, auto& v) { c.verdict_upper = to_double(k, v); }},
      {"verdict.min_t_max", [](auto& c, auto& k, auto& v) { c.min_t_max = to_double(k, v); }},
      {"out", [](auto& c, auto&, auto& v) { c.out = v; }},
  };
  return table;
}

void validate_config(const ExperimentConfig& c) {
  if (c.schema_version != 1) throw ConfigError("config: unsupported schema_version");
  if (c.dim < 1 || c.dim > 10) throw ConfigError("config: dimension must be in 1..10");
  try {
    (void)RadialGrid::build(c.dim, c.radius, c.intervals, c.grading, c.ratio);
    c.tgrid.validate();
    if (c.mode != RunMode::separable) validate(c.decay_family(), c.dim);
    if (c.mode == RunMode::solve) (void)closed_form_laws(c.decay_scenario());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (!(c.eps_rel > 0.0)) throw ConfigError("config: data.eps_rel must be positive");
  if (!(c.cfl_safety > 0.0 && c.cfl_safety <= 1.0)) throw ConfigError("config: solver.cfl_safety must lie in (0, 1]");
  if (!(c.ds_init > 0.0)) throw ConfigError("config: solver.ds_init must be positive");
  if (!(c.s_end > 0.0)) throw ConfigError("config: solver.s_end must be positive");
  if (!(c.separable_delta > 0.0)) throw ConfigError("config: separable.delta must be positive");
  for (double p : c.p_list)
    if (!(p > 0.0)) throw ConfigError("config: identity.p_list entries must be positive");
  if (!(c.fit_decades > 0.0)) throw ConfigError("config: fit.decades must be positive");
  if (!(c.burn_in >= 0.0 && c.burn_in < 1.0)) throw ConfigError("config: fit.burn_in must lie in [0, 1)");
  if (!(c.r2_min >= 0.0 && c.r2_min <= 1.0)) throw ConfigError("config: fit.r2_min must lie in [0, 1]");
  if (c.verdict_lower.has_value() != c.verdict_upper.has_value())
    throw ConfigError("config: verdict.lower and verdict.upper go together");
  if (c.verdict_lower && !(*c.verdict_lower < *c.verdict_upper))
    throw ConfigError("config: verdict.lower must be below verdict.upper");
  if (c.name.empty()) throw ConfigError("config: name must not be empty");
}

// Replaces `name=...` inside a `kind:a=1,b=2` spec; returns false if absent.
bool replace_inner(std::string& spec, const std::string& name, const std::string& value) {
  const auto colon = spec.find(':');
  if (colon == std::string::npos) return false;
  std::stringstream ss(spec.substr(colon + 1));
  std::string item, rebuilt;
  bool hit = false;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq != std::string::npos && trim(item.substr(0, eq)) == name) {
      item = name + "=" + value;
      hit = true;
    }
    rebuilt += (rebuilt.empty() ? "" : ",") + item;
  }
  if (hit) spec = spec.substr(0, colon + 1) + rebuilt;
  return hit;
}

const char* law_name(FitLaw law) {
  switch (law) {
    case FitLaw::automatic: return "auto";
    case FitLaw::log_slope: return "log_slope";
    case FitLaw::power: return "power";
    case FitLaw::log_corrected: return "log_corrected";
  }
  return "?";
}

FitLaw resolve_law(const ExperimentConfig& cfg) {
  if (cfg.fit_law != FitLaw::automatic) return cfg.fit_law;
  const Scenario s = cfg.decay_scenario();
  if (std::holds_alternative<AlgebraicScenario>(s)) return FitLaw::log_slope;
  if (std::holds_alternative<ExponentialScenario>(s)) return FitLaw::power;
  return FitLaw::log_corrected;
}

SolverConfig solver_config(const ExperimentConfig& cfg, double epsilon) {
  SolverConfig s;
  s.epsilon = epsilon;
  s.scheme = cfg.scheme;
  s.cfl_safety = cfg.cfl_safety;
  s.ds_init = cfg.ds_init;
  s.s_end = cfg.s_end;
  s.extrapolate = cfg.extrapolate;
  s.p_list = cfg.p_list;
  return s;
}

GridPtr make_grid(const ExperimentConfig& cfg) {
  return std::make_shared<const RadialGrid>(
      RadialGrid::build(cfg.dim, cfg.radius, cfg.intervals, cfg.grading, cfg.ratio));
}

// Mass ≡ 1, K ≡ 0 on s ∈ [0, t_max]: the time change is the identity.
SolutionTrace synthetic_trace(const ExperimentConfig& cfg) {
  SolutionTrace tr;
  const double s_end = cfg.tgrid.t_max;
  const std::size_t n = 1001;
  tr.lp.push_back(PSeries{1.0, {}, {}, {}});
  for (std::size_t i = 0; i < n; ++i) {
    tr.s.push_back(s_end * static_cast<double>(i) / (n - 1));
    tr.mass.push_back(1.0);
    tr.K.push_back(0.0);
    tr.sup.push_back(1.0);
    tr.center.push_back(1.0);
    tr.lp[0].integral.push_back(1.0);
    tr.lp[0].dissipation.push_back(0.0);
    tr.lp[0].cumulative.push_back(0.0);
  }
  tr.v0_max = 1.0;
  return tr;
}

struct SeparableRun {
  SolutionTrace trace;
  double error;
};

SeparableRun run_separable(const ExperimentConfig& cfg) {
  const GridPtr grid = make_grid(cfg);
  const RadialField phi = exact_phi(grid);
  const double delta = cfg.separable_delta;
  const double eps = cfg.eps_rel * delta * phi[0];
  std::vector<double> v(phi.size());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = delta * phi[i] + eps;
  SolverConfig sc = solver_config(cfg, eps);
  sc.snapshot_times = {cfg.s_end};
  SeparableRun run{solve(RadialField(grid, std::move(v)), sc), 0.0};
  const RadialField& end = run.trace.snapshots.back().v;
  const double factor = delta / (1.0 + delta * cfg.s_end);
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < end.size(); ++i) {
    err = std::max(err, std::abs(end[i] - factor * phi[i]));
    ref = std::max(ref, factor * phi[i]);
  }
  run.error = err / ref;
  return run;
}

nlohmann::json echo(const ExperimentConfig& c) {
  nlohmann::json j = {
      {"schema_version", c.schema_version},
      {"name", c.name},
      {"mode", c.mode == RunMode::solve ? "solve" : c.mode == RunMode::separable ? "separable" : "k_zero_synthetic"},
      {"dimension", c.dim},
      {"family", c.family},
      {"grid.radius", c.radius},
      {"grid.intervals", c.intervals},
      {"grid.grading", c.grading == Grading::uniform ? "uniform" : "geometric"},
      {"grid.ratio", c.ratio},
      {"data.eps_rel", c.eps_rel},
      {"separable.delta", c.separable_delta},
      {"solver.scheme", c.scheme == Scheme::semi_implicit ? "semi_implicit" : "explicit"},
      {"solver.cfl_safety", c.cfl_safety},
      {"solver.ds_init", c.ds_init},
      {"solver.s_end", c.s_end},
      {"solver.extrapolate", c.extrapolate},
      {"identity.p_list", c.p_list},
      {"tgrid.count", c.tgrid.count},
      {"tgrid.t_min", c.tgrid.t_min},
      {"tgrid.t_max", c.tgrid.t_max},
      {"scenario", c.scenario},
      {"fit.law", law_name(c.fit_law)},
      {"fit.decades", c.fit_decades},
      {"fit.burn_in", c.burn_in},
      {"fit.r2_min", c.r2_min},
      {"verdict.min_t_max", c.min_t_max},
      {"out", c.out},
  };
  j["verdict.lower"] = c.verdict_lower ? nlohmann::json(*c.verdict_lower) : nlohmann::json(nullptr);
  j["verdict.upper"] = c.verdict_upper ? nlohmann::json(*c.verdict_upper) : nlohmann::json(nullptr);
  return j;
}

void fit_and_judge(const ExperimentConfig& cfg, const TransformTables& tab, ExperimentReport& rep) {
  rep.law = resolve_law(cfg);
  rep.laws = closed_form_laws(cfg.decay_scenario());

  std::vector<double> t, E, L;
  for (std::size_t i = 0; i < tab.t_nodes.size(); ++i) {
    if (tab.t_nodes[i] <= 0.0) continue;
    t.push_back(tab.t_nodes[i]);
    E.push_back(tab.E[i]);
    L.push_back(tab.L[i]);
  }
  if (t.size() < 2) {
    rep.reason = "too few tabulated times";
    return;
  }
  const double t_end = t.back();
  double lo = t_end / std::pow(10.0, cfg.fit_decades);
  if (cfg.burn_in > 0.0) {
    double t_burn = t_end;
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (L[i] < cfg.burn_in * L.front()) {
        t_burn = t[i];
        break;
      }
    }
    lo = std::max(lo, t_burn);
  }

  if (rep.law == FitLaw::log_slope || rep.law == FitLaw::power) {
    rep.band_lower = cfg.verdict_lower.value_or(0.9 * rep.laws->lower.value);
    rep.band_upper = cfg.verdict_upper.value_or(1.1 * (rep.laws->upper ? rep.laws->upper->value : rep.laws->lower.value));
  }

  try {
    rep.fit = rep.law == FitLaw::log_slope ? fit_log_slope(t, E, lo, t_end) : fit_power(t, E, lo, t_end);
  } catch (const std::exception& e) {
    rep.verdict = "inconclusive";
    rep.reason = std::string("fit failed: ") + e.what();
    return;
  }

  if (rep.law == FitLaw::log_corrected) {
    ShapeCheck sc;
    sc.power_of_log = rep.laws->lower.value;
    const double from = t_end / std::sqrt(10.0);
    bool first = true;
    sc.ratio_min = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] < from || t[i] <= 1.0) continue;
      const double r = E[i] * std::pow(std::log(t[i]), sc.power_of_log) / t[i];
      if (first) sc.ratio_start = r;
      first = false;
      sc.ratio_end = r;
      sc.ratio_min = std::min(sc.ratio_min, r);
    }
    sc.bounded_below = !first && sc.ratio_min > 0.0 && sc.ratio_end >= 0.5 * sc.ratio_start;
    rep.shape = sc;
  }

  if (rep.attained_t_max < cfg.min_t_max) {
    rep.verdict = "inconclusive";
    rep.reason = "attained t_max below verdict.min_t_max";
  } else if (rep.fit->r2 < cfg.r2_min) {
    rep.verdict = "inconclusive";
    rep.reason = "r2 below fit.r2_min";
  } else if (rep.shape) {
    rep.verdict = rep.shape->bounded_below ? "pass" : "fail";
    rep.reason = "E ln^c(t)/t over the final half decade";
  } else {
    const bool in_band = rep.fit->slope >= rep.band_lower && rep.fit->slope <= rep.band_upper;
    rep.verdict = in_band ? "pass" : "fail";
    rep.reason = in_band ? "fitted rate inside band" : "fitted rate outside band";
  }
}

}  // namespace

ExperimentConfig config_from_entries(const std::map<std::string, std::string>& entries) {
  ExperimentConfig cfg;
  if (!entries.count("schema_version")) throw ConfigError("config: missing schema_version");
  const auto& table = setters();
  for (const auto& [key, value] : entries) {
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("config: unknown key '" + key + "'");
    it->second(cfg, key, value);
  }
  cfg.entries = entries;
  validate_config(cfg);
  return cfg;
}

ExperimentConfig parse_config(std::istream& in) {
  std::map<std::string, std::string> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
    if (key.empty()) throw ConfigError("config: line " + std::to_string(lineno) + ": empty key");
    if (!entries.emplace(key, value).second)
      throw ConfigError("config: line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return config_from_entries(entries);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path.string());
  return parse_config(in);
}

ExperimentConfig with_parameter(const ExperimentConfig& cfg, const std::string& name, const std::string& value) {
  auto entries = cfg.entries;
  if (setters().count(name)) {
    entries[name] = value;
  } else {
    std::string family = cfg.family, scenario = cfg.scenario;
    const bool in_family = replace_inner(family, name, value);
    const bool in_scenario = replace_inner(scenario, name, value);
    if (!in_family && !in_scenario) throw ConfigError("sweep: unknown parameter '" + name + "'");
    entries["family"] = family;
    entries["scenario"] = scenario;
  }
  entries["schema_version"] = std::to_string(cfg.schema_version);
  return config_from_entries(entries);
}

nlohmann::json ExperimentReport::to_json(const ExperimentConfig& cfg) const {
  nlohmann::json fitted = {{"law", law_name(law)}, {"attained_t_max", attained_t_max}, {"truncated", truncated}};
  if (fit) {
    fitted["rate"] = fit->slope;
    fitted.update(fit->to_json());
  }
  if (shape) {
    fitted["shape"] = {{"power_of_log", shape->power_of_log}, {"ratio_min", shape->ratio_min},
                       {"ratio_start", shape->ratio_start},   {"ratio_end", shape->ratio_end},
                       {"bounded_below", shape->bounded_below}};
  }

  nlohmann::json predicted = nlohmann::json::object();
  if (laws) {
    predicted["upper"] = laws->upper ? laws->upper->to_json() : nlohmann::json(nullptr);
    predicted["lower"] = laws->lower.to_json();
    predicted["band"] = {band_lower, band_upper};
    predicted["scenario"] = cfg.scenario;
  }

  nlohmann::json identity = nlohmann::json::array();
  for (const auto& r : residuals) identity.push_back(rpde::to_json(r));
  nlohmann::json res = {
      {"identity", identity},
      {"unit_mass_worst", unit_mass_worst},
      {"monotonicity",
       {{"violations", monotonicity.violations}, {"max_uptick", monotonicity.max_uptick},
        {"decay_checked", monotonicity.decay_checked}, {"decays", monotonicity.decays}}},
      {"energy_inequality", {{"checked", inequality_checked}, {"failures", inequality_failures}}},
      {"transform",
       {{"inverse_error", diagnostics.inverse_error}, {"h_prime_vs_g", diagnostics.h_prime_vs_g},
        {"g_prime_vs_gL", diagnostics.g_prime_vs_gL}, {"energy_integral_gap", diagnostics.energy_integral_gap},
        {"E_over_t_decreasing", diagnostics.E_over_t_decreasing},
        {"h_prime_nondecreasing", diagnostics.h_prime_nondecreasing}}},
  };
  res["exact_error"] = exact_error ? nlohmann::json(*exact_error) : nlohmann::json(nullptr);

  nlohmann::json verdict_json = {{"status", verdict},
                                 {"reason", reason},
                                 {"r2_min", cfg.r2_min},
                                 {"min_t_max", cfg.min_t_max},
                                 {"accepted_steps", accepted_steps},
                                 {"rejected_steps", rejected_steps},
                                 {"wall_clock_s", wall_clock_s},
                                 {"warnings", warnings}};
  return {{"config_echo", echo(cfg)},
          {"fitted", fitted},
          {"predicted", predicted},
          {"residuals", res},
          {"verdict", verdict_json}};
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  const auto started = std::chrono::steady_clock::now();
  ExperimentResult res;
  ExperimentReport& rep = res.report;

  if (cfg.mode == RunMode::separable) {
    SeparableRun run = run_separable(cfg);
    res.trace = std::move(run.trace);
    rep.exact_error = run.error;
    for (double p : cfg.p_list) rep.residuals.push_back(lp_identity_residual(res.trace, p));
    rep.verdict = run.error <= 1e-3 ? "pass" : "fail";
    rep.reason = "relative error against the separable solution at s_end";
  } else {
    if (cfg.mode == RunMode::k_zero_synthetic) {
      res.trace = synthetic_trace(cfg);
    } else {
      const GridPtr grid = make_grid(cfg);
      const RegularizedData data = regularized_unit_mass_data(cfg.decay_family(), grid, cfg.eps_rel);
      SolverConfig sc = solver_config(cfg, data.epsilon);
      sc.t_target = cfg.tgrid.t_max;
      TimeChangeSampler sampler(cfg.tgrid.nodes(), data.v0);
      res.trace = solve(data.v0, sc, sampler.observer());
      res.samples = sampler.samples();
    }

    res.tables = build_tables(res.trace, cfg.tgrid);
    const TransformTables& tab = *res.tables;
    rep.attained_t_max = tab.attained_t_max;
    rep.truncated = tab.truncated;
    rep.warnings = tab.warnings;
    for (double p : cfg.p_list)
      if (res.trace.series_for(p)) rep.residuals.push_back(lp_identity_residual(res.trace, p));

    if (res.samples.empty()) {
      for (std::size_t i = 0; i < tab.t_nodes.size(); ++i) {
        const std::size_t j = std::min<std::size_t>(
            static_cast<std::size_t>(std::upper_bound(tab.s_nodes.begin(), tab.s_nodes.end(), tab.h[i]) -
                                     tab.s_nodes.begin()),
            tab.s_nodes.size() - 1);
        const std::size_t a = j == 0 ? 0 : j - 1;
        const double w = tab.s_nodes[j] > tab.s_nodes[a] ? (tab.h[i] - tab.s_nodes[a]) / (tab.s_nodes[j] - tab.s_nodes[a]) : 0.0;
        const double mass = (1.0 - w) * tab.Hprime[a] + w * tab.Hprime[j];
        rep.unit_mass_worst = std::max(rep.unit_mass_worst, std::abs(tab.g[i] * mass - 1.0));
      }
    }
    for (const auto& sm : res.samples) {
      rep.unit_mass_worst = std::max(rep.unit_mass_worst, std::abs(integrate(sm.u) - 1.0));
      ++rep.inequality_checked;
      try {
        if (!energy_inequality_check(sm.u).ok) ++rep.inequality_failures;
      } catch (const std::domain_error&) {
        ++rep.inequality_failures;
      }
    }

    std::vector<double> t, L;
    for (std::size_t i = 0; i < tab.t_nodes.size(); ++i) {
      if (tab.t_nodes[i] <= 0.0) continue;
      t.push_back(tab.t_nodes[i]);
      L.push_back(tab.L[i]);
    }
    rep.monotonicity = energy_monotonicity_check(t, L);
    rep.diagnostics = check_identities(tab);

    if (cfg.mode == RunMode::k_zero_synthetic) {
      rep.law = FitLaw::log_slope;
      double worst = 0.0;
      for (std::size_t i = 0; i < tab.t_nodes.size(); ++i)
        worst = std::max({worst, std::abs(tab.E[i]), std::abs(tab.g[i] - 1.0), std::abs(tab.h[i] - tab.t_nodes[i])});
      rep.fit = fit_log_slope(tab.t_nodes, tab.E, cfg.tgrid.t_min, cfg.tgrid.t_max);
      rep.verdict = worst <= 1e-12 ? "pass" : "fail";
      rep.reason = "identity time change expected for K = 0";
    } else {
      fit_and_judge(cfg, tab, rep);
    }
  }

  rep.accepted_steps = res.trace.accepted_steps;
  rep.rejected_steps = res.trace.rejected_steps;
  rep.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return res;
}

void write_outputs(const ExperimentResult& result, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::vector<std::pair<fs::path, fs::path>> staged;
  auto stage = [&](const std::string& name, const std::function<void(std::ostream&)>& body) {
    const fs::path tmp = dir / ("." + name + ".partial");
    std::ofstream out(tmp);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    body(out);
    out.close();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
    staged.emplace_back(tmp, dir / name);
  };

  try {
    stage("trace.csv", [&](std::ostream& o) { write_trace_csv(o, result.trace); });
    if (result.tables) {
      const TransformTables& tab = *result.tables;
      stage("tables.csv", [&](std::ostream& o) { write_t_table_csv(o, tab); });
      stage("s_tables.csv", [&](std::ostream& o) { write_s_table_csv(o, tab); });
      const auto& rep = result.report;
      if (rep.laws) {
        std::vector<double> t;
        double anchor_t = 0.0, anchor_E = 0.0;
        for (std::size_t i = 0; i < tab.t_nodes.size(); ++i) {
          if (tab.t_nodes[i] <= 0.0) continue;
          t.push_back(tab.t_nodes[i]);
          if (rep.fit && anchor_t == 0.0 && tab.t_nodes[i] >= rep.fit->t_lo) {
            anchor_t = tab.t_nodes[i];
            anchor_E = tab.E[i];
          }
        }
        stage("predictions.csv", [&](std::ostream& o) { write_predictions_csv(o, t, *rep.laws, anchor_t, anchor_E); });
      }
    }
    stage("report.json", [&](std::ostream& o) { o << result.report.to_json(cfg).dump(2) << '\n'; });
  } catch (...) {
    for (const auto& [tmp, final_path] : staged) fs::remove(tmp);
    throw;
  }
  for (const auto& [tmp, final_path] : staged) fs::rename(tmp, final_path);
}

nlohmann::json ConvergenceReport::to_json() const {
  nlohmann::json lv = nlohmann::json::array();
  for (const auto& l : levels) {
    nlohmann::json res = nlohmann::json::array();
    for (const auto& r : l.residuals) res.push_back(rpde::to_json(r));
    lv.push_back({{"intervals", l.intervals},
                  {"cfl_safety", l.cfl_safety},
                  {"steps", l.steps},
                  {"exact_error", l.exact_error ? nlohmann::json(*l.exact_error) : nlohmann::json(nullptr)},
                  {"residuals", res}});
  }
  nlohmann::json ro = nlohmann::json::array();
  for (const auto& [p, orders] : residual_orders) ro.push_back({{"p", p}, {"orders", orders}});
  return {{"levels", lv}, {"exact_orders", exact_orders}, {"residual_orders", ro}};
}

ConvergenceReport converge(const ExperimentConfig& cfg, int levels) {
  if (levels < 2) throw std::invalid_argument("converge: need at least two levels");
  ConvergenceReport rep;
  for (int k = 0; k < levels; ++k) {
    ExperimentConfig c = cfg;
    c.intervals = cfg.intervals << k;
    // nested refinement: each coarse cell splits into two
    if (c.grading == Grading::geometric) c.ratio = std::pow(cfg.ratio, 1.0 / static_cast<double>(1 << k));
    // the explicit limit already shrinks ds fourfold per level
    if (c.scheme == Scheme::semi_implicit) {
      c.cfl_safety = cfg.cfl_safety / static_cast<double>(1 << k);
      c.ds_init = cfg.ds_init / static_cast<double>(1 << k);
    }
    ConvergenceLevel level{c.intervals, c.cfl_safety, 0, std::nullopt, {}};
    SolutionTrace trace;
    if (c.mode == RunMode::separable) {
      SeparableRun run = run_separable(c);
      level.exact_error = run.error;
      trace = std::move(run.trace);
    } else if (c.mode == RunMode::solve) {
      const GridPtr grid = make_grid(c);
      const RegularizedData data = regularized_unit_mass_data(c.decay_family(), grid, c.eps_rel);
      SolverConfig sc = solver_config(c, data.epsilon);
      sc.t_target = c.tgrid.t_max;
      trace = solve(data.v0, sc);
    } else {
      throw std::invalid_argument("converge: not available for synthetic traces");
    }
    level.steps = trace.accepted_steps;
    for (double p : c.p_list) level.residuals.push_back(lp_identity_residual(trace, p));
    rep.levels.push_back(std::move(level));
  }
  auto order = [](double coarse, double fine) {
    return coarse > 0.0 && fine > 0.0 ? std::log2(coarse / fine) : std::nan("");
  };
  for (std::size_t k = 1; k < rep.levels.size(); ++k)
    if (rep.levels[k].exact_error)
      rep.exact_orders.push_back(order(*rep.levels[k - 1].exact_error, *rep.levels[k].exact_error));
  for (std::size_t j = 0; j < cfg.p_list.size(); ++j) {
    std::vector<double> orders;
    for (std::size_t k = 1; k < rep.levels.size(); ++k)
      orders.push_back(order(rep.levels[k - 1].residuals[j].worst_rel, rep.levels[k].residuals[j].worst_rel));
    rep.residual_orders.emplace_back(cfg.p_list[j], std::move(orders));
  }
  return rep;
}

nlohmann::json SweepReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& e : entries) {
    nlohmann::json row = {{"value", e.value}};
    if (e.report && e.report->fit) {
      row["rate"] = e.report->fit->slope;
      row["r2"] = e.report->fit->r2;
      row["verdict"] = e.report->verdict;
      row["attained_t_max"] = e.report->attained_t_max;
    } else if (e.report) {
      row["verdict"] = e.report->verdict;
    }
    if (!e.error.empty()) row["error"] = e.error;
    rows.push_back(row);
  }
  return {{"parameter", parameter}, {"entries", rows}, {"strictly_increasing", strictly_increasing}};
}

SweepReport sweep(const ExperimentConfig& cfg, const std::string& parameter, const std::vector<std::string>& values,
                  const std::filesystem::path& out) {
  if (values.empty()) throw ConfigError("sweep: empty value list");
  (void)with_parameter(cfg, parameter, values.front());

  std::vector<std::future<SweepEntry>> jobs;
  for (const auto& value : values) {
    jobs.push_back(std::async(std::launch::async, [&cfg, &parameter, &out, value]() {
      SweepEntry entry{value, std::nullopt, {}};
      try {
        const ExperimentConfig c = with_parameter(cfg, parameter, value);
        ExperimentResult r = run_experiment(c);
        if (!out.empty()) write_outputs(r, c, out / (parameter + "=" + value));
        entry.report = std::move(r.report);
      } catch (const std::exception& e) {
        entry.error = e.what();
      }
      return entry;
    }));
  }
  SweepReport rep;
  rep.parameter = parameter;
  for (auto& j : jobs) rep.entries.push_back(j.get());

  rep.strictly_increasing = true;
  for (std::size_t k = 0; k < rep.entries.size(); ++k) {
    const auto& e = rep.entries[k];
    if (!e.report || !e.report->fit) {
      rep.strictly_increasing = false;
      break;
    }
    if (k > 0 && !(e.report->fit->slope > rep.entries[k - 1].report->fit->slope)) rep.strictly_increasing = false;
  }

  if (!out.empty()) {
    std::filesystem::create_directories(out);
    std::ofstream js(out / "sweep.json");
    js << rep.to_json().dump(2) << '\n';
    std::ofstream csv(out / "sweep.csv");
    csv << "param,value,rate,r2,verdict\n";
    char buf[128];
    for (const auto& e : rep.entries) {
      const bool ok = e.report && e.report->fit;
      std::snprintf(buf, sizeof buf, ",%.17g,%.17g,", ok ? e.report->fit->slope : std::nan(""),
                    ok ? e.report->fit->r2 : std::nan(""));
      csv << parameter << ',' << e.value << buf << (e.report ? e.report->verdict : std::string("error")) << '\n';
    }
  }
  return rep;
}

void write_prediction_table(std::ostream& out, const Scenario& scenario, double t_max, std::size_t count) {
  const double t0 = std::exp(1.0);
  if (!(t_max > t0)) throw std::invalid_argument("predict: t_max must exceed e");
  if (count < 2) throw std::invalid_argument("predict: need at least two points");
  const LawPair laws = closed_form_laws(scenario);
  std::vector<double> t;
  for (std::size_t k = 0; k < count; ++k)
    t.push_back(k + 1 == count ? t_max : t0 * std::pow(t_max / t0, static_cast<double>(k) / (count - 1)));
  write_predictions_csv(out, t, laws, 0.0, 0.0);
}

}  // namespace rpde
