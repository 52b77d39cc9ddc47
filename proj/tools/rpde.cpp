#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "rpde/harness.hpp"

namespace {

std::vector<std::string> split_values(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void print_summary(const rpde::ExperimentReport& rep) {
  std::printf("verdict      %s (%s)\n", rep.verdict.c_str(), rep.reason.c_str());
  std::printf("attained t   %.6g%s\n", rep.attained_t_max, rep.truncated ? " (truncated)" : "");
  if (rep.fit)
    std::printf("fitted rate  %.6f +- %.2g  r2 %.5f  window [%.4g, %.4g]\n", rep.fit->slope,
                rep.fit->stderr_slope, rep.fit->r2, rep.fit->t_lo, rep.fit->t_hi);
  if (rep.laws && rep.band_upper > rep.band_lower) std::printf("band         [%.4f, %.4f]\n", rep.band_lower, rep.band_upper);
  if (rep.shape)
    std::printf("shape        ratio min %.4g start %.4g end %.4g\n", rep.shape->ratio_min,
                rep.shape->ratio_start, rep.shape->ratio_end);
  if (rep.exact_error) std::printf("exact error  %.3e\n", *rep.exact_error);
  for (const auto& r : rep.residuals) std::printf("residual p=%-4g %.3e\n", r.p, r.worst_rel);
  std::printf("steps        %zu accepted, %zu rejected, %.2f s\n", rep.accepted_steps,
              rep.rejected_steps, rep.wall_clock_s);
  for (const auto& w : rep.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Degenerate radial diffusion lab"};
  app.require_subcommand(1);

  std::string config_path, out_dir, param, values, scenario;
  int levels = 3;
  double t_max = 1e6;
  std::size_t count = 50;

  auto* run = app.add_subcommand("run", "solve, transform, fit and judge one experiment");
  run->add_option("--config", config_path)->required();
  run->add_option("--out", out_dir, "output directory (defaults to the config's out)");

  auto* conv = app.add_subcommand("converge", "refinement study");
  conv->add_option("--config", config_path)->required();
  conv->add_option("--levels", levels)->default_val(3);
  conv->add_option("--out", out_dir, "write converge.json here");

  auto* swp = app.add_subcommand("sweep", "one run per parameter value");
  swp->add_option("--config", config_path)->required();
  swp->add_option("--param", param)->required();
  swp->add_option("--values", values)->required();
  swp->add_option("--out", out_dir, "output root (defaults to the config's out)");

  auto* pred = app.add_subcommand("predict", "closed-form prediction table, no solve");
  pred->add_option("--scenario", scenario)->required();
  pred->add_option("--tmax", t_max)->required();
  pred->add_option("--count", count)->default_val(50);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*pred) {
      rpde::Scenario sc;
      try {
        sc = rpde::parse_scenario(scenario);
      } catch (const std::exception& e) {
        throw rpde::ConfigError(e.what());
      }
      rpde::write_prediction_table(std::cout, sc, t_max, count);
      return 0;
    }

    const rpde::ExperimentConfig cfg = rpde::load_config(config_path);
    if (out_dir.empty()) out_dir = cfg.out;

    if (*run) {
      const rpde::ExperimentResult result = rpde::run_experiment(cfg);
      rpde::write_outputs(result, cfg, out_dir);
      print_summary(result.report);
      return 0;
    }
    if (*conv) {
      const rpde::ConvergenceReport rep = rpde::converge(cfg, levels);
      const auto js = rep.to_json();
      std::cout << js.dump(2) << '\n';
      if (conv->count("--out")) {
        std::filesystem::create_directories(out_dir);
        std::ofstream(std::filesystem::path(out_dir) / "converge.json") << js.dump(2) << '\n';
      }
      return 0;
    }
    if (*swp) {
      const auto list = split_values(values);
      if (list.empty()) throw rpde::ConfigError("sweep: empty value list");
      const rpde::SweepReport rep = rpde::sweep(cfg, param, list, out_dir);
      std::cout << rep.to_json().dump(2) << '\n';
      return 0;
    }
  } catch (const rpde::ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
