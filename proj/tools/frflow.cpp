// frflow command-line front end. Flags override --config (TOML), which overrides defaults.

#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "frflow/cli.hpp"

int main(int argc, char** argv) {
  using frflow::cli::RunConfig;
  RunConfig cfg;
  CLI::App app{"Fisher-Rao gradient flows of f-divergences: flows, inequality checks, geodesics, counterexamples"};
  app.set_config("--config", "", "TOML configuration file");
  app.require_subcommand(1);

  double alpha = 0.0;
  double window_start = 0.0;
  double window_end = 0.0;
  double eps_bound = 0.0;
  std::string save_config;

  auto* o_alpha = app.add_option("--alpha", alpha, "Constant tested by checkers (default 0.01; kpoint derives it)");
  app.add_option("--gen", cfg.gen, "Generator: kl, reverse-kl, chi2, reverse-chi2, power:<p>")->capture_default_str();
  app.add_option("--pair", cfg.pair,
                 "Density pair: two-point:<x1>:<x2>, gaussian:mu=..,s2=.., random:K=.., simplex:<rho>/<rho*>, "
                 "mollified:x1=..,x2=.., or a JSON file");
  app.add_option("--T", cfg.T, "Final time")->capture_default_str();
  app.add_option("--dt", cfg.dt, "RK4 step")->capture_default_str();
  app.add_option("--K", cfg.K, "Support size (maximum size for random pair sources)")->capture_default_str();
  app.add_option("--samples", cfg.samples, "Number of sampled configurations")->capture_default_str();
  app.add_option("--seed", cfg.seed, "Random seed")->capture_default_str();
  app.add_option("--p", cfg.p, "Power-family exponent for dual-conjugate")->capture_default_str();
  app.add_option("--out", cfg.out, "Output prefix; writes <out>.json (and <out>.csv). Default: JSON on stdout");
  app.add_option("--mu2", cfg.mu2, "Gaussian mean squared")->capture_default_str();
  app.add_option("--sigma2", cfg.sigma2, "Gaussian variance")->capture_default_str();
  app.add_option("--eps", cfg.eps, "x1 = e^eps for two-value constructions")->capture_default_str();
  auto* o_eps_bound = app.add_option("--eps-bound", eps_bound, "Target ratio bound for gdc-twovalue");
  app.add_option("--M", cfg.M, "x2 = e^-M, or Gaussian parameter M")->capture_default_str();
  app.add_option("--sweep-M", cfg.sweep_M, "Counterexample sweep over M, written to <out>.csv")->delimiter(',');
  app.add_option("--per-decade", cfg.per_decade, "Log-grid density")->capture_default_str();
  app.add_option("--x-min", cfg.x_min, "Smallest grid ratio")->capture_default_str();
  app.add_option("--y-max", cfg.y_max, "Largest grid ratio")->capture_default_str();
  app.add_option("--observe", cfg.observe, "Flow observables (D_f, D_fbar, chi2_reverse, grad_norm_sq, D:<gen>, a+b)")
      ->delimiter(',');
  auto* o_ws = app.add_option("--window-start", window_start, "Decay-rate fit window start");
  auto* o_we = app.add_option("--window-end", window_end, "Decay-rate fit window end");
  app.add_flag("--store-state", cfg.store_state, "Include the full state in the flow CSV");
  app.add_flag("--soft-floor", cfg.soft_floor, "Clamp components at 1e-14 instead of failing");
  app.add_option("--concentration", cfg.concentration, "Dirichlet concentration for random pairs")->capture_default_str();
  app.add_option("--save-config", save_config, "Write the effective configuration as TOML and continue");

  auto* flow = app.add_subcommand("flow", "Integrate the Fisher-Rao gradient flow");
  auto* check = app.add_subcommand("check", "Run an inequality checker");
  check->add_option("id", cfg.subcommand, "Checker")->required()->check(CLI::IsMember(frflow::cli::checker_ids()));
  auto* geodesic = app.add_subcommand("geodesic", "Distances, interpolation and geodesic ODE between rho and rho*");
  auto* counter = app.add_subcommand("counterexample", "Closed-form counterexamples");
  counter->add_option("id", cfg.subcommand, "Construction")
      ->required()
      ->check(CLI::IsMember(frflow::cli::counterexample_ids()));
  for (auto* sub : {flow, check, geodesic, counter}) sub->fallthrough()->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : frflow::cli::kFail;
  }

  if (o_alpha->count() > 0) cfg.alpha = alpha;
  if (o_eps_bound->count() > 0) cfg.eps_bound = eps_bound;
  if (o_ws->count() > 0) cfg.window_start = window_start;
  if (o_we->count() > 0) cfg.window_end = window_end;
  for (auto* sub : {flow, check, geodesic, counter}) {
    if (sub->parsed()) cfg.command = sub->get_name();
  }

  if (!save_config.empty()) {
    try {
      frflow::cli::write_atomic(save_config, app.config_to_str(false, false));
    } catch (const std::exception& e) {
      std::cerr << "frflow: " << e.what() << '\n';
      return frflow::cli::kFail;
    }
  }
  return frflow::cli::run(cfg);
}
