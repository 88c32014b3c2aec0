#include "mvsde/cli.hpp"

#include <cstdio>
#include <exception>
#include <iostream>

#include <CLI11.hpp>

#include "mvsde/experiments.hpp"

namespace mvsde {

namespace {

struct CommonOpts {
  std::string config_path;
  std::uint64_t seed = 42;
  std::string out = "";
  int threads = 1;
};

void add_common(CLI::App* sub, CommonOpts& opts) {
  sub->add_option("--config", opts.config_path, "flat key = value config file");
  sub->add_option("--seed", opts.seed, "master seed (recorded in every report)");
  sub->add_option("--out", opts.out, "output directory for series.csv and report.json");
  sub->add_option("--threads", opts.threads, "worker threads (results are thread-count independent)");
}

KeyValueConfig load_config(const CommonOpts& opts) {
  if (opts.config_path.empty()) return KeyValueConfig::from_string("");
  return KeyValueConfig::from_file(opts.config_path);
}

int finish(ExperimentReport rep, const CommonOpts& opts) {
  if (!opts.out.empty()) rep.write(opts.out);
  std::cout << rep.to_json();
  if (rep.error) return 1;
  return rep.pass ? 0 : 2;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"mean-field SDE simulation laboratory"};
  app.require_subcommand(1);

  CommonOpts chaos_opts, delta_opts, decay_opts, delay_opts, moments_opts, couple_opts,
      contraction_opts, sim_opts;

  CLI::App* chaos = app.add_subcommand("chaos", "propagation-of-chaos rate in N");
  add_common(chaos, chaos_opts);
  CLI::App* delta = app.add_subcommand("delta-rate", "discretization rate in the step size");
  add_common(delta, delta_opts);
  std::string delta_scheme;
  delta->add_option("--scheme", delta_scheme, "backward | tamed | adaptive");
  CLI::App* decay = app.add_subcommand("decay", "exponential decay of W1 in time");
  add_common(decay, decay_opts);
  CLI::App* delay = app.add_subcommand("delay-rate", "delay-perturbation rate in r0");
  add_common(delay, delay_opts);
  CLI::App* moments = app.add_subcommand("moments", "uniform moment bounds and blow-up contrast");
  add_common(moments, moments_opts);

  CLI::App* couple = app.add_subcommand("couple-check", "coupled-marginal validation");
  add_common(couple, couple_opts);
  double couple_eps = -1.0, couple_inner = -1.0;
  int couple_runs = -1;
  couple->add_option("--epsilon", couple_eps, "coupling radius");
  couple->add_option("--inner-delta", couple_inner, "inner discretization step");
  couple->add_option("--runs", couple_runs, "coupled runs");

  CLI::App* contraction = app.add_subcommand("contraction-check", "Lyapunov contraction grid check");
  add_common(contraction, contraction_opts);
  std::string contraction_model;
  double contraction_rmax = -1.0;
  int contraction_grid = -1;
  contraction->add_option("--model", contraction_model, "gallery model name");
  contraction->add_option("--rmax", contraction_rmax, "grid upper end (default 10*ell0)");
  contraction->add_option("--grid", contraction_grid, "grid points");

  CLI::App* sim = app.add_subcommand("simulate", "run one scheme and dump snapshots");
  add_common(sim, sim_opts);

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (chaos->parsed()) {
      KeyValueConfig cfg = load_config(chaos_opts);
      ChaosConfig c = ChaosConfig::from_config(cfg);
      cfg.finish();
      return finish(run_chaos_experiment(c, chaos_opts.seed, chaos_opts.threads), chaos_opts);
    }
    if (delta->parsed()) {
      KeyValueConfig cfg = load_config(delta_opts);
      DeltaRateConfig c = DeltaRateConfig::from_config(cfg);
      cfg.finish();
      if (!delta_scheme.empty()) c.scheme = scheme_kind_from_string(delta_scheme);
      return finish(run_delta_experiment(c, delta_opts.seed, delta_opts.threads), delta_opts);
    }
    if (decay->parsed()) {
      KeyValueConfig cfg = load_config(decay_opts);
      DecayConfig c = DecayConfig::from_config(cfg);
      cfg.finish();
      return finish(run_decay_experiment(c, decay_opts.seed, decay_opts.threads), decay_opts);
    }
    if (delay->parsed()) {
      KeyValueConfig cfg = load_config(delay_opts);
      DelayRateConfig c = DelayRateConfig::from_config(cfg);
      cfg.finish();
      return finish(run_delay_experiment(c, delay_opts.seed, delay_opts.threads), delay_opts);
    }
    if (moments->parsed()) {
      KeyValueConfig cfg = load_config(moments_opts);
      MomentConfig c = MomentConfig::from_config(cfg);
      cfg.finish();
      return finish(run_moment_experiment(c, moments_opts.seed, moments_opts.threads),
                    moments_opts);
    }
    if (couple->parsed()) {
      KeyValueConfig cfg = load_config(couple_opts);
      CoupleCheckConfig c = CoupleCheckConfig::from_config(cfg);
      cfg.finish();
      if (couple_eps > 0) c.validation.ccfg.epsilon = couple_eps;
      if (couple_inner > 0) c.validation.ccfg.inner_delta = couple_inner;
      if (couple_runs > 0) c.validation.runs = couple_runs;
      return finish(run_couple_check(c, couple_opts.seed, couple_opts.threads), couple_opts);
    }
    if (contraction->parsed()) {
      KeyValueConfig cfg = load_config(contraction_opts);
      ContractionCheckConfig c = ContractionCheckConfig::from_config(cfg);
      cfg.finish();
      if (!contraction_model.empty()) c.model_name = contraction_model;
      if (contraction_rmax > 0) c.r_max = contraction_rmax;
      if (contraction_grid > 0) c.n_grid = contraction_grid;
      return finish(run_contraction_check(c), contraction_opts);
    }
    if (sim->parsed()) {
      KeyValueConfig cfg = load_config(sim_opts);
      SimulateRunConfig c = SimulateRunConfig::from_config(cfg);
      cfg.finish();
      const std::string out = sim_opts.out.empty() ? "." : sim_opts.out;
      ExperimentReport rep = run_simulate(c, sim_opts.seed, sim_opts.threads, out);
      std::cout << rep.to_json();
      return rep.pass ? 0 : 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}

}  // namespace mvsde
