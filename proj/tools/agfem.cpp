#include <CLI11.hpp>

#include <cstdio>
#include <exception>

#include "agfem/experiments.hpp"

namespace {

void add_common(CLI::App* cmd, agfem::RunConfig& cfg, std::string& config_path) {
  cmd->add_option("--config", config_path, "key=value config file (flags override it)");
  cmd->add_option("--dim", cfg.dim, "spatial dimension (2 or 3)");
  cmd->add_option("--order", cfg.q, "polynomial order q");
  cmd->add_option("--flavor", cfg.flavor, "standard | aggregated");
  cmd->add_option("--beta", cfg.beta, "Nitsche coefficient");
  cmd->add_option("--eps", cfg.eps, "edge-cut snapping tolerance");
  cmd->add_option("--subdiv", cfg.subdiv, "cut-cell subdivision depth r");
  cmd->add_option("--out", cfg.out, "output directory");
  cmd->add_option("--shape", cfg.shape, "circle | sphere | popcorn");
  cmd->add_option("--scale", cfg.scale, "body scale factor");
  cmd->add_option("--m", cfg.m, "cells per axis = 2^m");
  cmd->add_option("--samples", cfg.samples, "moving-domain sample count");
  cmd->add_option("--min-m", cfg.m_min, "coarsest refinement level");
  cmd->add_option("--max-m", cfg.m_max, "finest refinement level");
  cmd->add_option("--threads", cfg.threads, "OpenMP threads (0 = default)");
  cmd->add_flag("--serial", cfg.serial, "use the serial reference kernels");
  cmd->add_flag("--vtk", cfg.vtk, "write VTK output");
  cmd->add_option("--kappa", cfg.est_kappa, "estimate condition numbers (0/1)");
  cmd->add_option("--eta0", cfg.eta0, "aggregation seeding threshold (experimental)");
}

agfem::RunConfig merge(const CLI::App* cmd, agfem::RunConfig cli_cfg,
                       const std::string& config_path) {
  if (config_path.empty()) return cli_cfg;
  agfem::RunConfig cfg = agfem::parse_config_file(config_path);
  // command-line values win over the file
  auto keep = [&](const std::string& flag) { return cmd->count(flag) > 0; };
  if (keep("--dim")) cfg.dim = cli_cfg.dim;
  if (keep("--order")) cfg.q = cli_cfg.q;
  if (keep("--flavor")) cfg.flavor = cli_cfg.flavor;
  if (keep("--beta")) cfg.beta = cli_cfg.beta;
  if (keep("--eps")) cfg.eps = cli_cfg.eps;
  if (keep("--subdiv")) cfg.subdiv = cli_cfg.subdiv;
  if (keep("--out")) cfg.out = cli_cfg.out;
  if (keep("--shape")) cfg.shape = cli_cfg.shape;
  if (keep("--scale")) cfg.scale = cli_cfg.scale;
  if (keep("--m")) cfg.m = cli_cfg.m;
  if (keep("--samples")) cfg.samples = cli_cfg.samples;
  if (keep("--min-m")) cfg.m_min = cli_cfg.m_min;
  if (keep("--max-m")) cfg.m_max = cli_cfg.m_max;
  if (keep("--threads")) cfg.threads = cli_cfg.threads;
  if (keep("--serial")) cfg.serial = cli_cfg.serial;
  if (keep("--vtk")) cfg.vtk = cli_cfg.vtk;
  if (keep("--kappa")) cfg.est_kappa = cli_cfg.est_kappa;
  if (keep("--eta0")) cfg.eta0 = cli_cfg.eta0;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Aggregated unfitted FEM experiments"};
  app.require_subcommand(1);

  agfem::RunConfig cfg_v, cfg_c, cfg_m;
  std::string conf_v, conf_c, conf_m;
  auto* validate = app.add_subcommand("validate", "invariant checks; nonzero exit on failure");
  add_common(validate, cfg_v, conf_v);
  auto* conv = app.add_subcommand("convergence", "mesh refinement study (CSV)");
  add_common(conv, cfg_c, conf_c);
  auto* moving = app.add_subcommand("moving-domain", "domain position sweep (CSV)");
  add_common(moving, cfg_m, conf_m);

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) return agfem::run_validate(merge(validate, cfg_v, conf_v));
    if (conv->parsed()) {
      const auto res = agfem::run_convergence(merge(conv, cfg_c, conf_c));
      std::printf("wrote %s (slopes: kappa %.3f, energy %.3f, L2 %.3f)\n", res.csv_path.c_str(),
                  res.slope_kappa, res.slope_energy, res.slope_l2);
      return 0;
    }
    if (moving->parsed()) {
      const auto res = agfem::run_moving_domain(merge(moving, cfg_m, conf_m));
      std::printf("wrote %s (%zu samples)\n", res.csv_path.c_str(), res.rows.size());
      return 0;
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
