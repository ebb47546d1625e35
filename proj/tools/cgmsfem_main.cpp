// Command-line front end: run experiments and sweeps from JSON configs or
// built-in presets, verify solver invariants, and export per-patch spectral
// reports.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cgmsfem/experiment.hpp"
#include "cgmsfem/verify.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string preset;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  std::string store;
  int workers = 1;
};

void add_config_options(CLI::App* cmd, CommonOpts& o) {
  CLI::Option* cfg =
      cmd->add_option("--config", o.config_path, "JSON config file")
          ->check(CLI::ExistingFile);
  CLI::Option* preset = cmd->add_option(
      "--preset", o.preset,
      "built-in preset: periodic[-desk], random-inclusions[-desk], "
      "lognormal[-desk]");
  cfg->excludes(preset);
  cmd->add_option("--out", o.out_dir, "output directory")
      ->capture_default_str();
  cmd->add_option("--seed", o.seed, "override the config seed");
  cmd->add_option("--store", o.store,
                  "state storage for VTK series: final, strided, full");
  cmd->add_option("--workers", o.workers, "threads for patch eigensolves")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
}

cgmsfem::ExperimentConfig load_config(const CLI::App* cmd,
                                      const CommonOpts& o) {
  cgmsfem::ExperimentConfig cfg;
  if (!o.preset.empty()) {
    cfg = cgmsfem::preset_config(o.preset);
  } else if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    nlohmann::json j = nlohmann::json::parse(in);
    cfg = cgmsfem::config_from_json(j);
  } else {
    throw CLI::ValidationError(cmd->get_name(),
                               "need either --config or --preset");
  }
  if (cmd->count("--seed")) cfg.seed = o.seed;
  if (cmd->count("--store")) cfg.store = o.store;
  cfg.validate();
  return cfg;
}

int report_sweep(const cgmsfem::SweepResult& res, const std::string& out_dir) {
  std::cout << "wrote " << res.rows.size() << " result rows and "
            << res.vtk_files.size() << " VTK files to " << out_dir << "\n";
  std::cout << "point,L,err_w_cgm,err_w_gm,gm_over_cgm\n";
  for (const auto& line : res.summary_lines) std::cout << line << "\n";
  return 0;
}

int run_basis_report(const cgmsfem::ExperimentConfig& cfg,
                     const std::string& out_dir, int workers, int n_values,
                     const std::vector<int>& patches, int vtk_modes) {
  using namespace cgmsfem;
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const MeshPair mp = build_mesh_pair(cfg.nx, cfg.ny, cfg.Nx, cfg.Ny);
  MaterialField mat = build_background_material(cfg, mp.fine);
  if (cfg.medium == "lognormal") {
    const double sigma = cfg.sigma_values.empty() ? 1.0 : cfg.sigma_values[0];
    mat.beta =
        (mat.beta.array() *
         sample_kle_field(mp.fine,
                          KleSpec{cfg.kle_corr_len, sigma, cfg.kle_b0,
                                  cfg.kle_modes},
                          mix_seed(cfg.seed, 7000))
             .array())
            .matrix();
    mat.validate();
  }
  int L_max = 0;
  for (const int L : cfg.L_values) L_max = std::max(L_max, L);

  SpectralConfig scfg;
  scfg.H = mp.coarse.H;
  scfg.n_keep = L_max;
  scfg.gamma1 = cfg.gamma1;
  scfg.gamma2 = cfg.gamma2;
  const std::vector<PatchSpectrum> coupled =
      compute_coupled_spectra(mp, mat, scfg, workers);
  write_eigenvalue_csv((fs::path(out_dir) / "cgm_eigenvalues.csv").string(),
                       coupled, n_values);

  SpectralConfig gcfg = scfg;
  gcfg.gamma1 = 0.0;
  gcfg.gamma2 = 0.0;
  const auto [nu, nth] = decoupled_split(L_max);
  const std::vector<PatchSpectrum> decoupled =
      compute_decoupled_spectra(mp, mat, gcfg, std::max(nu, 1), nth, workers);
  write_eigenvalue_csv((fs::path(out_dir) / "gm_eigenvalues.csv").string(),
                       decoupled, n_values);

  int written = 0;
  for (const int v : patches) {
    CGM_REQUIRE_ARG(v >= 0 && v < mp.coarse.n_vertices(),
                    "basis-report: patch id out of range");
    const PatchSpectrum& S = coupled[v];
    const Patch& pa = mp.coarse.patches[v];
    for (int c = 0; c < std::min(vtk_modes, S.n_selected()); ++c) {
      const std::string path =
          (fs::path(out_dir) /
           ("patch" + std::to_string(v) + "_mode" + std::to_string(c) +
            ".vtk"))
              .string();
      write_vtk_patch_mode(path, mp.fine, pa, S.vectors.col(c),
                           "patch mode");
      ++written;
    }
  }
  std::cout << "wrote eigenvalue tables for " << coupled.size()
            << " patches and " << written << " mode files to " << out_dir
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coupled multiscale solver for quasi-static thermoelasticity "
               "in heterogeneous media"};
  app.set_version_flag("--version", cgmsfem::kLibraryVersion);
  app.require_subcommand(1);

  CommonOpts run_opts, sweep_opts, basis_opts;

  CLI::App* run_cmd =
      app.add_subcommand("run", "march one experiment point and write "
                                "results.csv, manifest.json and VTK output");
  add_config_options(run_cmd, run_opts);

  CLI::App* sweep_cmd = app.add_subcommand(
      "sweep", "expand the config sweep axes and run every point");
  add_config_options(sweep_cmd, sweep_opts);

  CLI::App* verify_cmd = app.add_subcommand(
      "verify", "run the built-in verification suites and report each check");
  int trials = 20;
  std::vector<int> verify_meshes{8, 16, 32};
  verify_cmd->add_option("--trials", trials,
                         "randomized bound trials per seminorm power")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  verify_cmd->add_option("--meshes", verify_meshes,
                         "mesh sizes for the convergence study");

  CLI::App* basis_cmd = app.add_subcommand(
      "basis-report", "export per-patch eigenvalue tables and mode shapes");
  add_config_options(basis_cmd, basis_opts);
  int n_values = 32, vtk_modes = 4;
  std::vector<int> patch_ids;
  basis_cmd->add_option("--modes", n_values,
                        "eigenvalues per patch in the CSV tables")
      ->capture_default_str();
  basis_cmd->add_option("--patch", patch_ids,
                        "patch ids whose mode shapes are written as VTK");
  basis_cmd->add_option("--vtk-modes", vtk_modes,
                        "mode shapes per requested patch")
      ->capture_default_str();

  CLI11_PARSE(app, argc, argv);

  try {
    if (run_cmd->parsed()) {
      const cgmsfem::ExperimentConfig cfg = load_config(run_cmd, run_opts);
      CGM_REQUIRE_ARG(
          cfg.beta_contrast_values.size() <= 1 && cfg.sigma_values.size() <= 1,
          "config sweeps an axis with several values; use the sweep "
          "subcommand");
      const cgmsfem::SweepResult res =
          cgmsfem::run_experiment(cfg, run_opts.out_dir, run_opts.workers);
      return report_sweep(res, run_opts.out_dir);
    }
    if (sweep_cmd->parsed()) {
      const cgmsfem::ExperimentConfig cfg = load_config(sweep_cmd, sweep_opts);
      const cgmsfem::SweepResult res =
          cgmsfem::run_experiment(cfg, sweep_opts.out_dir, sweep_opts.workers);
      return report_sweep(res, sweep_opts.out_dir);
    }
    if (verify_cmd->parsed()) {
      std::vector<cgmsfem::CheckResult> checks =
          cgmsfem::manufactured_checks(verify_meshes, 0.25);
      {
        const auto inv = cgmsfem::invariant_checks();
        checks.insert(checks.end(), inv.begin(), inv.end());
        const auto bound = cgmsfem::interpolation_bound_checks(trials);
        checks.insert(checks.end(), bound.begin(), bound.end());
      }
      for (const auto& c : checks)
        std::cout << cgmsfem::format_check_line(c) << "\n";
      const bool ok = cgmsfem::all_pass(checks);
      std::cout << (ok ? "all checks passed\n" : "checks FAILED\n");
      return ok ? 0 : 1;
    }
    if (basis_cmd->parsed()) {
      const cgmsfem::ExperimentConfig cfg = load_config(basis_cmd, basis_opts);
      return run_basis_report(cfg, basis_opts.out_dir, basis_opts.workers,
                              n_values, patch_ids, vtk_modes);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
