#pragma once

//! Experiment configuration: strict JSON (unknown keys are errors, so typos
//! cannot silently fall back to defaults), a small registry of named source
//! terms, and the built-in experiment presets.

#include <array>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cgmsfem/assembly.hpp"
#include "cgmsfem/common.hpp"

namespace cgmsfem {

struct ExperimentConfig {
  std::string experiment_id = "run";

  // meshes
  int nx = 40, ny = 40;
  int Nx = 4, Ny = 4;
  std::string pou = "bilinear";  // bilinear | msfem-harmonic

  // medium: constant | periodic | random-raster | raster-file | lognormal
  std::string medium = "periodic";
  int period = 10;
  std::string inclusion_shape = "square";  // square | disk
  double inclusion_rel = 0.5;
  int raster_pixels = 15;
  double raster_fill = 0.35;
  std::string raster_path;
  double kle_corr_len = 0.1;
  int kle_modes = 50;
  double kle_b0 = 0.0;
  int n_samples = 1;
  std::uint64_t seed = 2024;

  // two-phase coefficient values [background, inclusion]; the lognormal
  // medium multiplies the background beta by the sampled field
  std::array<double, 2> lambda_v{1.0, 1.0};
  std::array<double, 2> mu_v{0.5, 0.5};
  std::array<double, 2> kappa_v{1.0, 1.0};
  std::array<double, 2> beta_v{0.1, 0.1};

  // coupling and coarse space
  double gamma1 = 0.5, gamma2 = 0.05;
  std::vector<int> L_values{8};
  bool rank_drop = false;

  // clamped boundary part for both fields: all | bottom. Experiments clamp
  // only the bottom edge and leave the rest insulated / traction free.
  std::string dirichlet = "bottom";

  // time march
  double tau = 0.05;
  int n_steps = 10;

  // sources and initial data
  std::string f_source = "zero";
  std::string g_source = "gaussian-bump";
  std::string theta0_source = "zero";

  // sweep axes (empty = not swept)
  std::vector<double> beta_contrast_values;
  std::vector<double> sigma_values;

  // methods and output
  bool run_cgm = true, run_gm = true, run_fine = true;
  std::string store = "final";  // final | strided | full
  int store_stride = 5;
  bool write_vtk = true;

  void validate() const;
};

//! Named scalar sources; "constant:V" takes a literal value.
inline ScalarSource make_scalar_source(const std::string& name) {
  if (name == "zero") return [](double, double, double) { return 0.0; };
  if (name == "gaussian-bump")
    return [](double x, double y, double) {
      return 10.0 *
             std::exp(-((x - 0.2) * (x - 0.2) + (y - 0.4) * (y - 0.4)) / 0.08);
    };
  if (name == "poly-bump")
    return [](double x, double y, double) {
      return 500.0 * x * (1.0 - x) * y * (1.0 - y);
    };
  if (name == "cos-bump")
    return [](double x, double y, double) {
      return std::cos(M_PI * x) * std::cos(M_PI * y) + 1.5;
    };
  if (name.rfind("constant:", 0) == 0) {
    const double v = std::stod(name.substr(9));
    return [v](double, double, double) { return v; };
  }
  fail_arg("unknown scalar source '" + name + "'");
}

//! Named vector sources; "constant:ax,ay" takes literal components.
inline VectorSource make_vector_source(const std::string& name) {
  if (name == "zero")
    return [](double, double, double) { return Eigen::Vector2d(0, 0); };
  if (name.rfind("constant:", 0) == 0) {
    const std::string body = name.substr(9);
    const std::size_t comma = body.find(',');
    CGM_REQUIRE_ARG(comma != std::string::npos,
                    "vector source needs 'constant:ax,ay'");
    const double ax = std::stod(body.substr(0, comma));
    const double ay = std::stod(body.substr(comma + 1));
    return [ax, ay](double, double, double) { return Eigen::Vector2d(ax, ay); };
  }
  fail_arg("unknown vector source '" + name + "'");
}

inline void ExperimentConfig::validate() const {
  CGM_REQUIRE_ARG(!experiment_id.empty() &&
                      experiment_id.find(',') == std::string::npos &&
                      experiment_id.find('#') == std::string::npos,
                  "experiment_id must be nonempty without ',' or '#'");
  CGM_REQUIRE_ARG(nx > 0 && ny > 0 && Nx > 0 && Ny > 0 && nx % Nx == 0 &&
                      ny % Ny == 0,
                  "mesh sizes must be positive with nested coarse cells");
  const std::set<std::string> media{"constant", "periodic", "random-raster",
                                    "raster-file", "lognormal"};
  CGM_REQUIRE_ARG(media.count(medium) == 1, "unknown medium '" + medium + "'");
  CGM_REQUIRE_ARG(pou == "bilinear" || pou == "msfem-harmonic",
                  "unknown partition of unity '" + pou + "'");
  CGM_REQUIRE_ARG(inclusion_shape == "square" || inclusion_shape == "disk",
                  "unknown inclusion shape '" + inclusion_shape + "'");
  CGM_REQUIRE_ARG(store == "final" || store == "strided" || store == "full",
                  "unknown store mode '" + store + "'");
  CGM_REQUIRE_ARG(dirichlet == "all" || dirichlet == "bottom",
                  "unknown clamped part '" + dirichlet + "'");
  CGM_REQUIRE_ARG(store_stride >= 1, "store_stride must be positive");
  CGM_REQUIRE_ARG(!L_values.empty(), "L_values must not be empty");
  for (const int L : L_values)
    CGM_REQUIRE_ARG(L >= 1, "mode counts must be positive");
  CGM_REQUIRE_ARG(tau > 0.0 && n_steps >= 1, "bad time grid");
  CGM_REQUIRE_ARG(n_samples >= 1, "n_samples must be positive");
  CGM_REQUIRE_ARG(kle_modes >= 1 && kle_corr_len > 0.0, "bad random field");
  for (const auto& v : {lambda_v, mu_v, kappa_v, beta_v})
    CGM_REQUIRE_ARG(v[0] > 0.0 && v[1] > 0.0,
                    "coefficient values must be positive");
  for (const double c : beta_contrast_values)
    CGM_REQUIRE_ARG(c > 0.0, "beta contrasts must be positive");
  for (const double s : sigma_values)
    CGM_REQUIRE_ARG(s > 0.0, "sigma values must be positive");
  CGM_REQUIRE_ARG(run_cgm || run_gm || run_fine, "no method enabled");
  make_scalar_source(g_source);
  make_scalar_source(theta0_source);
  make_vector_source(f_source);
  if (medium == "raster-file")
    CGM_REQUIRE_ARG(!raster_path.empty(), "raster-file medium needs a path");
}

inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["experiment_id"] = c.experiment_id;
  j["nx"] = c.nx;
  j["ny"] = c.ny;
  j["Nx"] = c.Nx;
  j["Ny"] = c.Ny;
  j["pou"] = c.pou;
  j["medium"] = c.medium;
  j["period"] = c.period;
  j["inclusion_shape"] = c.inclusion_shape;
  j["inclusion_rel"] = c.inclusion_rel;
  j["raster_pixels"] = c.raster_pixels;
  j["raster_fill"] = c.raster_fill;
  j["raster_path"] = c.raster_path;
  j["kle_corr_len"] = c.kle_corr_len;
  j["kle_modes"] = c.kle_modes;
  j["kle_b0"] = c.kle_b0;
  j["n_samples"] = c.n_samples;
  j["seed"] = c.seed;
  j["lambda"] = c.lambda_v;
  j["mu"] = c.mu_v;
  j["kappa"] = c.kappa_v;
  j["beta"] = c.beta_v;
  j["gamma1"] = c.gamma1;
  j["gamma2"] = c.gamma2;
  j["L_values"] = c.L_values;
  j["rank_drop"] = c.rank_drop;
  j["dirichlet"] = c.dirichlet;
  j["tau"] = c.tau;
  j["n_steps"] = c.n_steps;
  j["f_source"] = c.f_source;
  j["g_source"] = c.g_source;
  j["theta0_source"] = c.theta0_source;
  j["beta_contrast_values"] = c.beta_contrast_values;
  j["sigma_values"] = c.sigma_values;
  j["run_cgm"] = c.run_cgm;
  j["run_gm"] = c.run_gm;
  j["run_fine"] = c.run_fine;
  j["store"] = c.store;
  j["store_stride"] = c.store_stride;
  j["write_vtk"] = c.write_vtk;
  return j;
}

inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  CGM_REQUIRE_ARG(j.is_object(), "config must be a JSON object");
  ExperimentConfig c;
  const nlohmann::json known = config_to_json(c);
  for (const auto& item : j.items())
    CGM_REQUIRE_ARG(known.contains(item.key()),
                    "unknown config key '" + item.key() + "'");
  const auto get = [&](const char* key, auto& field) {
    if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
  };
  get("experiment_id", c.experiment_id);
  get("nx", c.nx);
  get("ny", c.ny);
  get("Nx", c.Nx);
  get("Ny", c.Ny);
  get("pou", c.pou);
  get("medium", c.medium);
  get("period", c.period);
  get("inclusion_shape", c.inclusion_shape);
  get("inclusion_rel", c.inclusion_rel);
  get("raster_pixels", c.raster_pixels);
  get("raster_fill", c.raster_fill);
  get("raster_path", c.raster_path);
  get("kle_corr_len", c.kle_corr_len);
  get("kle_modes", c.kle_modes);
  get("kle_b0", c.kle_b0);
  get("n_samples", c.n_samples);
  get("seed", c.seed);
  get("lambda", c.lambda_v);
  get("mu", c.mu_v);
  get("kappa", c.kappa_v);
  get("beta", c.beta_v);
  get("gamma1", c.gamma1);
  get("gamma2", c.gamma2);
  get("L_values", c.L_values);
  get("rank_drop", c.rank_drop);
  get("dirichlet", c.dirichlet);
  get("tau", c.tau);
  get("n_steps", c.n_steps);
  get("f_source", c.f_source);
  get("g_source", c.g_source);
  get("theta0_source", c.theta0_source);
  get("beta_contrast_values", c.beta_contrast_values);
  get("sigma_values", c.sigma_values);
  get("run_cgm", c.run_cgm);
  get("run_gm", c.run_gm);
  get("run_fine", c.run_fine);
  get("store", c.store);
  get("store_stride", c.store_stride);
  get("write_vtk", c.write_vtk);
  c.validate();
  return c;
}

//! Built-in experiment presets. The "-desk" variants are sized so a full
//! sweep finishes in minutes on one core; the plain variants match the
//! headline problem sizes.
inline ExperimentConfig preset_config(const std::string& name) {
  ExperimentConfig c;
  const auto periodic_values = [&c]() {
    c.medium = "periodic";
    c.inclusion_shape = "square";
    // Half-width squares on the even checker cells: the stiff, conductive
    // phase forms isolated islands, so every patch carries localized modes
    // in both fields for the spectral problems to couple.
    c.inclusion_rel = 0.5;
    c.lambda_v = {1.0, 100.0};
    c.mu_v = {0.4, 40.0};
    c.kappa_v = {0.01, 100.0};
    c.beta_v = {0.01, 100.0};
    c.gamma1 = 0.4;
    c.gamma2 = 0.04;
    c.L_values = {4, 8, 12, 16};
    c.tau = 0.02;
    c.g_source = "constant:10";
    c.theta0_source = "poly-bump";
  };
  if (name == "periodic") {
    c.experiment_id = "periodic";
    periodic_values();
    c.nx = c.ny = 200;
    c.Nx = c.Ny = 20;
    c.period = 20;  // one checker cell per coarse cell
    c.n_steps = 50;
    return c;
  }
  if (name == "periodic-desk") {
    c.experiment_id = "periodic-desk";
    periodic_values();
    c.nx = c.ny = 80;
    c.Nx = c.Ny = 8;
    c.period = 8;  // one checker cell per coarse cell
    c.n_steps = 50;  // final time 1 at tau = 0.02
    return c;
  }
  // Homogeneous elasticity keeps the low end of the coupled spectra free of
  // displacement clusters, so enrichment budget follows the conductive
  // islands; gamma1 = 1 ties each temperature mode to its exact thermal
  // response and the near-zero gamma2 leaves displacement modes clean. The
  // expansion-coefficient base 0.003 keeps the island energy exchange weak
  // across the whole contrast sweep and parks the u/theta energy crossover
  // at its top end, so neither field dominates the joint error anywhere.
  const auto raster_values = [&c]() {
    c.medium = "random-raster";
    c.raster_fill = 0.2;
    c.seed = 2024;
    c.lambda_v = {1.0, 1.0};
    c.mu_v = {0.4, 0.4};
    c.kappa_v = {1.0, 10000.0};
    c.beta_v = {0.003, 0.003};
    c.gamma1 = 1.0;
    c.gamma2 = 1e-3;
    c.L_values = {10};
    c.g_source = "gaussian-bump";
    c.theta0_source = "cos-bump";
  };
  if (name == "random-inclusions") {
    c.experiment_id = "random-inclusions";
    raster_values();
    c.nx = c.ny = 100;
    c.Nx = c.Ny = 10;
    c.raster_pixels = 50;
    c.beta_contrast_values = {10.0, 100.0, 1000.0, 5000.0, 10000.0};
    c.tau = 0.01;
    c.n_steps = 100;
    return c;
  }
  if (name == "random-inclusions-desk") {
    c.experiment_id = "random-inclusions-desk";
    raster_values();
    c.nx = c.ny = 60;
    c.Nx = c.Ny = 6;
    c.raster_pixels = 20;
    c.beta_contrast_values = {10.0, 100.0, 1000.0, 10000.0};
    c.tau = 0.05;
    c.n_steps = 20;  // final time 1 at tau = 0.05
    return c;
  }
  // Stiff elasticity keeps displacement flex modes above the temperature
  // band in the coupled spectra, so the joint selection spends its budget on
  // temperature modes plus their exact elastic responses (gamma1 = 1,
  // near-zero gamma2) instead of starving the rough field.
  const auto lognormal_values = [&c]() {
    c.medium = "lognormal";
    c.kle_modes = 50;
    c.kle_b0 = 0.0;
    c.seed = 2024;
    c.lambda_v = {10.0, 10.0};
    c.mu_v = {5.0, 5.0};
    c.kappa_v = {1.0, 1.0};
    c.beta_v = {0.1, 0.1};
    c.gamma1 = 1.0;
    c.gamma2 = 8e-6;
    c.L_values = {8};
    c.g_source = "constant:10";
    c.theta0_source = "poly-bump";
  };
  if (name == "lognormal") {
    c.experiment_id = "lognormal";
    lognormal_values();
    c.nx = c.ny = 100;
    c.Nx = c.Ny = 10;
    c.kle_corr_len = 0.01;
    c.n_samples = 30;
    c.sigma_values = {2.0, 3.0, 4.0, 5.0, 6.0};
    c.tau = 0.01;
    c.n_steps = 100;
    return c;
  }
  if (name == "lognormal-desk") {
    c.experiment_id = "lognormal-desk";
    lognormal_values();
    c.nx = c.ny = 32;
    c.Nx = c.Ny = 4;
    c.kle_corr_len = 0.1;  // resolved on the desk grid
    c.n_samples = 10;
    c.sigma_values = {2.0, 4.0, 6.0};
    c.tau = 0.05;
    c.n_steps = 10;
    return c;
  }
  fail_arg("unknown preset '" + name + "' (periodic, periodic-desk, "
           "random-inclusions, random-inclusions-desk, lognormal, "
           "lognormal-desk)");
}

}  // namespace cgmsfem
