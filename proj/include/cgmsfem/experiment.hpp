#pragma once

//! Experiment driver: realizes the medium, builds coarse spaces for the
//! coupled and decoupled spectral problems, marches everything against the
//! fine reference, and writes results.csv / sweep_summary.csv / manifest.json
//! plus VTK snapshots. Row values are deterministic for a fixed config and
//! seed; only the wall_ms column varies between reruns.

#include <atomic>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "cgmsfem/coeffs.hpp"
#include "cgmsfem/config.hpp"
#include "cgmsfem/diagnostics.hpp"
#include "cgmsfem/spectral.hpp"
#include "cgmsfem/timeloop.hpp"
#include "cgmsfem/vtk.hpp"

namespace cgmsfem {

inline constexpr const char* kLibraryVersion = "1.0.0";

struct ExperimentRow {
  std::string experiment_id;
  std::string method;  // fine | cgm | gm
  int L = 0;
  double gamma1 = 0.0, gamma2 = 0.0;
  double lambda_L1 = std::numeric_limits<double>::quiet_NaN();
  double err_theta = 0.0, err_u = 0.0, err_w = 0.0;
  double wall_ms = 0.0;
};

namespace detail {

inline double now_ms() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double, std::milli>(
             clock::now().time_since_epoch())
      .count();
}

inline std::string fmt_g12(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

//! Static work division over [0, n); results must go to disjoint slots so
//! the outcome is identical for any worker count.
inline void parallel_for(int n, int workers,
                         const std::function<void(int)>& body) {
  workers = std::max(1, std::min(workers, n));
  if (workers <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          next.store(n);
          return;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

inline std::string config_hash(const ExperimentConfig& cfg) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(
                    detail::fnv1a(config_to_json(cfg).dump())));
  return buf;
}

// ---------------------------------------------------------------------------
// Patch spectra for a whole coarse mesh, and per-L truncations of them.
// ---------------------------------------------------------------------------

inline std::vector<PatchSpectrum> compute_coupled_spectra(
    const MeshPair& mp, const MaterialField& mat, const SpectralConfig& cfg,
    int workers = 1) {
  const int nv = mp.coarse.n_vertices();
  std::vector<PatchSpectrum> out(nv);
  detail::parallel_for(nv, workers, [&](int v) {
    const OperatorBlocks B =
        assemble_patch_blocks(mp.fine, mat, mp.coarse.patches[v]);
    out[v] = solve_patch_spectrum(B, cfg);
  });
  return out;
}

inline std::vector<PatchSpectrum> compute_decoupled_spectra(
    const MeshPair& mp, const MaterialField& mat, const SpectralConfig& cfg,
    int n_u, int n_th, int workers = 1) {
  const int nv = mp.coarse.n_vertices();
  std::vector<PatchSpectrum> out(nv);
  detail::parallel_for(nv, workers, [&](int v) {
    const OperatorBlocks B =
        assemble_patch_blocks(mp.fine, mat, mp.coarse.patches[v]);
    out[v] = solve_patch_spectrum_decoupled(B, cfg, n_u, n_th);
  });
  return out;
}

//! First L columns of a coupled spectrum. Columns are stored in ascending
//! selection order, so the prefix is exactly the L-mode space (the imaginary
//! partner of a pair straddling the cut is dropped with it).
inline PatchSpectrum truncate_coupled(const PatchSpectrum& S, int L) {
  CGM_REQUIRE_ARG(L >= 1 && L <= S.n_selected(),
                  "truncate_coupled: mode count out of range");
  PatchSpectrum T = S;
  T.vectors = S.vectors.leftCols(L).eval();
  T.rank.assign(S.rank.begin(), S.rank.begin() + L);
  T.kind.assign(S.kind.begin(), S.kind.begin() + L);
  // LAPACK orders each conjugate pair with the positive imaginary part first.
  T.n_complex_pairs = 0;
  T.max_imag_selected = 0.0;
  for (int c = 0; c < L; ++c) {
    const std::complex<double> lam = S.lambda_raw[S.rank[c]];
    T.max_imag_selected =
        std::max(T.max_imag_selected, std::abs(lam.imag()));
    if (lam.imag() > 0.0 && c + 1 < L && S.rank[c + 1] == S.rank[c] + 1)
      ++T.n_complex_pairs;
  }
  return T;
}

//! First n_u displacement and n_th temperature columns of a decoupled
//! spectrum. The two blocks live on disjoint index ranges, so the subset
//! stays M-orthonormal.
inline PatchSpectrum truncate_decoupled(const PatchSpectrum& S, int n_u,
                                        int n_th) {
  int have_u = 0;
  for (const char k : S.kind) have_u += (k == 'u');
  const int have_th = S.n_selected() - have_u;
  CGM_REQUIRE_ARG(n_u >= 0 && n_th >= 0 && n_u <= have_u && n_th <= have_th,
                  "truncate_decoupled: mode split out of range");
  PatchSpectrum T = S;
  T.vectors.resize(S.dim, n_u + n_th);
  T.rank.clear();
  T.kind.clear();
  int col = 0;
  for (int c = 0; c < S.n_selected() && col < n_u; ++c)
    if (S.kind[c] == 'u') {
      T.vectors.col(col++) = S.vectors.col(c);
      T.rank.push_back(S.rank[c]);
      T.kind.push_back('u');
    }
  int taken_th = 0;
  for (int c = 0; c < S.n_selected() && taken_th < n_th; ++c)
    if (S.kind[c] == 't') {
      T.vectors.col(col++) = S.vectors.col(c);
      T.rank.push_back(S.rank[c]);
      T.kind.push_back('t');
      ++taken_th;
    }
  return T;
}

//! Decoupled baseline mode split for a total per-patch budget L:
//! displacement gets the extra mode when L is odd.
inline std::pair<int, int> decoupled_split(int L) {
  return {(L + 1) / 2, L / 2};
}

// ---------------------------------------------------------------------------
// CSV output
// ---------------------------------------------------------------------------

inline std::string results_csv_header() {
  return "experiment_id,method,L,gamma1,gamma2,lambda_L1,err_theta,err_u,"
         "err_w,wall_ms";
}

inline std::string to_csv_line(const ExperimentRow& r) {
  std::string s = r.experiment_id + "," + r.method + "," + std::to_string(r.L);
  for (const double v : {r.gamma1, r.gamma2, r.lambda_L1, r.err_theta, r.err_u,
                         r.err_w, r.wall_ms})
    s += "," + detail::fmt_g12(v);
  return s;
}

inline void write_results_csv(const std::string& path,
                              const std::vector<ExperimentRow>& rows) {
  std::ofstream out(path);
  CGM_REQUIRE_ARG(out.good(), "cannot open " + path);
  out << results_csv_header() << "\n";
  for (const auto& r : rows) out << to_csv_line(r) << "\n";
  CGM_REQUIRE(out.good(), "write failed for " + path);
}

//! Per-patch eigenvalue table for basis reports.
inline void write_eigenvalue_csv(const std::string& path,
                                 const std::vector<PatchSpectrum>& spectra,
                                 int n_values) {
  std::ofstream out(path);
  CGM_REQUIRE_ARG(out.good(), "cannot open " + path);
  out << "patch,index,lambda_re,lambda_im,lambda_reported\n";
  for (std::size_t v = 0; v < spectra.size(); ++v) {
    const PatchSpectrum& S = spectra[v];
    const int n = std::min<int>(n_values, static_cast<int>(S.lambda_raw.size()));
    for (int k = 0; k < n; ++k)
      out << v << "," << k << "," << detail::fmt_g12(S.lambda_raw[k].real())
          << "," << detail::fmt_g12(S.lambda_raw[k].imag()) << ","
          << detail::fmt_g12(S.reported(k)) << "\n";
  }
  CGM_REQUIRE(out.good(), "write failed for " + path);
}

// ---------------------------------------------------------------------------
// Medium realization
// ---------------------------------------------------------------------------

//! Deterministic part of the medium. For the lognormal medium this is the
//! background material; the caller multiplies beta by the sampled field.
inline MaterialField build_background_material(const ExperimentConfig& cfg,
                                               const FineMesh& fm) {
  MaterialField mat;
  const auto two_phase = [&](const std::array<double, 2>& v,
                             const Eigen::MatrixXd& mask01) {
    return Eigen::VectorXd(
        raster_field(fm, (v[0] + (v[1] - v[0]) * mask01.array()).matrix()));
  };
  if (cfg.medium == "constant" || cfg.medium == "lognormal") {
    const int ne = fm.n_elems();
    mat.lambda = Eigen::VectorXd::Constant(ne, cfg.lambda_v[0]);
    mat.mu = Eigen::VectorXd::Constant(ne, cfg.mu_v[0]);
    mat.kappa = Eigen::VectorXd::Constant(ne, cfg.kappa_v[0]);
    mat.beta = Eigen::VectorXd::Constant(ne, cfg.beta_v[0]);
  } else if (cfg.medium == "periodic") {
    const InclusionShape shape = cfg.inclusion_shape == "square"
                                     ? InclusionShape::square
                                     : InclusionShape::disk;
    const auto field = [&](const std::array<double, 2>& v) {
      return periodic_field(fm, cfg.period, shape, cfg.inclusion_rel, v[0],
                            v[1]);
    };
    mat.lambda = field(cfg.lambda_v);
    mat.mu = field(cfg.mu_v);
    mat.kappa = field(cfg.kappa_v);
    mat.beta = field(cfg.beta_v);
  } else if (cfg.medium == "random-raster") {
    const Eigen::MatrixXd mask01 =
        random_raster(cfg.raster_pixels, cfg.raster_pixels, cfg.raster_fill,
                      0.0, 1.0, mix_seed(cfg.seed, 101));
    mat.lambda = two_phase(cfg.lambda_v, mask01);
    mat.mu = two_phase(cfg.mu_v, mask01);
    mat.kappa = two_phase(cfg.kappa_v, mask01);
    mat.beta = two_phase(cfg.beta_v, mask01);
  } else if (cfg.medium == "raster-file") {
    const Eigen::MatrixXd raw = load_raster(cfg.raster_path);
    const Eigen::MatrixXd mask01 =
        (raw.array() >= 0.5).cast<double>().matrix();
    mat.lambda = two_phase(cfg.lambda_v, mask01);
    mat.mu = two_phase(cfg.mu_v, mask01);
    mat.kappa = two_phase(cfg.kappa_v, mask01);
    mat.beta = two_phase(cfg.beta_v, mask01);
  } else {
    fail_arg("unknown medium '" + cfg.medium + "'");
  }
  mat.validate();
  return mat;
}

inline ProblemData build_problem(const ExperimentConfig& cfg) {
  ProblemData pb;
  pb.f = make_vector_source(cfg.f_source);
  pb.g = make_scalar_source(cfg.g_source);
  pb.theta0 = make_scalar_source(cfg.theta0_source);
  return pb;  // homogeneous Dirichlet data
}

inline DofMap build_dof_map(const ExperimentConfig& cfg, const FineMesh& fm) {
  const NodePredicate pred =
      cfg.dirichlet == "all" ? dirichlet_all() : dirichlet_bottom();
  return make_dof_map(fm, pred, pred);
}

// ---------------------------------------------------------------------------
// Single-point driver
// ---------------------------------------------------------------------------

struct PointTimings {
  double fine_ms = 0.0;
  double cgm_spectra_ms = 0.0;
  double gm_spectra_ms = 0.0;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;
  PointTimings timings;
  std::vector<std::string> vtk_files;
  std::vector<std::string> step_error_lines;
};

namespace detail {

struct RealizationOutput {
  std::vector<ExperimentRow> rows;
  Eigen::VectorXd fine_final;
  std::vector<std::pair<std::string, MarchResult>> to_plot;  // method tag
  std::vector<std::string> step_error_lines;  // stored steps, coarse methods
};

//! Everything for one material realization: fine march, then one coarse
//! march per method and mode count against the shared spectra.
inline RealizationOutput run_realization(
    const ExperimentConfig& cfg, const MeshPair& mp, const DofMap& dm,
    const PartitionOfUnity& pou, const MaterialField& mat,
    const std::vector<PatchSpectrum>& cgm_spectra,
    const std::vector<PatchSpectrum>& gm_spectra, const std::string& id,
    bool keep_states, PointTimings& timings) {
  const FineMesh& fm = mp.fine;
  const OperatorBlocks blocks = assemble_blocks(fm, mat);
  const ProblemData pb = build_problem(cfg);
  const TimeGrid grid{cfg.tau, cfg.n_steps};
  const StoreSpec store{store_mode_from_string(cfg.store), cfg.store_stride};
  const StoreSpec used = keep_states ? store : StoreSpec{};

  RealizationOutput out;
  const double t0 = now_ms();
  MarchResult fine = run_fine_march(fm, dm, blocks, grid, pb, used);
  const double fine_ms = now_ms() - t0;
  timings.fine_ms += fine_ms;
  out.fine_final = fine.final_state;

  if (cfg.run_fine) {
    ExperimentRow r;
    r.experiment_id = id;
    r.method = "fine";
    r.wall_ms = fine_ms;
    out.rows.push_back(r);
  }

  const auto coarse_rows = [&](const std::string& method,
                               const std::vector<PatchSpectrum>& spectra,
                               double g1, double g2) {
    for (const int L : cfg.L_values) {
      const double s0 = now_ms();
      std::vector<PatchSpectrum> trunc(spectra.size());
      for (std::size_t v = 0; v < spectra.size(); ++v) {
        if (method == "cgm") {
          trunc[v] = truncate_coupled(spectra[v], L);
        } else {
          const auto [nu, nth] = decoupled_split(L);
          trunc[v] = truncate_decoupled(spectra[v], nu, nth);
        }
      }
      const MultiscaleBasis basis = build_multiscale_basis(
          mp, pou, dm, trunc, BasisOptions{1e-12, cfg.rank_drop});
      MarchResult coarse =
          run_coarse_march(fm, dm, blocks, basis, grid, pb, used);
      const FieldErrors err =
          energy_errors(blocks, coarse.final_state, out.fine_final);
      ExperimentRow r;
      r.experiment_id = id;
      r.method = method;
      r.L = L;
      r.gamma1 = g1;
      r.gamma2 = g2;
      r.lambda_L1 = eigen_decay_report(spectra, L).min_value;
      r.err_theta = err.th;
      r.err_u = err.u;
      r.err_w = err.w;
      r.wall_ms = now_ms() - s0;
      out.rows.push_back(r);
      if (keep_states) {
        CGM_REQUIRE(coarse.states.size() == fine.states.size(),
                    "stored fine and coarse series must align");
        for (std::size_t k = 0; k < coarse.states.size(); ++k) {
          const FieldErrors e =
              energy_errors(blocks, coarse.states[k], fine.states[k]);
          out.step_error_lines.push_back(
              join_csv({id, method, std::to_string(L)}) + "," +
              join_csv({coarse.times[k], e.th, e.u, e.w}));
        }
        out.to_plot.emplace_back(method + "_L" + std::to_string(L),
                                 std::move(coarse));
      }
    }
  };
  if (cfg.run_cgm) coarse_rows("cgm", cgm_spectra, cfg.gamma1, cfg.gamma2);
  if (cfg.run_gm) coarse_rows("gm", gm_spectra, 0.0, 0.0);
  // Fine states go in front so VTK series list the reference first.
  if (keep_states)
    out.to_plot.emplace(out.to_plot.begin(), "fine", std::move(fine));
  return out;
}

//! Mean rows over the per-sample rows of one sweep point, grouped by
//! (method, L) in first-appearance order.
inline std::vector<ExperimentRow> mean_rows(
    const std::vector<ExperimentRow>& rows, const std::string& id) {
  std::vector<ExperimentRow> out;
  std::vector<int> counts;
  for (const auto& r : rows) {
    int slot = -1;
    for (std::size_t i = 0; i < out.size(); ++i)
      if (out[i].method == r.method && out[i].L == r.L) slot = static_cast<int>(i);
    if (slot < 0) {
      ExperimentRow m = r;
      m.experiment_id = id + "#mean";
      out.push_back(m);
      counts.push_back(1);
    } else {
      ExperimentRow& m = out[slot];
      m.lambda_L1 += r.lambda_L1;
      m.err_theta += r.err_theta;
      m.err_u += r.err_u;
      m.err_w += r.err_w;
      m.wall_ms += r.wall_ms;
      ++counts[slot];
    }
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double n = counts[i];
    out[i].lambda_L1 /= n;
    out[i].err_theta /= n;
    out[i].err_u /= n;
    out[i].err_w /= n;
    out[i].wall_ms /= n;
  }
  return out;
}

}  // namespace detail

//! One resolved experiment point. Sweep axes of the config must already be
//! collapsed to single values (run_sweep does this); sigma is the KLE
//! standard deviation used when the medium is lognormal.
inline ExperimentResult run_point(const ExperimentConfig& cfg, double sigma,
                                  const std::string& vtk_dir,
                                  int workers = 1) {
  cfg.validate();
  const MeshPair mp = build_mesh_pair(cfg.nx, cfg.ny, cfg.Nx, cfg.Ny);
  const FineMesh& fm = mp.fine;
  const DofMap dm = build_dof_map(cfg, fm);
  const MaterialField background = build_background_material(cfg, fm);
  const PartitionOfUnity pou = build_partition_of_unity(
      mp, pou_kind_from_string(cfg.pou), &background.kappa);

  const bool random = cfg.medium == "lognormal";
  const int n_samples = random ? cfg.n_samples : 1;
  int L_max = 0;
  for (const int L : cfg.L_values) L_max = std::max(L_max, L);

  SpectralConfig scfg;
  scfg.H = mp.coarse.H;
  scfg.n_keep = L_max;

  ExperimentResult result;

  // The decoupled pencils see lambda, mu, kappa only, and sampling touches
  // just beta, so one decoupled solve covers every sample.
  std::vector<PatchSpectrum> gm_spectra;
  if (cfg.run_gm) {
    const double t0 = detail::now_ms();
    const auto [nu_max, nth_max] = decoupled_split(L_max);
    SpectralConfig gm_cfg = scfg;
    gm_cfg.gamma1 = 0.0;
    gm_cfg.gamma2 = 0.0;
    gm_spectra = compute_decoupled_spectra(mp, background, gm_cfg,
                                           std::max(nu_max, 1), nth_max,
                                           workers);
    result.timings.gm_spectra_ms += detail::now_ms() - t0;
  }

  KleBasis kle;
  if (random)
    kle = build_kle_basis(
        fm, KleSpec{cfg.kle_corr_len, sigma, cfg.kle_b0, cfg.kle_modes});

  std::vector<ExperimentRow> point_rows;
  for (int s = 0; s < n_samples; ++s) {
    MaterialField mat = background;
    if (random) {
      std::mt19937_64 rng(mix_seed(cfg.seed, 7000 + s));
      mat.beta =
          (background.beta.array() * sample_kle_field(kle, rng).array())
              .matrix();
      mat.validate();
    }
    std::vector<PatchSpectrum> cgm_spectra;
    if (cfg.run_cgm) {
      const double t0 = detail::now_ms();
      SpectralConfig cgm_cfg = scfg;
      cgm_cfg.gamma1 = cfg.gamma1;
      cgm_cfg.gamma2 = cfg.gamma2;
      cgm_spectra = compute_coupled_spectra(mp, mat, cgm_cfg, workers);
      result.timings.cgm_spectra_ms += detail::now_ms() - t0;
    }
    const std::string id =
        n_samples > 1 ? cfg.experiment_id + "#s" + std::to_string(s)
                      : cfg.experiment_id;
    const bool keep_states = cfg.write_vtk && !vtk_dir.empty() && s == 0;
    detail::RealizationOutput real =
        detail::run_realization(cfg, mp, dm, pou, mat, cgm_spectra, gm_spectra,
                                id, keep_states, result.timings);
    point_rows.insert(point_rows.end(), real.rows.begin(), real.rows.end());

    if (keep_states) {
      namespace fs = std::filesystem;
      fs::create_directories(vtk_dir);
      const auto vtk_path = [&](const std::string& tag, int step) {
        std::string name = cfg.experiment_id + "_" + tag;
        if (step >= 0) name += "_t" + std::to_string(step);
        return (fs::path(vtk_dir) / (name + ".vtk")).string();
      };
      for (const auto& [tag, march] : real.to_plot) {
        const std::string fp = vtk_path(tag + "_final", -1);
        write_vtk_state(fp, fm, march.final_state, tag);
        result.vtk_files.push_back(fp);
        for (std::size_t k = 0; k < march.states.size(); ++k) {
          const std::string sp = vtk_path(tag, static_cast<int>(k));
          write_vtk_state(sp, fm, march.states[k], tag);
          result.vtk_files.push_back(sp);
        }
      }
    }
  }
  result.rows = std::move(point_rows);
  if (n_samples > 1) {
    const std::vector<ExperimentRow> means =
        detail::mean_rows(result.rows, cfg.experiment_id);
    result.rows.insert(result.rows.end(), means.begin(), means.end());
  }
  return result;
}

// ---------------------------------------------------------------------------
// Sweep driver
// ---------------------------------------------------------------------------

struct SweepPoint {
  ExperimentConfig cfg;
  double sigma = 1.0;
};

//! Expands the sweep axes into resolved points. Without axes the single
//! point is the config itself.
inline std::vector<SweepPoint> expand_sweep(const ExperimentConfig& cfg) {
  std::vector<SweepPoint> points;
  std::vector<double> contrasts = cfg.beta_contrast_values;
  std::vector<double> sigmas = cfg.sigma_values;
  if (contrasts.empty()) contrasts.push_back(0.0);  // 0 = keep beta_v
  if (sigmas.empty()) sigmas.push_back(1.0);
  for (const double c : contrasts)
    for (const double s : sigmas) {
      SweepPoint p;
      p.cfg = cfg;
      p.cfg.beta_contrast_values.clear();
      p.cfg.sigma_values.clear();
      if (c > 0.0) {
        p.cfg.beta_v[1] = cfg.beta_v[0] * c;
        p.cfg.experiment_id += "-b" + detail::fmt_g12(c);
      }
      if (!cfg.sigma_values.empty() && cfg.medium == "lognormal")
        p.cfg.experiment_id += "-s" + detail::fmt_g12(s);
      p.sigma = s;
      points.push_back(p);
    }
  return points;
}

struct SweepResult {
  std::vector<ExperimentRow> rows;
  std::vector<std::string> summary_lines;  // without header
  PointTimings timings;
  std::vector<std::string> vtk_files;
};

//! Ratio summary per sweep point and mode count. Multi-sample points are
//! summarized by their mean rows; plain points by their single row.
inline std::vector<std::string> summarize_rows(
    const std::vector<ExperimentRow>& rows) {
  struct Key {
    std::string id;
    int L;
  };
  const auto row_id = [](const ExperimentRow& r) {
    return r.experiment_id.substr(0, r.experiment_id.find('#'));
  };
  const auto find_err = [&](const std::string& id, const std::string& method,
                            int L, double& out_err) {
    bool found = false;
    for (const auto& r : rows) {
      if (r.method != method || r.L != L || row_id(r) != id) continue;
      if (r.experiment_id == id + "#mean") {
        out_err = r.err_w;
        return true;
      }
      if (r.experiment_id == id && !found) {
        out_err = r.err_w;
        found = true;
      }
    }
    return found;
  };
  std::vector<Key> keys;
  for (const auto& r : rows) {
    if (r.method == "fine") continue;
    const std::string id = row_id(r);
    bool seen = false;
    for (const auto& k : keys)
      if (k.id == id && k.L == r.L) seen = true;
    if (!seen) keys.push_back({id, r.L});
  }
  std::vector<std::string> lines;
  for (const auto& k : keys) {
    double cgm = 0.0, gm = 0.0;
    const bool has_cgm = find_err(k.id, "cgm", k.L, cgm);
    const bool has_gm = find_err(k.id, "gm", k.L, gm);
    std::string line = k.id + "," + std::to_string(k.L) + ",";
    line += (has_cgm ? detail::fmt_g12(cgm) : "nan") + std::string(",");
    line += (has_gm ? detail::fmt_g12(gm) : "nan") + std::string(",");
    line += (has_cgm && has_gm) ? detail::fmt_g12(gm / cgm) : "nan";
    lines.push_back(line);
  }
  return lines;
}

inline SweepResult run_sweep_points(const ExperimentConfig& cfg,
                                    const std::string& vtk_dir,
                                    int workers = 1) {
  SweepResult out;
  for (const SweepPoint& p : expand_sweep(cfg)) {
    ExperimentResult r = run_point(p.cfg, p.sigma, vtk_dir, workers);
    out.rows.insert(out.rows.end(), r.rows.begin(), r.rows.end());
    out.timings.fine_ms += r.timings.fine_ms;
    out.timings.cgm_spectra_ms += r.timings.cgm_spectra_ms;
    out.timings.gm_spectra_ms += r.timings.gm_spectra_ms;
    out.vtk_files.insert(out.vtk_files.end(), r.vtk_files.begin(),
                         r.vtk_files.end());
  }
  out.summary_lines = summarize_rows(out.rows);
  return out;
}

inline nlohmann::json build_manifest(const ExperimentConfig& cfg,
                                     const SweepResult& res,
                                     double total_ms) {
  nlohmann::json m;
  m["version"] = kLibraryVersion;
  m["config"] = config_to_json(cfg);
  m["config_hash"] = config_hash(cfg);
  m["rows"] = res.rows.size();
  m["timings_ms"] = {{"fine", res.timings.fine_ms},
                     {"cgm_spectra", res.timings.cgm_spectra_ms},
                     {"gm_spectra", res.timings.gm_spectra_ms},
                     {"total", total_ms}};
  m["vtk_files"] = res.vtk_files;
  return m;
}

//! Full run: expand the sweep, write results.csv, sweep_summary.csv,
//! manifest.json and VTK files under out_dir.
inline SweepResult run_experiment(const ExperimentConfig& cfg,
                                  const std::string& out_dir,
                                  int workers = 1) {
  cfg.validate();
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const double t0 = detail::now_ms();
  SweepResult res = run_sweep_points(cfg, out_dir, workers);
  const double total_ms = detail::now_ms() - t0;

  write_results_csv((fs::path(out_dir) / "results.csv").string(), res.rows);
  {
    const std::string path = (fs::path(out_dir) / "sweep_summary.csv").string();
    std::ofstream out(path);
    CGM_REQUIRE_ARG(out.good(), "cannot open " + path);
    out << "point,L,err_w_cgm,err_w_gm,gm_over_cgm\n";
    for (const auto& line : res.summary_lines) out << line << "\n";
    CGM_REQUIRE(out.good(), "write failed for " + path);
  }
  {
    const std::string path = (fs::path(out_dir) / "manifest.json").string();
    std::ofstream out(path);
    CGM_REQUIRE_ARG(out.good(), "cannot open " + path);
    out << build_manifest(cfg, res, total_ms).dump(2) << "\n";
    CGM_REQUIRE(out.good(), "write failed for " + path);
  }
  return res;
}

}  // namespace cgmsfem
