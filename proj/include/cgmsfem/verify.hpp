#pragma once

//! Self-contained verification suites shared by the CLI and the acceptance
//! harness: manufactured-solution convergence orders, structural invariants
//! of the operators and coarse spaces, and the randomized spectral-cut
//! interpolation bound.

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "cgmsfem/diagnostics.hpp"
#include "cgmsfem/manufactured.hpp"
#include "cgmsfem/spectral.hpp"
#include "cgmsfem/timeloop.hpp"

namespace cgmsfem {

struct CheckResult {
  std::string name;
  bool pass = false;
  double value = 0.0;      // measured quantity
  double threshold = 0.0;  // bound it is held against
  std::string detail;      // comparison direction and context
};

inline bool all_pass(const std::vector<CheckResult>& checks) {
  return std::all_of(checks.begin(), checks.end(),
                     [](const CheckResult& c) { return c.pass; });
}

inline std::string format_check_line(const CheckResult& c) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g (%s %.6g)", c.value, c.detail.c_str(),
                c.threshold);
  return std::string(c.pass ? "[PASS] " : "[FAIL] ") + c.name + ": " + buf;
}

// ---------------------------------------------------------------------------
// Manufactured-solution convergence
// ---------------------------------------------------------------------------

struct ConvergenceReport {
  std::vector<int> meshes;
  std::vector<double> err_u, err_th;  // final-time relative L2
  double order_u = 0.0, order_th = 0.0;  // weakest observed pair order
};

//! Marches the constant-coefficient closed-form case on a mesh family with
//! tau = h and reports the observed L2 orders at the shared final time.
inline ConvergenceReport manufactured_convergence(const std::vector<int>& meshes,
                                                  double t_final) {
  CGM_REQUIRE_ARG(meshes.size() >= 2, "convergence study needs two meshes");
  ManufacturedCase mc;
  ConvergenceReport rep;
  rep.meshes = meshes;
  for (const int nx : meshes) {
    const int n_steps = static_cast<int>(std::lround(t_final * nx));
    CGM_REQUIRE_ARG(n_steps >= 1 && std::abs(n_steps - t_final * nx) < 1e-9,
                    "final time must be a multiple of tau = h");
    const MeshPair mp = build_mesh_pair(nx, nx, 1, 1);
    const FineMesh& fm = mp.fine;
    const DofMap dm = make_dof_map(fm, dirichlet_all(), dirichlet_all());
    const OperatorBlocks blocks = assemble_blocks(fm, mc.material(fm));
    const TimeGrid grid{1.0 / nx, n_steps};
    const MarchResult res =
        run_fine_march(fm, dm, blocks, grid, mc.problem());
    const FieldErrors err = relative_l2_errors(blocks, res.final_state,
                                               mc.exact_state(fm, t_final));
    rep.err_u.push_back(err.u);
    rep.err_th.push_back(err.th);
  }
  const auto min_order = [&](const std::vector<double>& e) {
    double worst = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < e.size(); ++i)
      worst = std::min(worst, std::log2(e[i] / e[i + 1]));
    return worst;
  };
  rep.order_u = min_order(rep.err_u);
  rep.order_th = min_order(rep.err_th);
  return rep;
}

inline std::vector<CheckResult> manufactured_checks(
    const std::vector<int>& meshes, double t_final) {
  const ConvergenceReport rep = manufactured_convergence(meshes, t_final);
  std::vector<CheckResult> out;
  out.push_back({"displacement L2 order", rep.order_u >= 1.8, rep.order_u, 1.8,
                 "need >="});
  out.push_back({"temperature L2 order", rep.order_th >= 1.8, rep.order_th,
                 1.8, "need >="});
  return out;
}

// ---------------------------------------------------------------------------
// Structural invariants
// ---------------------------------------------------------------------------

namespace detail {

//! Shared heterogeneous test medium: two-phase tiling with contrasts in
//! every coefficient.
inline MaterialField verify_material(const FineMesh& fm) {
  MaterialField mat;
  mat.lambda = periodic_field(fm, 4, InclusionShape::square, 1.0, 1.0, 10.0);
  mat.mu = periodic_field(fm, 4, InclusionShape::square, 1.0, 0.5, 5.0);
  mat.kappa = periodic_field(fm, 4, InclusionShape::square, 1.0, 0.1, 10.0);
  mat.beta = periodic_field(fm, 4, InclusionShape::square, 1.0, 0.2, 2.0);
  mat.validate();
  return mat;
}

inline double march_energy(const OperatorBlocks& blocks,
                           const Eigen::VectorXd& w) {
  const int n = blocks.n;
  return 0.5 * w.head(2 * n).dot(blocks.A1 * w.head(2 * n)) +
         0.5 * w.tail(n).dot(blocks.Mprime * w.tail(n));
}

}  // namespace detail

//! Fixed-configuration invariant suite over the discrete operators, the
//! partition of unity, the spectral selection and the coarse march.
inline std::vector<CheckResult> invariant_checks() {
  std::vector<CheckResult> out;
  const MeshPair mp = build_mesh_pair(8, 8, 2, 2);
  const FineMesh& fm = mp.fine;
  const MaterialField mat = detail::verify_material(fm);
  const OperatorBlocks blocks = assemble_blocks(fm, mat);
  const int n = fm.n_nodes();

  SpectralConfig scfg;
  scfg.gamma1 = 0.4;
  scfg.gamma2 = 0.04;
  scfg.n_keep = 6;
  scfg.H = mp.coarse.H;

  {  // every patch pencil carries the rigid displacement kernel
    int min_zero = std::numeric_limits<int>::max();
    for (const Patch& pa : mp.coarse.patches) {
      const OperatorBlocks B = assemble_patch_blocks(fm, mat, pa);
      const PatchSpectrum S = solve_patch_spectrum(B, scfg);
      const double scale = S.lambda_raw.real().cwiseAbs().maxCoeff();
      int zeros = 0;
      for (int k = 0; k < S.lambda_raw.size(); ++k)
        if (std::abs(S.lambda_raw[k].real()) <= 1e-8 * scale) ++zeros;
      min_zero = std::min(min_zero, zeros);
    }
    out.push_back({"rigid modes per patch", min_zero >= 3,
                   static_cast<double>(min_zero), 3.0, "need >="});
  }

  {  // heat-row coupling is the exact adjoint of the momentum-row coupling
    const auto [A, Bm] = compose_system(blocks, 0.1);
    std::mt19937_64 rng(12345);
    std::normal_distribution<double> N(0.0, 1.0);
    Eigen::VectorXd wu = Eigen::VectorXd::Zero(3 * n);
    Eigen::VectorXd wt = Eigen::VectorXd::Zero(3 * n);
    for (int p = 0; p < 2 * n; ++p) wu[p] = N(rng);
    for (int p = 2 * n; p < 3 * n; ++p) wt[p] = N(rng);
    const Eigen::VectorXd Awt = A * wt;  // head = -A2 theta
    const Eigen::VectorXd Awu = A * wu;  // tail = A2^T u
    const double lhs = -wu.head(2 * n).dot(Awt.head(2 * n));
    const double rhs = wt.tail(n).dot(Awu.tail(n));
    const double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
    const double mismatch = std::abs(lhs - rhs) / scale;

    // independent quadrature: u = (x, y) has div u = 2 exactly, so
    // u^T A2 1 = 2 integral of beta
    Eigen::VectorXd ulin(2 * n);
    for (int p = 0; p < n; ++p) {
      ulin[p] = fm.nodes(p, 0);
      ulin[n + p] = fm.nodes(p, 1);
    }
    double beta_int = 0.0;
    for (int e = 0; e < fm.n_elems(); ++e)
      beta_int += mat.beta[e] * fm.elem_geom(e).area;
    const double form = ulin.dot(blocks.A2 * Eigen::VectorXd::Ones(n));
    const double quad_mismatch =
        std::abs(form - 2.0 * beta_int) / std::abs(2.0 * beta_int);

    const double worst = std::max(mismatch, quad_mismatch);
    out.push_back(
        {"div-coupling adjointness", worst <= 1e-12, worst, 1e-12, "need <="});
  }

  {  // coarse-step residual is orthogonal to the coarse space; the space
     // needs modes past the rigid cluster so both fields are represented
    const std::vector<PatchSpectrum> spectra = [&] {
      std::vector<PatchSpectrum> v;
      SpectralConfig c = scfg;
      c.n_keep = 6;
      for (const Patch& pa : mp.coarse.patches)
        v.push_back(solve_patch_spectrum(assemble_patch_blocks(fm, mat, pa), c));
      return v;
    }();
    const PartitionOfUnity pou =
        build_partition_of_unity(mp, PouKind::bilinear);
    const DofMap dm = make_dof_map(fm, dirichlet_all(), dirichlet_all());
    const MultiscaleBasis basis =
        build_multiscale_basis(mp, pou, dm, spectra);
    ProblemData pb;
    pb.f = [](double, double, double) { return Eigen::Vector2d(0.5, -0.3); };
    pb.g = [](double x, double y, double) {
      return std::exp(-((x - 0.4) * (x - 0.4) + (y - 0.6) * (y - 0.6)) / 0.05);
    };
    const TimeGrid grid{0.1, 5};
    const MarchResult res = run_coarse_march(fm, dm, blocks, basis, grid, pb,
                                             {StoreMode::full, 1});
    const auto [A, Bm] = compose_system(blocks, grid.tau);
    double worst = 0.0;
    for (std::size_t k = 1; k < res.states.size(); ++k) {
      auto [F, G] = assemble_loads(fm, pb.f, pb.g, res.times[k]);
      Eigen::VectorXd rhs(3 * n);
      rhs << F, grid.tau * G;
      rhs += Bm * res.states[k - 1];
      const Eigen::VectorXd resid =
          basis.R.transpose() * (rhs - A * res.states[k]);
      const double scale = (basis.R.transpose() * rhs).norm();
      worst = std::max(worst, resid.norm() / std::max(scale, 1e-300));
    }
    out.push_back({"coarse residual orthogonality", worst <= 1e-12, worst,
                   1e-12, "need <="});
  }

  {  // both partitions of unity sum to one at every fine node
    double worst = 0.0;
    for (const PouKind kind : {PouKind::bilinear, PouKind::msfem_harmonic}) {
      const PartitionOfUnity pou =
          build_partition_of_unity(mp, kind, &mat.kappa);
      Eigen::VectorXd sum = Eigen::VectorXd::Zero(n);
      for (int v = 0; v < mp.coarse.n_vertices(); ++v)
        sum += pou.full(mp, v);
      worst = std::max(worst, (sum.array() - 1.0).abs().maxCoeff());
    }
    out.push_back(
        {"partition of unity sum", worst <= 1e-12, worst, 1e-12, "need <="});
  }

  {  // source-free march dissipates the stored energy
    const DofMap dm = make_dof_map(fm, dirichlet_all(), dirichlet_all());
    ProblemData pb;
    pb.theta0 = [](double x, double y, double) {
      return std::sin(M_PI * x) * std::sin(M_PI * y);
    };
    const TimeGrid grid{0.05, 50};
    const MarchResult res =
        run_fine_march(fm, dm, blocks, grid, pb, {StoreMode::full, 1});
    const double e0 = detail::march_energy(blocks, res.states[0]);
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 1; k < res.states.size(); ++k) {
      const double de = detail::march_energy(blocks, res.states[k]) -
                        detail::march_energy(blocks, res.states[k - 1]);
      worst = std::max(worst, de / e0);
    }
    out.push_back({"source-free energy decay", worst <= 1e-12, worst, 1e-12,
                   "need <="});
  }

  const Patch& center = mp.coarse.patches[mp.coarse.vertex_id(1, 1)];
  const OperatorBlocks Bc = assemble_patch_blocks(fm, mat, center);

  {  // selected subspace is invariant under mass rescaling
    Eigen::MatrixXd A, M;
    dense_pencil(Bc, scfg.gamma1, scfg.gamma2, A, M);
    const PatchSpectrum S1 = solve_pencil(A, M, scfg);
    const Eigen::MatrixXd Ms = 3.7 * M;
    const PatchSpectrum S2 = solve_pencil(A, Ms, scfg);
    double value = 1.0;
    if (S1.n_selected() == S2.n_selected())
      value = subspace_angle_sin(S1.vectors, S2.vectors);
    out.push_back({"mass-rescaling selection invariance", value <= 1e-8, value,
                   1e-8, "need <="});
  }

  {  // zero coupling reproduces the decoupled spectral spaces
    SpectralConfig c0 = scfg;
    c0.gamma1 = 0.0;
    c0.gamma2 = 0.0;
    c0.n_keep = 6;
    const PatchSpectrum Sc = solve_patch_spectrum(Bc, c0);
    Eigen::MatrixXd Au(Bc.A1), Mu(Bc.M1), At(Bc.A4), Mt(Bc.M2);
    Eigen::VectorXd wu, wt;
    detail::dsygv_inplace(Au, Mu, wu);
    detail::dsygv_inplace(At, Mt, wt);
    int nu = 0, nt = 0;  // merge the block spectra to find the 6-mode split
    while (nu + nt < 6) {
      if (nt >= wt.size() || (nu < wu.size() && wu[nu] <= wt[nt]))
        ++nu;
      else
        ++nt;
    }
    const PatchSpectrum Sd = solve_patch_spectrum_decoupled(Bc, c0, nu, nt);
    const double value = subspace_angle_sin(Sc.vectors, Sd.vectors);
    out.push_back({"decoupled-limit subspace equivalence", value <= 1e-8,
                   value, 1e-8, "need <="});
  }

  return out;
}

// ---------------------------------------------------------------------------
// Randomized spectral-cut interpolation bound
// ---------------------------------------------------------------------------

//! Runs `trials` randomized bound checks per seminorm power on a fully
//! heterogeneous patch with antisymmetric coupling; every trial must hold.
inline std::vector<CheckResult> interpolation_bound_checks(int trials) {
  CGM_REQUIRE_ARG(trials >= 1, "bound checks: need at least one trial");
  const MeshPair mp = build_mesh_pair(8, 8, 2, 2);
  const MaterialField mat = detail::verify_material(mp.fine);
  const Patch& center = mp.coarse.patches[mp.coarse.vertex_id(1, 1)];
  const OperatorBlocks B = assemble_patch_blocks(mp.fine, mat, center);
  SpectralConfig cfg;
  cfg.gamma1 = 0.35;
  cfg.gamma2 = -0.35;
  cfg.H = mp.coarse.H;

  std::vector<CheckResult> out;
  for (const int s : {1, 2}) {
    int passed = 0;
    for (int k = 0; k < trials; ++k) {
      const int L = 3 + k % 6;
      const BoundCheck bc = interpolation_bound_check(
          B, cfg, L, s, mix_seed(9001, 1000 * s + k));
      if (bc.ok) ++passed;
    }
    out.push_back({"spectral cut bound, power " + std::to_string(s),
                   passed == trials, static_cast<double>(passed),
                   static_cast<double>(trials), "need =="});
  }
  return out;
}

}  // namespace cgmsfem
