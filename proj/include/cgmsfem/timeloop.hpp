#pragma once

//! Implicit one-step marches for the coupled system. Each step solves
//!   A w^n = [F^n; tau G^n] + B w^{n-1}
//! with the composed matrices from compose_system. The fine march factors the
//! Dirichlet-restricted matrix once per step size; the coarse march projects
//! the same full system onto a multiscale basis R (Galerkin on both sides),
//! marches the coarse coefficients, and reconstructs fine-grid states as
//! R w_c plus the Dirichlet lift.

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>
#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "cgmsfem/assembly.hpp"
#include "cgmsfem/common.hpp"
#include "cgmsfem/mesh.hpp"
#include "cgmsfem/spectral.hpp"

namespace cgmsfem {

struct TimeGrid {
  double tau = 0.1;
  int n_steps = 10;

  double t(int k) const { return tau * k; }
  double t_final() const { return tau * n_steps; }
  void validate() const {
    CGM_REQUIRE_ARG(tau > 0.0 && n_steps >= 1,
                    "time grid: need tau > 0 and at least one step");
  }
};

enum class StoreMode { final_only, strided, full };

struct StoreSpec {
  StoreMode mode = StoreMode::final_only;
  int stride = 5;
};

inline StoreMode store_mode_from_string(const std::string& s) {
  if (s == "final") return StoreMode::final_only;
  if (s == "strided") return StoreMode::strided;
  if (s == "full") return StoreMode::full;
  fail_arg("unknown store mode '" + s + "' (final, strided, full)");
}

inline std::string to_string(StoreMode m) {
  switch (m) {
    case StoreMode::final_only: return "final";
    case StoreMode::strided: return "strided";
    default: return "full";
  }
}

struct BoundaryData {
  VectorSource u = [](double, double, double) { return Eigen::Vector2d(0, 0); };
  ScalarSource th = [](double, double, double) { return 0.0; };
};

struct ProblemData {
  VectorSource f = [](double, double, double) { return Eigen::Vector2d(0, 0); };
  ScalarSource g = [](double, double, double) { return 0.0; };
  BoundaryData bc;
  ScalarSource theta0 = [](double, double, double) { return 0.0; };
};

//! Full-length vector holding boundary values at fixed dofs, zero elsewhere.
inline Eigen::VectorXd dirichlet_values(const FineMesh& fm, const DofMap& dm,
                                        const BoundaryData& bc, double t) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dm.n_dofs());
  for (int p = 0; p < dm.n_nodes; ++p) {
    const double x = fm.nodes(p, 0), y = fm.nodes(p, 1);
    if (dm.u_fixed[p]) {
      const Eigen::Vector2d uv = bc.u(x, y, t);
      w[dm.u1(p)] = uv.x();
      w[dm.u2(p)] = uv.y();
    }
    if (dm.th_fixed[p]) w[dm.th(p)] = bc.th(x, y, t);
  }
  return w;
}

inline Eigen::VectorXd expand_free(const DofMap& dm, const Eigen::VectorXd& x) {
  Eigen::VectorXd w = Eigen::VectorXd::Zero(dm.n_dofs());
  for (int d = 0; d < dm.n_dofs(); ++d)
    if (dm.free_of_dof[d] >= 0) w[d] = x[dm.free_of_dof[d]];
  return w;
}

//! Initial state: theta interpolates theta0 on free nodes (boundary data on
//! fixed ones); the displacement then solves the quasi-static momentum row
//! at t = 0, which needs a clamped part of the boundary.
inline Eigen::VectorXd initial_state(const FineMesh& fm, const DofMap& dm,
                                     const OperatorBlocks& blocks,
                                     const ProblemData& pb) {
  CGM_REQUIRE_ARG(
      std::any_of(dm.u_fixed.begin(), dm.u_fixed.end(),
                  [](char c) { return c != 0; }),
      "initial state: displacement solve needs a clamped boundary part");
  const int n = dm.n_nodes;
  Eigen::VectorXd w = dirichlet_values(fm, dm, pb.bc, 0.0);
  for (int p = 0; p < n; ++p)
    if (!dm.th_fixed[p]) w[dm.th(p)] = pb.theta0(fm.nodes(p, 0), fm.nodes(p, 1), 0.0);

  auto [F, G] = assemble_loads(fm, pb.f, pb.g, 0.0);
  (void)G;
  // u freedoms sit first in the composite numbering, so the head of
  // free_of_dof indexes them contiguously.
  std::vector<int> umap(dm.free_of_dof.begin(),
                        dm.free_of_dof.begin() + 2 * n);
  const SpMat A1ff =
      restrict_matrix(blocks.A1, umap, dm.n_ufree, umap, dm.n_ufree);
  Eigen::VectorXd r = F + blocks.A2 * w.tail(n) - blocks.A1 * w.head(2 * n);
  const Eigen::VectorXd rf = restrict_vector(r, umap, dm.n_ufree);
  Eigen::SimplicialLDLT<SpMat> ldlt(A1ff);
  CGM_REQUIRE(ldlt.info() == Eigen::Success,
              "initial state: elasticity factorization failed");
  const Eigen::VectorXd x = ldlt.solve(rf);
  CGM_REQUIRE((A1ff * x - rf).norm() <= 1e-10 * std::max(1.0, rf.norm()),
              "initial state: elasticity solve residual out of contract");
  for (int d = 0; d < 2 * n; ++d)
    if (umap[d] >= 0) w[d] += x[umap[d]];
  return w;
}

//! Fine-grid reference march. Factors the restricted one-step matrix once.
class FineSystem {
 public:
  FineSystem(const FineMesh& fm, const DofMap& dm, const OperatorBlocks& blocks,
             double tau)
      : fm_(&fm), dm_(&dm), tau_(tau) {
    std::tie(A_full_, B_full_) = compose_system(blocks, tau);
    A_ff_ = restrict_matrix(A_full_, dm.free_of_dof, dm.n_free,
                            dm.free_of_dof, dm.n_free);
    lu_.compute(A_ff_);
    CGM_REQUIRE(lu_.info() == Eigen::Success,
                "fine march: one-step matrix factorization failed");
  }

  const SpMat& A_full() const { return A_full_; }
  const SpMat& B_full() const { return B_full_; }
  double tau() const { return tau_; }

  //! Advance from w at t_next - tau to t_next; w holds boundary values.
  Eigen::VectorXd step(const Eigen::VectorXd& w_prev, const ProblemData& pb,
                       double t_next) const {
    const int n = dm_->n_nodes;
    auto [F, G] = assemble_loads(*fm_, pb.f, pb.g, t_next);
    Eigen::VectorXd rhs(3 * n);
    rhs.head(2 * n) = F;
    rhs.tail(n) = tau_ * G;
    rhs += B_full_ * w_prev;
    const Eigen::VectorXd w_dir = dirichlet_values(*fm_, *dm_, pb.bc, t_next);
    const Eigen::VectorXd r =
        restrict_vector(rhs - A_full_ * w_dir, dm_->free_of_dof, dm_->n_free);
    const Eigen::VectorXd x = lu_.solve(r);
    CGM_REQUIRE((A_ff_ * x - r).norm() <= 1e-10 * std::max(1.0, r.norm()),
                "fine march: direct solve residual out of contract");
    return w_dir + expand_free(*dm_, x);
  }

 private:
  const FineMesh* fm_;
  const DofMap* dm_;
  double tau_;
  SpMat A_full_, B_full_, A_ff_;
  Eigen::SparseLU<SpMat> lu_;
};

//! Coarse march in the multiscale space: both one-step matrices are projected
//! with the basis R and the coefficient system is solved directly.
class CoarseSystem {
 public:
  CoarseSystem(const FineMesh& fm, const DofMap& dm,
               const OperatorBlocks& blocks, const MultiscaleBasis& basis,
               double tau)
      : fm_(&fm), dm_(&dm), basis_(&basis), tau_(tau) {
    std::tie(A_full_, B_full_) = compose_system(blocks, tau);
    const SpMat& R = basis.R;
    CGM_REQUIRE_ARG(R.rows() == dm.n_dofs() && R.cols() > 0,
                    "coarse march: basis does not match the dof space");
    A_c_ = (R.transpose() * SpMat(A_full_ * R)).pruned();
    B_c_ = (R.transpose() * SpMat(B_full_ * R)).pruned();
    lu_.compute(A_c_);
    CGM_REQUIRE(lu_.info() == Eigen::Success,
                "coarse march: projected matrix factorization failed; a rank "
                "deficient basis needs the rank filter");
    gram_ = (R.transpose() * R).pruned();
    gram_ldlt_.compute(gram_);
    CGM_REQUIRE(gram_ldlt_.info() == Eigen::Success,
                "coarse march: basis Gram factorization failed");
  }

  const SpMat& A_c() const { return A_c_; }
  const SpMat& B_c() const { return B_c_; }
  const MultiscaleBasis& basis() const { return *basis_; }
  double tau() const { return tau_; }

  //! Least-squares coefficients of a (lift-free) fine-grid state.
  Eigen::VectorXd project(const Eigen::VectorXd& w_no_lift) const {
    const Eigen::VectorXd rhs = basis_->R.transpose() * w_no_lift;
    const Eigen::VectorXd wc = gram_ldlt_.solve(rhs);
    CGM_REQUIRE((gram_ * wc - rhs).norm() <= 1e-8 * std::max(1.0, rhs.norm()),
                "coarse march: initial projection residual out of contract");
    return wc;
  }

  Eigen::VectorXd step_coeffs(const Eigen::VectorXd& wc_prev,
                              const ProblemData& pb, double t_next) const {
    const int n = dm_->n_nodes;
    auto [F, G] = assemble_loads(*fm_, pb.f, pb.g, t_next);
    Eigen::VectorXd rhs(3 * n);
    rhs.head(2 * n) = F;
    rhs.tail(n) = tau_ * G;
    const Eigen::VectorXd w_prev =
        basis_->R * wc_prev +
        dirichlet_values(*fm_, *dm_, pb.bc, t_next - tau_);
    rhs += B_full_ * w_prev;
    rhs -= A_full_ * dirichlet_values(*fm_, *dm_, pb.bc, t_next);
    const Eigen::VectorXd rc = basis_->R.transpose() * rhs;
    const Eigen::VectorXd wc = lu_.solve(rc);
    CGM_REQUIRE((A_c_ * wc - rc).norm() <= 1e-8 * std::max(1.0, rc.norm()),
                "coarse march: projected solve residual out of contract");
    return wc;
  }

  Eigen::VectorXd downscale(const Eigen::VectorXd& wc, const ProblemData& pb,
                            double t) const {
    return basis_->R * wc + dirichlet_values(*fm_, *dm_, pb.bc, t);
  }

 private:
  const FineMesh* fm_;
  const DofMap* dm_;
  const MultiscaleBasis* basis_;
  double tau_;
  SpMat A_full_, B_full_, A_c_, B_c_, gram_;
  Eigen::SparseLU<SpMat> lu_;
  Eigen::SimplicialLDLT<SpMat> gram_ldlt_;
};

struct MarchResult {
  std::vector<double> times;
  std::vector<Eigen::VectorXd> states;         // fine-grid, boundary included
  std::vector<Eigen::VectorXd> coarse_coeffs;  // coarse march only
  Eigen::VectorXd final_state;
  Eigen::VectorXd final_coeffs;
  double final_time = 0.0;
};

namespace detail {

inline bool want_store(const StoreSpec& s, int k, int n_steps) {
  switch (s.mode) {
    case StoreMode::full: return true;
    case StoreMode::strided: return k % s.stride == 0 || k == n_steps;
    default: return false;
  }
}

}  // namespace detail

inline MarchResult run_fine_march(const FineMesh& fm, const DofMap& dm,
                                  const OperatorBlocks& blocks,
                                  const TimeGrid& grid, const ProblemData& pb,
                                  const StoreSpec& store = {}) {
  grid.validate();
  FineSystem sys(fm, dm, blocks, grid.tau);
  Eigen::VectorXd w = initial_state(fm, dm, blocks, pb);
  MarchResult out;
  if (detail::want_store(store, 0, grid.n_steps)) {
    out.times.push_back(0.0);
    out.states.push_back(w);
  }
  for (int k = 1; k <= grid.n_steps; ++k) {
    w = sys.step(w, pb, grid.t(k));
    if (detail::want_store(store, k, grid.n_steps)) {
      out.times.push_back(grid.t(k));
      out.states.push_back(w);
    }
  }
  out.final_state = std::move(w);
  out.final_time = grid.t_final();
  return out;
}

inline MarchResult run_coarse_march(const FineMesh& fm, const DofMap& dm,
                                    const OperatorBlocks& blocks,
                                    const MultiscaleBasis& basis,
                                    const TimeGrid& grid,
                                    const ProblemData& pb,
                                    const StoreSpec& store = {}) {
  grid.validate();
  CoarseSystem sys(fm, dm, blocks, basis, grid.tau);
  const Eigen::VectorXd w0 = initial_state(fm, dm, blocks, pb);
  Eigen::VectorXd wc =
      sys.project(w0 - dirichlet_values(fm, dm, pb.bc, 0.0));
  MarchResult out;
  if (detail::want_store(store, 0, grid.n_steps)) {
    out.times.push_back(0.0);
    out.states.push_back(sys.downscale(wc, pb, 0.0));
    out.coarse_coeffs.push_back(wc);
  }
  for (int k = 1; k <= grid.n_steps; ++k) {
    wc = sys.step_coeffs(wc, pb, grid.t(k));
    if (detail::want_store(store, k, grid.n_steps)) {
      out.times.push_back(grid.t(k));
      out.states.push_back(sys.downscale(wc, pb, grid.t(k)));
      out.coarse_coeffs.push_back(wc);
    }
  }
  out.final_state = sys.downscale(wc, pb, grid.t_final());
  out.final_coeffs = std::move(wc);
  out.final_time = grid.t_final();
  return out;
}

}  // namespace cgmsfem
