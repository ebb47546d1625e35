#pragma once

//! Error measures, eigenvalue decay reporting, and the spectral
//! interpolation-bound self-check behind the verification suite. Energy
//! errors are quadratic forms of the full assembled operators; with matching
//! boundary values on both arguments the fixed rows cancel in the difference,
//! so no Dirichlet restriction is needed here.

#include <cmath>
#include <random>

#include "cgmsfem/assembly.hpp"
#include "cgmsfem/common.hpp"
#include "cgmsfem/spectral.hpp"

namespace cgmsfem {

struct FieldErrors {
  double u = 0.0, th = 0.0, w = 0.0;
};

namespace detail {

inline double quad_form(const SpMat& S, const Eigen::VectorXd& a,
                        const Eigen::VectorXd& b) {
  return a.dot(S * b);
}

inline FieldErrors relative_errors(double num_u2, double den_u2,
                                   double num_th2, double den_th2) {
  CGM_REQUIRE(den_u2 > 0.0 && den_th2 > 0.0,
              "error measure: reference field has zero norm");
  FieldErrors e;
  e.u = std::sqrt(num_u2 / den_u2);
  e.th = std::sqrt(num_th2 / den_th2);
  e.w = std::sqrt((num_u2 + num_th2) / (den_u2 + den_th2));
  return e;
}

}  // namespace detail

//! Relative errors in the operator energy norms: the elastic form for u,
//! the conduction form for theta, their sum for the composite state.
inline FieldErrors energy_errors(const OperatorBlocks& blocks,
                                 const Eigen::VectorXd& w,
                                 const Eigen::VectorXd& w_ref) {
  const int n = blocks.n;
  CGM_REQUIRE_ARG(w.size() == 3 * n && w_ref.size() == 3 * n,
                  "energy_errors: state size mismatch");
  const Eigen::VectorXd eu = w.head(2 * n) - w_ref.head(2 * n);
  const Eigen::VectorXd eth = w.tail(n) - w_ref.tail(n);
  return detail::relative_errors(
      detail::quad_form(blocks.A1, eu, eu),
      detail::quad_form(blocks.A1, w_ref.head(2 * n), w_ref.head(2 * n)),
      detail::quad_form(blocks.A4, eth, eth),
      detail::quad_form(blocks.A4, w_ref.tail(n), w_ref.tail(n)));
}

//! Relative L2 errors, componentwise plain mass.
inline FieldErrors relative_l2_errors(const OperatorBlocks& blocks,
                                      const Eigen::VectorXd& w,
                                      const Eigen::VectorXd& w_ref) {
  const int n = blocks.n;
  CGM_REQUIRE_ARG(w.size() == 3 * n && w_ref.size() == 3 * n,
                  "relative_l2_errors: state size mismatch");
  const auto mass2 = [&](const Eigen::VectorXd& full) {
    return detail::quad_form(blocks.Mprime, full.head(n), full.head(n)) +
           detail::quad_form(blocks.Mprime, full.segment(n, n),
                             full.segment(n, n));
  };
  const Eigen::VectorXd e = w - w_ref;
  return detail::relative_errors(
      mass2(e), mass2(w_ref),
      detail::quad_form(blocks.Mprime, e.tail(n), e.tail(n)),
      detail::quad_form(blocks.Mprime, w_ref.tail(n), w_ref.tail(n)));
}

//! Reported eigenvalue right past a selection of L modes, per patch and its
//! minimum over patches. The minimum drives the decay columns of the sweep
//! outputs.
struct DecayReport {
  Eigen::VectorXd per_patch;
  double min_value = 0.0;
  int arg_min = -1;
};

inline DecayReport eigen_decay_report(const std::vector<PatchSpectrum>& spectra,
                                      int L) {
  CGM_REQUIRE_ARG(!spectra.empty(), "eigen_decay_report: no spectra");
  DecayReport rep;
  rep.per_patch.resize(spectra.size());
  for (std::size_t i = 0; i < spectra.size(); ++i) {
    CGM_REQUIRE_ARG(L >= 0 && L < spectra[i].dim,
                    "eigen_decay_report: mode index beyond the pencil");
    rep.per_patch[static_cast<int>(i)] = spectra[i].reported(L);
    if (rep.arg_min < 0 || rep.per_patch[static_cast<int>(i)] < rep.min_value) {
      rep.min_value = rep.per_patch[static_cast<int>(i)];
      rep.arg_min = static_cast<int>(i);
    }
  }
  return rep;
}

//! Modal seminorm sum_i lambda_i^s (psi_i^T M w)^2 over the selected columns;
//! requires the M-orthonormal selection from the pencil solve.
inline double modal_seminorm2(const PatchSpectrum& S, const Eigen::MatrixXd& M,
                              const Eigen::VectorXd& w, int s_pow) {
  CGM_REQUIRE_ARG(s_pow >= 0 && s_pow <= 2, "modal_seminorm2: power 0, 1 or 2");
  CGM_REQUIRE_ARG(w.size() == S.dim, "modal_seminorm2: size mismatch");
  const Eigen::VectorXd Mw = M * w;
  double acc = 0.0;
  for (int c = 0; c < S.n_selected(); ++c) {
    const double coef = S.vectors.col(c).dot(Mw);
    double lam = 1.0;
    const double raw = S.lambda_raw[S.rank[c]].real();
    for (int k = 0; k < s_pow; ++k) lam *= raw;
    acc += lam * coef * coef;
  }
  return acc;
}

//! Self-check of the spectral interpolation bound: for w in the span of the
//! first 2L modes and e its tail past L, the mass of e is controlled by
//! lambda_{L+1}^{-s} times the order-s modal seminorm of w. Holds for the
//! antisymmetric coupling (real spectrum); L >= 3 keeps the cut past the
//! rigid kernel.
struct BoundCheck {
  bool ok = false;
  double lhs = 0.0, rhs = 0.0;
  double lambda_cut = 0.0;
};

inline BoundCheck interpolation_bound_check(const OperatorBlocks& B,
                                            SpectralConfig cfg, int L,
                                            int s_pow, std::uint64_t seed) {
  CGM_REQUIRE_ARG(cfg.gamma2 == -cfg.gamma1,
                  "interpolation bound: antisymmetric coupling required");
  CGM_REQUIRE_ARG(L >= 3, "interpolation bound: L must be at least 3");
  CGM_REQUIRE_ARG(s_pow == 1 || s_pow == 2,
                  "interpolation bound: seminorm power 1 or 2");
  cfg.n_keep = 2 * L;
  Eigen::MatrixXd A, M;
  dense_pencil(B, cfg.gamma1, cfg.gamma2, A, M);
  const PatchSpectrum S = solve_pencil(A, M, cfg);
  CGM_REQUIRE(S.n_selected() == 2 * L,
              "interpolation bound: patch pencil smaller than 2L modes");
  const double scale = S.lambda_raw.cwiseAbs().maxCoeff();
  CGM_REQUIRE(S.max_imag_selected <= 1e-8 * scale,
              "interpolation bound: selected spectrum is not real");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd c(2 * L);
  for (int i = 0; i < 2 * L; ++i) c[i] = gauss(rng);
  const Eigen::VectorXd w = S.vectors * c;
  const Eigen::VectorXd e =
      S.vectors.rightCols(L) * c.tail(L);

  BoundCheck out;
  out.lambda_cut = S.lambda_raw[L].real();
  CGM_REQUIRE(out.lambda_cut > 0.0,
              "interpolation bound: cut eigenvalue is not positive");
  out.lhs = e.dot(M * e);
  double lam = 1.0;
  for (int k = 0; k < s_pow; ++k) lam *= out.lambda_cut;
  out.rhs = modal_seminorm2(S, M, w, s_pow) / lam;
  out.ok = out.lhs <= out.rhs * (1.0 + 1e-8);
  return out;
}

}  // namespace cgmsfem
