#pragma once

//! Patch spectral problems and the multiscale basis. On every vertex patch
//! the pencil
//!     A = [ A1          -gamma1 A2 ]     M = [ M1  0  ]
//!         [ gamma2 A2^T  A4        ]         [ 0   M2 ]
//! is solved densely: Cholesky of M reduces it to a standard (generally
//! nonsymmetric) eigenproblem handled by LAPACK dgeev. Eigenvalues are kept
//! raw; reported values carry the H^2 scaling, so mode selection does not
//! depend on uniform rescalings of the mass side. The decoupled variant
//! (gamma1 = gamma2 = 0 block problems) provides the comparison baseline.

#include <lapacke.h>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <complex>
#include <numeric>
#include <vector>

#include "cgmsfem/assembly.hpp"
#include "cgmsfem/common.hpp"
#include "cgmsfem/mesh.hpp"

namespace cgmsfem {

struct SpectralConfig {
  double gamma1 = 0.0;
  double gamma2 = 0.0;
  int n_keep = 8;           // eigenvector slots to retain
  double H = 0.1;           // coarse mesh size used for reporting
  int max_dense_dim = 10000;
};

//! Result of one patch eigensolve. vectors hold n_sel real columns spanning
//! the selected eigenspace: real eigenvectors directly, complex-conjugate
//! pairs as (Re, Im). Columns are M-orthonormal after modified Gram-Schmidt.
struct PatchSpectrum {
  int dim = 0;       // pencil dimension (3 * patch node count)
  int n_nodes = 0;   // patch node count
  double H = 0.1;
  Eigen::VectorXcd lambda_raw;  // all eigenvalues, ascending by real part
  Eigen::MatrixXd vectors;      // dim x n_sel
  std::vector<int> rank;        // selection index of each column
  std::vector<char> kind;       // 'c' coupled, 'u'/'t' decoupled origin
  int n_complex_pairs = 0;      // among the selected modes
  double max_imag_selected = 0.0;

  int n_selected() const { return static_cast<int>(vectors.cols()); }
  //! H^2-scaled real part of eigenvalue i.
  double reported(int i) const { return H * H * lambda_raw[i].real(); }
};

namespace detail {

//! LAPACK dgeev on C (overwritten); right eigenvectors in LAPACK packing:
//! a real column per real eigenvalue, (Re, Im) column pair per complex pair
//! with wi > 0 first.
inline void dgeev_packed(Eigen::MatrixXd& C, Eigen::VectorXd& wr,
                         Eigen::VectorXd& wi, Eigen::MatrixXd& VR) {
  const int n = static_cast<int>(C.rows());
  wr.resize(n);
  wi.resize(n);
  VR.resize(n, n);
  const int info =
      LAPACKE_dgeev(LAPACK_COL_MAJOR, 'N', 'V', n, C.data(), n, wr.data(),
                    wi.data(), nullptr, std::max(1, n), VR.data(), n);
  CGM_REQUIRE(info == 0, "patch spectrum: dgeev failed");
}

//! LAPACK dsygv: A x = lambda M x with symmetric A and SPD M; ascending
//! eigenvalues, eigenvectors M-orthonormal. A and M are overwritten.
inline void dsygv_inplace(Eigen::MatrixXd& A, Eigen::MatrixXd& M,
                          Eigen::VectorXd& w) {
  const int n = static_cast<int>(A.rows());
  w.resize(n);
  const int info = LAPACKE_dsygv(LAPACK_COL_MAJOR, 1, 'V', 'L', n, A.data(), n,
                                 M.data(), n, w.data());
  CGM_REQUIRE(info == 0,
              "patch spectrum: dsygv failed (mass block not positive?)");
}

inline void fix_column_sign(Eigen::Ref<Eigen::VectorXd> v) {
  int imax = 0;
  double vmax = 0.0;
  for (int i = 0; i < v.size(); ++i)
    if (std::abs(v[i]) > vmax) {
      vmax = std::abs(v[i]);
      imax = i;
    }
  if (v[imax] < 0.0) v = -v;
}

//! Two-pass modified Gram-Schmidt in the M inner product; in-place.
inline void m_orthonormalize(Eigen::MatrixXd& V, const Eigen::MatrixXd& M) {
  const int k = static_cast<int>(V.cols());
  Eigen::MatrixXd W(V.rows(), k);  // W.col(j) = M * V.col(j), for done columns
  for (int c = 0; c < k; ++c) {
    Eigen::VectorXd v = V.col(c);
    for (int pass = 0; pass < 2; ++pass)
      for (int p = 0; p < c; ++p) v -= W.col(p).dot(v) * V.col(p);
    const double nrm = std::sqrt(v.dot(M * v));
    CGM_REQUIRE(nrm > 1e-14,
                "patch spectrum: degenerate mode in Gram-Schmidt");
    v /= nrm;
    fix_column_sign(v);
    V.col(c) = v;
    W.col(c) = M * v;
  }
}

}  // namespace detail

//! Dense generalized eigensolve of (A, M) with M SPD; smallest-real-part
//! selection of cfg.n_keep modes, conjugate pairs split into (Re, Im).
inline PatchSpectrum solve_pencil(const Eigen::MatrixXd& A,
                                  const Eigen::MatrixXd& M,
                                  const SpectralConfig& cfg) {
  const int n = static_cast<int>(A.rows());
  CGM_REQUIRE_ARG(A.rows() == A.cols() && M.rows() == n && M.cols() == n,
                  "solve_pencil: shape mismatch");
  CGM_REQUIRE_ARG(n <= cfg.max_dense_dim,
                  "solve_pencil: pencil dimension exceeds the dense cap; "
                  "raise max_dense_dim or shrink the patch");
  Eigen::LLT<Eigen::MatrixXd> llt(M);
  CGM_REQUIRE(llt.info() == Eigen::Success,
              "solve_pencil: mass matrix is not positive definite");

  // C = L^-1 A L^-T, psi = L^-T y.
  Eigen::MatrixXd C = llt.matrixL().solve(A);
  C = llt.matrixL().solve(C.transpose()).transpose();
  Eigen::VectorXd wr, wi;
  Eigen::MatrixXd VR;
  detail::dgeev_packed(C, wr, wi, VR);
  Eigen::MatrixXd Psi = llt.matrixU().solve(VR);  // keeps LAPACK pair packing

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return wr[a] < wr[b]; });

  PatchSpectrum S;
  S.dim = n;
  S.H = cfg.H;
  S.lambda_raw.resize(n);
  for (int i = 0; i < n; ++i)
    S.lambda_raw[i] = std::complex<double>(wr[order[i]], wi[order[i]]);

  const int n_sel = std::min(cfg.n_keep, n);
  S.vectors.resize(n, n_sel);
  S.rank.reserve(n_sel);
  std::vector<char> consumed(n, 0);
  int col = 0, rank = 0;
  for (int idx : order) {
    if (col >= n_sel) break;
    if (consumed[idx]) continue;
    if (wi[idx] == 0.0) {
      S.vectors.col(col) = Psi.col(idx);
      S.rank.push_back(rank);
      consumed[idx] = 1;
      ++col;
      ++rank;
    } else {
      const int a = wi[idx] > 0.0 ? idx : idx - 1;  // LAPACK pair start
      consumed[a] = consumed[a + 1] = 1;
      S.max_imag_selected = std::max(S.max_imag_selected, std::abs(wi[a]));
      ++S.n_complex_pairs;
      S.vectors.col(col) = Psi.col(a);  // real part
      S.rank.push_back(rank);
      ++col;
      ++rank;
      if (col < n_sel) {  // imaginary part, unless the cut splits the pair
        S.vectors.col(col) = Psi.col(a + 1);
        S.rank.push_back(rank);
        ++col;
        ++rank;
      }
    }
  }
  S.kind.assign(S.rank.size(), 'c');
  detail::m_orthonormalize(S.vectors, M);
  return S;
}

//! Dense pencil blocks of one patch.
inline void dense_pencil(const OperatorBlocks& B, double gamma1, double gamma2,
                         Eigen::MatrixXd& A, Eigen::MatrixXd& M) {
  const int m = B.n;
  A.setZero(3 * m, 3 * m);
  M.setZero(3 * m, 3 * m);
  A.topLeftCorner(2 * m, 2 * m) = Eigen::MatrixXd(B.A1);
  A.topRightCorner(2 * m, m) = -gamma1 * Eigen::MatrixXd(B.A2);
  A.bottomLeftCorner(m, 2 * m) =
      gamma2 * Eigen::MatrixXd(B.A2).transpose();
  A.bottomRightCorner(m, m) = Eigen::MatrixXd(B.A4);
  M.topLeftCorner(2 * m, 2 * m) = Eigen::MatrixXd(B.M1);
  M.bottomRightCorner(m, m) = Eigen::MatrixXd(B.M2);
}

//! Coupled spectral problem of one patch.
inline PatchSpectrum solve_patch_spectrum(const OperatorBlocks& B,
                                          const SpectralConfig& cfg) {
  CGM_REQUIRE_ARG(3 * B.n <= cfg.max_dense_dim,
                  "solve_patch_spectrum: patch dof count exceeds the dense "
                  "eigensolver cap");
  Eigen::MatrixXd A, M;
  dense_pencil(B, cfg.gamma1, cfg.gamma2, A, M);
  PatchSpectrum S = solve_pencil(A, M, cfg);
  S.n_nodes = B.n;
  return S;
}

//! Decoupled baseline: n_u elastic modes of (A1, M1) and n_th heat modes of
//! (A4, M2), embedded into the coupled index space (u modes first). The
//! eigenvalue list is the sorted union of both block spectra.
inline PatchSpectrum solve_patch_spectrum_decoupled(const OperatorBlocks& B,
                                                    const SpectralConfig& cfg,
                                                    int n_u, int n_th) {
  const int m = B.n;
  CGM_REQUIRE_ARG(3 * m <= cfg.max_dense_dim,
                  "solve_patch_spectrum_decoupled: patch dof count exceeds "
                  "the dense eigensolver cap");
  CGM_REQUIRE_ARG(n_u >= 0 && n_th >= 0 && n_u <= 2 * m && n_th <= m,
                  "solve_patch_spectrum_decoupled: bad mode split");
  Eigen::MatrixXd Au(B.A1), Mu(B.M1), At(B.A4), Mt(B.M2);
  Eigen::VectorXd wu, wt;
  detail::dsygv_inplace(Au, Mu, wu);  // Au now holds M1-orthonormal vectors
  detail::dsygv_inplace(At, Mt, wt);

  PatchSpectrum S;
  S.dim = 3 * m;
  S.n_nodes = m;
  S.H = cfg.H;
  S.lambda_raw.resize(3 * m);
  {
    std::vector<double> merged(wu.data(), wu.data() + wu.size());
    merged.insert(merged.end(), wt.data(), wt.data() + wt.size());
    std::sort(merged.begin(), merged.end());
    for (int i = 0; i < 3 * m; ++i) S.lambda_raw[i] = merged[i];
  }
  S.vectors = Eigen::MatrixXd::Zero(3 * m, n_u + n_th);
  for (int k = 0; k < n_u; ++k) {
    S.vectors.col(k).head(2 * m) = Au.col(k);
    detail::fix_column_sign(S.vectors.col(k));
    S.rank.push_back(k);
    S.kind.push_back('u');
  }
  for (int k = 0; k < n_th; ++k) {
    S.vectors.col(n_u + k).tail(m) = At.col(k);
    detail::fix_column_sign(S.vectors.col(n_u + k));
    S.rank.push_back(k);
    S.kind.push_back('t');
  }
  return S;
}

//! Multiscale basis: per patch, the selected pencil modes multiplied nodally
//! by the patch partition-of-unity function, Dirichlet rows zeroed. Columns
//! whose norm falls below drop_tol are removed (counted in dropped_small);
//! with rank_drop an additional column-pivoted QR removes linearly dependent
//! columns (dropped_rank), which keeps the coarse operators factorizable when
//! the requested spectra span entire patches.
struct MultiscaleBasis {
  SpMat R;  // n_dofs x n_cols, Dirichlet rows zero
  std::vector<int> col_patch, col_rank;
  std::vector<char> col_kind;
  int dropped_small = 0;
  int dropped_rank = 0;

  int n_cols() const { return static_cast<int>(R.cols()); }
};

struct BasisOptions {
  double drop_tol = 1e-12;
  bool rank_drop = false;
};

inline MultiscaleBasis build_multiscale_basis(
    const MeshPair& mp, const PartitionOfUnity& pou, const DofMap& dm,
    const std::vector<PatchSpectrum>& spectra, const BasisOptions& opt = {}) {
  const int nv = mp.coarse.n_vertices();
  CGM_REQUIRE_ARG(static_cast<int>(spectra.size()) == nv,
                  "build_multiscale_basis: one spectrum per patch required");
  const int n = mp.fine.n_nodes();
  MultiscaleBasis basis;
  std::vector<Triplet> trip;
  std::vector<int> col_patch, col_rank;
  std::vector<char> col_kind;
  int col = 0;
  for (int v = 0; v < nv; ++v) {
    const Patch& pa = mp.coarse.patches[v];
    const PatchSpectrum& S = spectra[v];
    const int m = pa.n_nodes();
    CGM_REQUIRE_ARG(S.dim == 3 * m,
                    "build_multiscale_basis: spectrum/patch size mismatch");
    for (int c = 0; c < S.n_selected(); ++c) {
      double norm2 = 0.0;
      std::vector<Triplet> cur;
      cur.reserve(3 * m);
      for (int k = 0; k < m; ++k) {
        const int p = pa.nodes[k];
        const double chi = pou.chi[v][k];
        if (chi == 0.0) continue;
        const double vals[3] = {chi * S.vectors(k, c),
                                chi * S.vectors(m + k, c),
                                chi * S.vectors(2 * m + k, c)};
        const int dofs[3] = {dm.u1(p), dm.u2(p), dm.th(p)};
        for (int d = 0; d < 3; ++d) {
          if (vals[d] == 0.0 || dm.fixed(dofs[d])) continue;
          cur.emplace_back(dofs[d], col, vals[d]);
          norm2 += vals[d] * vals[d];
        }
      }
      if (std::sqrt(norm2) < opt.drop_tol) {
        ++basis.dropped_small;
        continue;
      }
      trip.insert(trip.end(), cur.begin(), cur.end());
      col_patch.push_back(v);
      col_rank.push_back(S.rank[c]);
      col_kind.push_back(S.kind.empty() ? 'c' : S.kind[c]);
      ++col;
    }
  }
  basis.R.resize(3 * n, col);
  basis.R.setFromTriplets(trip.begin(), trip.end());
  basis.R.makeCompressed();
  basis.col_patch = std::move(col_patch);
  basis.col_rank = std::move(col_rank);
  basis.col_kind = std::move(col_kind);

  if (opt.rank_drop && col > 0) {
    const Eigen::MatrixXd D(basis.R);
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(D);
    const int rank = static_cast<int>(qr.rank());
    if (rank < col) {
      std::vector<int> keep(qr.colsPermutation().indices().data(),
                            qr.colsPermutation().indices().data() + rank);
      std::sort(keep.begin(), keep.end());
      SpMat R2(3 * n, rank);
      std::vector<Triplet> t2;
      std::vector<int> cp2, cr2;
      std::vector<char> ck2;
      for (int j = 0; j < rank; ++j) {
        const int src = keep[j];
        for (SpMat::InnerIterator it(basis.R, src); it; ++it)
          t2.emplace_back(it.row(), j, it.value());
        cp2.push_back(basis.col_patch[src]);
        cr2.push_back(basis.col_rank[src]);
        ck2.push_back(basis.col_kind[src]);
      }
      R2.setFromTriplets(t2.begin(), t2.end());
      R2.makeCompressed();
      basis.dropped_rank = col - rank;
      basis.R = std::move(R2);
      basis.col_patch = std::move(cp2);
      basis.col_rank = std::move(cr2);
      basis.col_kind = std::move(ck2);
    }
  }
  return basis;
}

//! sin of the largest principal angle between equal-dimension column spans.
inline double subspace_angle_sin(const Eigen::MatrixXd& U,
                                 const Eigen::MatrixXd& V) {
  CGM_REQUIRE_ARG(U.rows() == V.rows() && U.cols() == V.cols() && U.cols() > 0,
                  "subspace_angle_sin: shape mismatch");
  const auto thin_q = [](const Eigen::MatrixXd& X) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(X);
    return Eigen::MatrixXd(
        qr.householderQ() *
        Eigen::MatrixXd::Identity(X.rows(), X.cols()));
  };
  const Eigen::MatrixXd Uq = thin_q(U), Vq = thin_q(V);
  const Eigen::MatrixXd T = Vq - Uq * (Uq.transpose() * Vq);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(T);
  return svd.singularValues().maxCoeff();
}

}  // namespace cgmsfem
