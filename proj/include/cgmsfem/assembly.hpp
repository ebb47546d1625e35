#pragma once

//! Global and patch-local P1 operator blocks for the coupled
//! displacement-temperature system. Dof layout is [all u1 | all u2 | theta].
//! Blocks are assembled without boundary conditions; Dirichlet elimination is
//! done by index maps (reduced rows/cols plus lifting against fixed values).

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <functional>
#include <utility>
#include <vector>

#include "cgmsfem/coeffs.hpp"
#include "cgmsfem/common.hpp"
#include "cgmsfem/fem_kernels.hpp"
#include "cgmsfem/mesh.hpp"

namespace cgmsfem {

using SpMat = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

using NodePredicate = std::function<bool(const FineMesh&, int)>;

inline NodePredicate dirichlet_bottom() {
  return [](const FineMesh& fm, int p) {
    return (fm.boundary_mask(p) & boundary::bottom) != 0;
  };
}
inline NodePredicate dirichlet_all() {
  return [](const FineMesh& fm, int p) { return fm.boundary_mask(p) != 0; };
}
inline NodePredicate dirichlet_none() {
  return [](const FineMesh&, int) { return false; };
}

//! Composite dof numbering with per-field Dirichlet flags. A fixed u node
//! fixes both displacement components. Free dofs keep ascending composite
//! order, so all free u dofs precede all free theta dofs.
struct DofMap {
  int n_nodes = 0;
  std::vector<char> u_fixed, th_fixed;     // per node
  std::vector<int> free_of_dof;            // size 3n, -1 where fixed
  std::vector<int> dof_of_free;
  int n_free = 0, n_ufree = 0, n_thfree = 0;

  int u1(int p) const { return p; }
  int u2(int p) const { return n_nodes + p; }
  int th(int p) const { return 2 * n_nodes + p; }
  int n_dofs() const { return 3 * n_nodes; }
  bool fixed(int dof) const { return free_of_dof[dof] < 0; }
  //! Free index of a theta node within the theta panel.
  int th_free(int p) const { return free_of_dof[th(p)] - n_ufree; }
};

inline DofMap make_dof_map(const FineMesh& fm, const NodePredicate& u_pred,
                           const NodePredicate& th_pred) {
  DofMap dm;
  dm.n_nodes = fm.n_nodes();
  dm.u_fixed.resize(dm.n_nodes);
  dm.th_fixed.resize(dm.n_nodes);
  for (int p = 0; p < dm.n_nodes; ++p) {
    dm.u_fixed[p] = u_pred(fm, p) ? 1 : 0;
    dm.th_fixed[p] = th_pred(fm, p) ? 1 : 0;
  }
  dm.free_of_dof.assign(dm.n_dofs(), -1);
  for (int d = 0; d < dm.n_dofs(); ++d) {
    const bool fixed = d < 2 * dm.n_nodes ? dm.u_fixed[d % dm.n_nodes] != 0
                                          : dm.th_fixed[d - 2 * dm.n_nodes] != 0;
    if (!fixed) {
      dm.free_of_dof[d] = dm.n_free;
      dm.dof_of_free.push_back(d);
      ++dm.n_free;
    }
  }
  for (int d = 0; d < 2 * dm.n_nodes; ++d)
    if (dm.free_of_dof[d] >= 0) ++dm.n_ufree;
  dm.n_thfree = dm.n_free - dm.n_ufree;
  return dm;
}

inline DofMap make_dof_map(const FineMesh& fm) {
  return make_dof_map(fm, dirichlet_bottom(), dirichlet_bottom());
}

//! Sparse operator blocks over the nodes of one mesh (or one patch):
//!   A1      elastic stiffness                    (2n x 2n)
//!   A2      thermal coupling  int beta th div v  (2n x n)
//!   A4      conduction                           (n x n)
//!   Mprime  plain theta mass                     (n x n)
//!   M1      (lambda+2mu)-weighted vector mass    (2n x 2n)
//!   M2      kappa-weighted theta mass            (n x n)
//! The heat-row coupling is A2^T; it is never assembled separately.
struct OperatorBlocks {
  int n = 0;  // node count of the index space
  SpMat A1, A2, A4, Mprime, M1, M2;
};

namespace detail {

template <typename NodeLocal>
inline OperatorBlocks assemble_blocks_impl(const FineMesh& fm,
                                           const MaterialField& mat,
                                           const std::vector<int>& elems,
                                           int n_local, NodeLocal node_local) {
  OperatorBlocks B;
  B.n = n_local;
  std::vector<Triplet> tA1, tA2, tA4, tMp, tM1, tM2;
  tA1.reserve(elems.size() * 36);
  tA2.reserve(elems.size() * 18);
  tA4.reserve(elems.size() * 9);
  tMp.reserve(elems.size() * 9);
  tM1.reserve(elems.size() * 18);
  tM2.reserve(elems.size() * 9);
  for (int e : elems) {
    const TriGeom g = fm.elem_geom(e);
    int loc[3];
    for (int v = 0; v < 3; ++v) loc[v] = node_local(fm.tris(e, v));
    const Eigen::Matrix3d mass = local_mass(g);
    const Eigen::Matrix3d cond = local_conduction(g, mat.kappa[e]);
    const Eigen::Matrix<double, 6, 6> elas =
        local_elasticity(g, mat.lambda[e], mat.mu[e]);
    const Eigen::Matrix<double, 6, 3> coup = local_div_coupling(g, mat.beta[e]);
    const double wvm = mat.lambda[e] + 2.0 * mat.mu[e];
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        tA4.emplace_back(loc[i], loc[j], cond(i, j));
        tMp.emplace_back(loc[i], loc[j], mass(i, j));
        tM2.emplace_back(loc[i], loc[j], mat.kappa[e] * mass(i, j));
        for (int k = 0; k < 2; ++k) {
          tM1.emplace_back(k * n_local + loc[i], k * n_local + loc[j],
                           wvm * mass(i, j));
          tA2.emplace_back(k * n_local + loc[i], loc[j], coup(3 * k + i, j));
          for (int l = 0; l < 2; ++l)
            tA1.emplace_back(k * n_local + loc[i], l * n_local + loc[j],
                             elas(3 * k + i, 3 * l + j));
        }
      }
  }
  const auto build = [](int r, int c, std::vector<Triplet>& t) {
    SpMat S(r, c);
    S.setFromTriplets(t.begin(), t.end());
    S.makeCompressed();
    return S;
  };
  B.A1 = build(2 * n_local, 2 * n_local, tA1);
  B.A2 = build(2 * n_local, n_local, tA2);
  B.A4 = build(n_local, n_local, tA4);
  B.Mprime = build(n_local, n_local, tMp);
  B.M1 = build(2 * n_local, 2 * n_local, tM1);
  B.M2 = build(n_local, n_local, tM2);
  return B;
}

}  // namespace detail

inline OperatorBlocks assemble_blocks(const FineMesh& fm,
                                      const MaterialField& mat) {
  CGM_REQUIRE_ARG(mat.n_elems() == fm.n_elems(),
                  "assemble_blocks: material/mesh element count mismatch");
  std::vector<int> elems(fm.n_elems());
  for (int e = 0; e < fm.n_elems(); ++e) elems[e] = e;
  return detail::assemble_blocks_impl(fm, mat, elems, fm.n_nodes(),
                                      [](int g) { return g; });
}

//! Patch blocks in the patch-local node numbering. No Dirichlet handling:
//! the spectral cell problems use natural boundary conditions everywhere.
inline OperatorBlocks assemble_patch_blocks(const FineMesh& fm,
                                            const MaterialField& mat,
                                            const Patch& pa) {
  CGM_REQUIRE_ARG(mat.n_elems() == fm.n_elems(),
                  "assemble_patch_blocks: material/mesh element count mismatch");
  return detail::assemble_blocks_impl(
      fm, mat, pa.elems, pa.n_nodes(),
      [&](int g) { return pa.local_node(fm.node_i(g), fm.node_j(g)); });
}

using VectorSource = std::function<Eigen::Vector2d(double, double, double)>;
using ScalarSource = std::function<double(double, double, double)>;

//! P1 load vectors (F over u dofs, G over theta dofs) at time t, integrated
//! with the 3-point edge-midpoint rule.
inline std::pair<Eigen::VectorXd, Eigen::VectorXd> assemble_loads(
    const FineMesh& fm, const VectorSource& f, const ScalarSource& g,
    double t) {
  const int n = fm.n_nodes();
  Eigen::VectorXd F = Eigen::VectorXd::Zero(2 * n);
  Eigen::VectorXd G = Eigen::VectorXd::Zero(n);
  const Eigen::Matrix3d shape = tri_midpoint_shape_values();
  for (int e = 0; e < fm.n_elems(); ++e) {
    const TriGeom ge = fm.elem_geom(e);
    const Eigen::Matrix<double, 2, 3> mid = tri_edge_midpoints(ge);
    const double w = ge.area / 3.0;
    for (int q = 0; q < 3; ++q) {
      const Eigen::Vector2d fv = f(mid(0, q), mid(1, q), t);
      const double gv = g(mid(0, q), mid(1, q), t);
      for (int i = 0; i < 3; ++i) {
        const double s = shape(i, q);
        if (s == 0.0) continue;
        const int p = fm.tris(e, i);
        F[p] += w * s * fv.x();
        F[n + p] += w * s * fv.y();
        G[p] += w * s * gv;
      }
    }
  }
  return {F, G};
}

//! One-step system matrices of the implicit march with step tau:
//!   A = [ A1        -A2           ]      B = [ 0     0      ]
//!       [ A2^T   Mprime + tau A4  ]          [ A2^T  Mprime ]
//! acting on the composite vector [u; theta]; the heat row is scaled by tau.
inline std::pair<SpMat, SpMat> compose_system(const OperatorBlocks& B,
                                              double tau) {
  CGM_REQUIRE_ARG(tau > 0.0, "compose_system: tau must be positive");
  const int n = B.n;
  const int N = 3 * n;
  std::vector<Triplet> tA, tB;
  tA.reserve(B.A1.nonZeros() + 2 * B.A2.nonZeros() + B.A4.nonZeros() +
             B.Mprime.nonZeros());
  tB.reserve(B.A2.nonZeros() + B.Mprime.nonZeros());
  for (int k = 0; k < B.A1.outerSize(); ++k)
    for (SpMat::InnerIterator it(B.A1, k); it; ++it)
      tA.emplace_back(it.row(), it.col(), it.value());
  for (int k = 0; k < B.A2.outerSize(); ++k)
    for (SpMat::InnerIterator it(B.A2, k); it; ++it) {
      tA.emplace_back(it.row(), 2 * n + it.col(), -it.value());
      tA.emplace_back(2 * n + it.col(), it.row(), it.value());
      tB.emplace_back(2 * n + it.col(), it.row(), it.value());
    }
  for (int k = 0; k < B.A4.outerSize(); ++k)
    for (SpMat::InnerIterator it(B.A4, k); it; ++it)
      tA.emplace_back(2 * n + it.row(), 2 * n + it.col(), tau * it.value());
  for (int k = 0; k < B.Mprime.outerSize(); ++k)
    for (SpMat::InnerIterator it(B.Mprime, k); it; ++it) {
      tA.emplace_back(2 * n + it.row(), 2 * n + it.col(), it.value());
      tB.emplace_back(2 * n + it.row(), 2 * n + it.col(), it.value());
    }
  SpMat A(N, N), Bm(N, N);
  A.setFromTriplets(tA.begin(), tA.end());
  Bm.setFromTriplets(tB.begin(), tB.end());
  A.makeCompressed();
  Bm.makeCompressed();
  return {A, Bm};
}

//! Keeps rows/cols with nonnegative map entries, renumbering by the map.
inline SpMat restrict_matrix(const SpMat& S, const std::vector<int>& row_map,
                             int n_rows, const std::vector<int>& col_map,
                             int n_cols) {
  std::vector<Triplet> t;
  t.reserve(S.nonZeros());
  for (int k = 0; k < S.outerSize(); ++k)
    for (SpMat::InnerIterator it(S, k); it; ++it) {
      const int r = row_map[it.row()];
      const int c = col_map[it.col()];
      if (r >= 0 && c >= 0) t.emplace_back(r, c, it.value());
    }
  SpMat out(n_rows, n_cols);
  out.setFromTriplets(t.begin(), t.end());
  out.makeCompressed();
  return out;
}

inline Eigen::VectorXd restrict_vector(const Eigen::VectorXd& v,
                                       const std::vector<int>& map, int n) {
  Eigen::VectorXd out(n);
  for (int i = 0; i < static_cast<int>(map.size()); ++i)
    if (map[i] >= 0) out[map[i]] = v[i];
  return out;
}

}  // namespace cgmsfem
