#pragma once

//! Structured P1 triangulation of the unit square, nested inside a quad
//! coarse grid. Every fine cell is split along its lower-left to upper-right
//! diagonal; both triangles are counterclockwise. Coarse vertex patches
//! aggregate the 1, 2, or 4 coarse cells touching the vertex.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "cgmsfem/common.hpp"
#include "cgmsfem/fem_kernels.hpp"

namespace cgmsfem {

namespace boundary {
inline constexpr std::uint8_t bottom = 1;
inline constexpr std::uint8_t right = 2;
inline constexpr std::uint8_t top = 4;
inline constexpr std::uint8_t left = 8;
}  // namespace boundary

struct FineMesh {
  int nx = 0, ny = 0;
  Eigen::MatrixX2d nodes;   // row p = coordinates of node p
  Eigen::MatrixX3i tris;    // row e = node ids, counterclockwise

  int n_nodes() const { return static_cast<int>(nodes.rows()); }
  int n_elems() const { return static_cast<int>(tris.rows()); }
  double hx() const { return 1.0 / nx; }
  double hy() const { return 1.0 / ny; }

  int node_id(int i, int j) const { return j * (nx + 1) + i; }
  int node_i(int p) const { return p % (nx + 1); }
  int node_j(int p) const { return p / (nx + 1); }

  std::uint8_t boundary_mask(int p) const {
    std::uint8_t m = 0;
    if (node_j(p) == 0) m |= boundary::bottom;
    if (node_i(p) == nx) m |= boundary::right;
    if (node_j(p) == ny) m |= boundary::top;
    if (node_i(p) == 0) m |= boundary::left;
    return m;
  }

  TriGeom elem_geom(int e) const {
    return tri_geom(nodes.row(tris(e, 0)).transpose(),
                    nodes.row(tris(e, 1)).transpose(),
                    nodes.row(tris(e, 2)).transpose());
  }
};

//! Vertex patch: fine elements and fine nodes of the coarse cells around one
//! coarse vertex. Nodes are listed row-major over the index rectangle
//! [i0,i1]x[j0,j1], which keeps them sorted by global id.
struct Patch {
  int I = 0, J = 0;          // coarse vertex multi-index
  int i0 = 0, i1 = 0, j0 = 0, j1 = 0;  // fine node index bounds, inclusive
  std::vector<int> elems;
  std::vector<int> nodes;

  int n_nodes() const { return static_cast<int>(nodes.size()); }
  //! Local index of fine node (gi, gj); the node must lie in the bounds.
  int local_node(int gi, int gj) const {
    return (gj - j0) * (i1 - i0 + 1) + (gi - i0);
  }
};

struct CoarseMesh {
  int Nx = 0, Ny = 0;
  int rx = 0, ry = 0;        // fine cells per coarse cell, per axis
  double H = 0.0;            // coarse mesh size, max(1/Nx, 1/Ny)
  std::vector<Patch> patches;

  int n_vertices() const { return (Nx + 1) * (Ny + 1); }
  int vertex_id(int I, int J) const { return J * (Nx + 1) + I; }
  double vertex_x(int I) const { return static_cast<double>(I) / Nx; }
  double vertex_y(int J) const { return static_cast<double>(J) / Ny; }
};

struct MeshPair {
  FineMesh fine;
  CoarseMesh coarse;
};

//! Builds the nested fine/coarse pair. The coarse grid must divide the fine
//! grid exactly on both axes.
inline MeshPair build_mesh_pair(int nx, int ny, int Nx, int Ny) {
  CGM_REQUIRE_ARG(nx >= 1 && ny >= 1 && Nx >= 1 && Ny >= 1,
                  "build_mesh_pair: grid sizes must be positive");
  CGM_REQUIRE_ARG(nx % Nx == 0 && ny % Ny == 0,
                  "build_mesh_pair: coarse grid does not nest into fine grid "
                  "(nx, ny must be multiples of Nx, Ny)");
  MeshPair mp;
  FineMesh& fm = mp.fine;
  fm.nx = nx;
  fm.ny = ny;
  fm.nodes.resize((nx + 1) * (ny + 1), 2);
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i) {
      const int p = fm.node_id(i, j);
      fm.nodes(p, 0) = static_cast<double>(i) / nx;
      fm.nodes(p, 1) = static_cast<double>(j) / ny;
    }
  fm.tris.resize(2 * nx * ny, 3);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      const int a = fm.node_id(i, j);
      const int b = fm.node_id(i + 1, j);
      const int c = fm.node_id(i + 1, j + 1);
      const int d = fm.node_id(i, j + 1);
      const int e = 2 * (j * nx + i);
      fm.tris.row(e) << a, b, c;      // below the a-c diagonal
      fm.tris.row(e + 1) << a, c, d;  // above the a-c diagonal
    }

  CoarseMesh& cm = mp.coarse;
  cm.Nx = Nx;
  cm.Ny = Ny;
  cm.rx = nx / Nx;
  cm.ry = ny / Ny;
  cm.H = std::max(1.0 / Nx, 1.0 / Ny);
  cm.patches.resize(cm.n_vertices());
  for (int J = 0; J <= Ny; ++J)
    for (int I = 0; I <= Nx; ++I) {
      Patch& pa = cm.patches[cm.vertex_id(I, J)];
      pa.I = I;
      pa.J = J;
      const int ci0 = std::max(I - 1, 0), ci1 = std::min(I, Nx - 1);
      const int cj0 = std::max(J - 1, 0), cj1 = std::min(J, Ny - 1);
      pa.i0 = ci0 * cm.rx;
      pa.i1 = (ci1 + 1) * cm.rx;
      pa.j0 = cj0 * cm.ry;
      pa.j1 = (cj1 + 1) * cm.ry;
      for (int cj = cj0; cj <= cj1; ++cj)
        for (int ci = ci0; ci <= ci1; ++ci)
          for (int fj = cj * cm.ry; fj < (cj + 1) * cm.ry; ++fj)
            for (int fi = ci * cm.rx; fi < (ci + 1) * cm.rx; ++fi) {
              pa.elems.push_back(2 * (fj * nx + fi));
              pa.elems.push_back(2 * (fj * nx + fi) + 1);
            }
      pa.nodes.reserve((pa.i1 - pa.i0 + 1) * (pa.j1 - pa.j0 + 1));
      for (int gj = pa.j0; gj <= pa.j1; ++gj)
        for (int gi = pa.i0; gi <= pa.i1; ++gi)
          pa.nodes.push_back(fm.node_id(gi, gj));
    }
  return mp;
}

enum class PouKind { bilinear, msfem_harmonic };

//! chi[v][k] is the value of partition function v at coarse.patches[v].nodes[k].
//! Functions vanish at all fine nodes outside their patch.
struct PartitionOfUnity {
  PouKind kind = PouKind::bilinear;
  std::vector<Eigen::VectorXd> chi;

  //! Scatters chi[v] into a full nodal vector.
  Eigen::VectorXd full(const MeshPair& mp, int v) const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(mp.fine.n_nodes());
    const Patch& pa = mp.coarse.patches[v];
    for (int k = 0; k < pa.n_nodes(); ++k) out[pa.nodes[k]] = chi[v][k];
    return out;
  }
};

namespace detail {

//! Bilinear coarse hat of vertex (I, J) at fine node (gi, gj), exact in index
//! arithmetic: tent(|gi/rx - I|) * tent(|gj/ry - J|).
inline double bilinear_hat(const CoarseMesh& cm, int I, int J, int gi, int gj) {
  const double tx = 1.0 - std::abs(static_cast<double>(gi) / cm.rx - I);
  const double ty = 1.0 - std::abs(static_cast<double>(gj) / cm.ry - J);
  return std::max(0.0, tx) * std::max(0.0, ty);
}

//! kappa-harmonic extension of the bilinear corner data into one coarse cell.
//! Writes the four corner functions' values on the cell's fine node grid.
//! corner_vals[c] has (rx+1)*(ry+1) entries, row-major (jj outer).
inline void harmonic_cell_extension(const MeshPair& mp,
                                    const Eigen::VectorXd& kappa, int ca,
                                    int cb,
                                    std::array<Eigen::VectorXd, 4>& corner_vals) {
  const FineMesh& fm = mp.fine;
  const int rx = mp.coarse.rx, ry = mp.coarse.ry;
  const int nn = (rx + 1) * (ry + 1);
  auto loc = [&](int ii, int jj) { return jj * (rx + 1) + ii; };
  auto corner_data = [&](int c, int ii, int jj) {
    const double xi = static_cast<double>(ii) / rx;
    const double eta = static_cast<double>(jj) / ry;
    switch (c) {
      case 0: return (1.0 - xi) * (1.0 - eta);  // corner (ca, cb)
      case 1: return xi * (1.0 - eta);          // corner (ca+1, cb)
      case 2: return xi * eta;                  // corner (ca+1, cb+1)
      default: return (1.0 - xi) * eta;         // corner (ca, cb+1)
    }
  };

  std::vector<int> interior;  // local ids strictly inside the cell
  std::vector<int> int_of_loc(nn, -1);
  for (int jj = 1; jj < ry; ++jj)
    for (int ii = 1; ii < rx; ++ii) {
      int_of_loc[loc(ii, jj)] = static_cast<int>(interior.size());
      interior.push_back(loc(ii, jj));
    }

  for (int c = 0; c < 4; ++c) {
    corner_vals[c].resize(nn);
    for (int jj = 0; jj <= ry; ++jj)
      for (int ii = 0; ii <= rx; ++ii)
        corner_vals[c][loc(ii, jj)] = corner_data(c, ii, jj);
  }
  if (interior.empty()) return;  // boundary data covers every cell node

  const int ni = static_cast<int>(interior.size());
  std::vector<Eigen::Triplet<double>> trip;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(ni, 4);
  for (int fj = 0; fj < ry; ++fj)
    for (int fi = 0; fi < rx; ++fi) {
      const int ge = 2 * ((cb * ry + fj) * fm.nx + (ca * rx + fi));
      for (int half = 0; half < 2; ++half) {
        const int e = ge + half;
        const TriGeom g = fm.elem_geom(e);
        const Eigen::Matrix3d K = local_conduction(g, kappa[e]);
        int lid[3];
        for (int v = 0; v < 3; ++v) {
          const int gnode = fm.tris(e, v);
          lid[v] = loc(fm.node_i(gnode) - ca * rx, fm.node_j(gnode) - cb * ry);
        }
        for (int r = 0; r < 3; ++r) {
          const int ir = int_of_loc[lid[r]];
          if (ir < 0) continue;
          for (int s = 0; s < 3; ++s) {
            const int is = int_of_loc[lid[s]];
            if (is >= 0)
              trip.emplace_back(ir, is, K(r, s));
            else
              for (int c = 0; c < 4; ++c)
                rhs(ir, c) -= K(r, s) * corner_vals[c][lid[s]];
          }
        }
      }
    }
  Eigen::SparseMatrix<double> A(ni, ni);
  A.setFromTriplets(trip.begin(), trip.end());
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(A);
  CGM_REQUIRE(ldlt.info() == Eigen::Success,
              "partition of unity: cell conduction solve failed");
  const Eigen::MatrixXd sol = ldlt.solve(rhs);
  for (int c = 0; c < 4; ++c)
    for (int k = 0; k < ni; ++k) corner_vals[c][interior[k]] = sol(k, c);
}

}  // namespace detail

//! Builds the partition of unity over coarse vertex patches. The bilinear
//! kind samples the coarse Q1 hats at fine nodes. The msfem_harmonic kind
//! replaces each hat inside every coarse cell by the kappa-harmonic extension
//! of its trace on the cell boundary; kappa is a per-fine-element field.
inline PartitionOfUnity build_partition_of_unity(
    const MeshPair& mp, PouKind kind, const Eigen::VectorXd* kappa = nullptr) {
  const CoarseMesh& cm = mp.coarse;
  PartitionOfUnity pou;
  pou.kind = kind;
  pou.chi.resize(cm.n_vertices());
  for (int v = 0; v < cm.n_vertices(); ++v)
    pou.chi[v] = Eigen::VectorXd::Zero(cm.patches[v].n_nodes());

  if (kind == PouKind::bilinear) {
    for (int v = 0; v < cm.n_vertices(); ++v) {
      const Patch& pa = cm.patches[v];
      for (int k = 0; k < pa.n_nodes(); ++k) {
        const int gi = mp.fine.node_i(pa.nodes[k]);
        const int gj = mp.fine.node_j(pa.nodes[k]);
        pou.chi[v][k] = detail::bilinear_hat(cm, pa.I, pa.J, gi, gj);
      }
    }
    return pou;
  }

  CGM_REQUIRE_ARG(kappa != nullptr,
                  "build_partition_of_unity: msfem_harmonic needs a "
                  "per-element conductivity field");
  CGM_REQUIRE_ARG(kappa->size() == mp.fine.n_elems(),
                  "build_partition_of_unity: kappa size mismatch");
  // Corner c of cell (ca, cb) contributes to the patch of that corner vertex.
  for (int cb = 0; cb < cm.Ny; ++cb)
    for (int ca = 0; ca < cm.Nx; ++ca) {
      std::array<Eigen::VectorXd, 4> corner_vals;
      detail::harmonic_cell_extension(mp, *kappa, ca, cb, corner_vals);
      const int corner_I[4] = {ca, ca + 1, ca + 1, ca};
      const int corner_J[4] = {cb, cb, cb + 1, cb + 1};
      for (int c = 0; c < 4; ++c) {
        const int v = cm.vertex_id(corner_I[c], corner_J[c]);
        const Patch& pa = cm.patches[v];
        for (int jj = 0; jj <= cm.ry; ++jj)
          for (int ii = 0; ii <= cm.rx; ++ii) {
            const int gi = ca * cm.rx + ii;
            const int gj = cb * cm.ry + jj;
            pou.chi[v][pa.local_node(gi, gj)] =
                corner_vals[c][jj * (cm.rx + 1) + ii];
          }
      }
    }
  return pou;
}

inline PouKind pou_kind_from_string(const std::string& s) {
  if (s == "bilinear") return PouKind::bilinear;
  if (s == "msfem-harmonic") return PouKind::msfem_harmonic;
  fail_arg("unknown partition-of-unity kind: " + s);
}

inline std::string to_string(PouKind k) {
  return k == PouKind::bilinear ? "bilinear" : "msfem-harmonic";
}

}  // namespace cgmsfem
