#pragma once

//! Elementwise P1 kernels on triangles. All integrals here are exact for
//! elementwise-constant coefficients; load integrals use the 3-point
//! edge-midpoint rule (exact for quadratic integrands).

#include <Eigen/Dense>

#include "cgmsfem/common.hpp"

namespace cgmsfem {

//! Geometry of one triangle: constant P1 shape gradients and signed area.
struct TriGeom {
  Eigen::Matrix<double, 2, 3> grad;  // grad(:,i) = nabla phi_i
  Eigen::Matrix<double, 2, 3> corner;
  double area = 0.0;
};

inline TriGeom tri_geom(const Eigen::Vector2d& p0, const Eigen::Vector2d& p1,
                        const Eigen::Vector2d& p2) {
  TriGeom g;
  g.corner.col(0) = p0;
  g.corner.col(1) = p1;
  g.corner.col(2) = p2;
  Eigen::Matrix2d B;
  B.col(0) = p1 - p0;
  B.col(1) = p2 - p0;
  const double det = B(0, 0) * B(1, 1) - B(0, 1) * B(1, 0);
  CGM_REQUIRE_ARG(det > 0.0, "tri_geom: degenerate or inverted triangle");
  g.area = 0.5 * det;
  Eigen::Matrix<double, 2, 3> ref;  // reference hat gradients
  ref << -1.0, 1.0, 0.0,
         -1.0, 0.0, 1.0;
  g.grad = B.transpose().inverse() * ref;
  return g;
}

//! integral kappa grad(phi_i).grad(phi_j)
inline Eigen::Matrix3d local_conduction(const TriGeom& g, double kappa) {
  return (kappa * g.area) * (g.grad.transpose() * g.grad);
}

//! integral phi_i phi_j (no coefficient)
inline Eigen::Matrix3d local_mass(const TriGeom& g) {
  Eigen::Matrix3d m;
  m << 2, 1, 1,
       1, 2, 1,
       1, 1, 2;
  return (g.area / 12.0) * m;
}

//! integral sigma(phi_i e_k) : eps(phi_j e_l) with sigma = 2 mu eps + lambda div I.
//! Local dof order: [u1@v0, u1@v1, u1@v2, u2@v0, u2@v1, u2@v2].
inline Eigen::Matrix<double, 6, 6> local_elasticity(const TriGeom& g,
                                                    double lambda, double mu) {
  Eigen::Matrix<double, 6, 6> K;
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 3; ++i)
      for (int l = 0; l < 2; ++l)
        for (int j = 0; j < 3; ++j) {
          const double gdot = g.grad.col(i).dot(g.grad.col(j));
          const double val =
              mu * ((k == l ? gdot : 0.0) + g.grad(l, i) * g.grad(k, j)) +
              lambda * g.grad(k, i) * g.grad(l, j);
          K(3 * k + i, 3 * l + j) = g.area * val;
        }
  return K;
}

//! integral beta phi_j d_k phi_i, rows indexed like local_elasticity, cols by theta node.
inline Eigen::Matrix<double, 6, 3> local_div_coupling(const TriGeom& g,
                                                      double beta) {
  Eigen::Matrix<double, 6, 3> C;
  for (int k = 0; k < 2; ++k)
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        C(3 * k + i, j) = beta * g.grad(k, i) * (g.area / 3.0);
  return C;
}

//! Edge midpoints and P1 shape values there; quadrature weight is area/3 each.
inline Eigen::Matrix<double, 2, 3> tri_edge_midpoints(const TriGeom& g) {
  Eigen::Matrix<double, 2, 3> m;
  m.col(0) = 0.5 * (g.corner.col(0) + g.corner.col(1));
  m.col(1) = 0.5 * (g.corner.col(1) + g.corner.col(2));
  m.col(2) = 0.5 * (g.corner.col(2) + g.corner.col(0));
  return m;
}

//! phi_i at the midpoint opposite corner (i+2)%3 is 0, at the other two 1/2.
inline Eigen::Matrix3d tri_midpoint_shape_values() {
  Eigen::Matrix3d s;  // s(i, q) = phi_i at midpoint q
  s << 0.5, 0.0, 0.5,
       0.5, 0.5, 0.0,
       0.0, 0.5, 0.5;
  return s;
}

}  // namespace cgmsfem
