#pragma once

//! Closed-form solution family for solver verification on the unit square
//! with constant coefficients:
//!   u(x, y, t) = (sin(pi x) sin(pi y) rho(t), 0)
//!   theta      =  sin(pi x) sin(pi y) rho(t)
//! with rho(t) = t or t^2. Sources follow from the strong equations
//!   -div sigma(u) + grad(beta theta) = f
//!   d/dt theta - div(kappa grad theta) + beta div(du/dt) = g.
//! The linear-in-time profile makes the implicit march exact in time, which
//! isolates the spatial discretization error; the quadratic profile carries
//! curvature for step-size studies.

#include <cmath>

#include "cgmsfem/coeffs.hpp"
#include "cgmsfem/timeloop.hpp"

namespace cgmsfem {

struct ManufacturedCase {
  double lambda = 1.0, mu = 1.0, kappa = 1.0, beta = 1.0;
  int time_power = 1;  // rho(t) = t^time_power, 1 or 2

  double rho(double t) const { return time_power == 2 ? t * t : t; }
  double drho(double t) const { return time_power == 2 ? 2.0 * t : 1.0; }

  Eigen::Vector2d u_exact(double x, double y, double t) const {
    constexpr double pi = M_PI;
    return {std::sin(pi * x) * std::sin(pi * y) * rho(t), 0.0};
  }
  double th_exact(double x, double y, double t) const {
    constexpr double pi = M_PI;
    return std::sin(pi * x) * std::sin(pi * y) * rho(t);
  }

  MaterialField material(const FineMesh& fm) const {
    MaterialField mat;
    mat.lambda = Eigen::VectorXd::Constant(fm.n_elems(), lambda);
    mat.mu = Eigen::VectorXd::Constant(fm.n_elems(), mu);
    mat.kappa = Eigen::VectorXd::Constant(fm.n_elems(), kappa);
    mat.beta = Eigen::VectorXd::Constant(fm.n_elems(), beta);
    mat.validate();
    return mat;
  }

  //! Sources and boundary data; pair with an all-boundary Dirichlet dof map.
  ProblemData problem() const {
    CGM_REQUIRE_ARG(time_power == 1 || time_power == 2,
                    "manufactured case: time_power must be 1 or 2");
    constexpr double pi = M_PI;
    const ManufacturedCase c = *this;
    ProblemData pb;
    pb.f = [c](double x, double y, double t) {
      const double s = std::sin(pi * x) * std::sin(pi * y);
      const double r = c.rho(t);
      const double f1 = (3.0 * c.mu + c.lambda) * pi * pi * r * s +
                        c.beta * pi * r * std::cos(pi * x) * std::sin(pi * y);
      const double f2 =
          -(c.mu + c.lambda) * pi * pi * r * std::cos(pi * x) *
              std::cos(pi * y) +
          c.beta * pi * r * std::sin(pi * x) * std::cos(pi * y);
      return Eigen::Vector2d(f1, f2);
    };
    pb.g = [c](double x, double y, double t) {
      const double s = std::sin(pi * x) * std::sin(pi * y);
      return c.drho(t) * s + 2.0 * c.kappa * pi * pi * c.rho(t) * s +
             c.beta * c.drho(t) * pi * std::cos(pi * x) * std::sin(pi * y);
    };
    pb.bc.u = [c](double x, double y, double t) { return c.u_exact(x, y, t); };
    pb.bc.th = [c](double x, double y, double t) {
      return c.th_exact(x, y, t);
    };
    pb.theta0 = pb.bc.th;
    return pb;
  }

  //! Nodal interpolant of the exact fields as a composite state vector.
  Eigen::VectorXd exact_state(const FineMesh& fm, double t) const {
    const int n = fm.n_nodes();
    Eigen::VectorXd w(3 * n);
    for (int p = 0; p < n; ++p) {
      const double x = fm.nodes(p, 0), y = fm.nodes(p, 1);
      const Eigen::Vector2d u = u_exact(x, y, t);
      w[p] = u.x();
      w[n + p] = u.y();
      w[2 * n + p] = th_exact(x, y, t);
    }
    return w;
  }
};

}  // namespace cgmsfem
