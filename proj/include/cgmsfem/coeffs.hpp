#pragma once

//! Per-element coefficient fields on the fine mesh: two-phase periodic
//! microstructures, raster images, and truncated Karhunen-Loeve expansions of
//! log-Gaussian fields with separable squared-exponential covariance.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cgmsfem/common.hpp"
#include "cgmsfem/mesh.hpp"

namespace cgmsfem {

//! Elementwise-constant material data for the coupled problem.
struct MaterialField {
  Eigen::VectorXd lambda, mu, kappa, beta;

  int n_elems() const { return static_cast<int>(lambda.size()); }
  void validate() const {
    const auto pos = [](const Eigen::VectorXd& v, const char* name) {
      CGM_REQUIRE_ARG(v.size() > 0 && (v.array() > 0.0).all(),
                      std::string("material field ") + name +
                          " must be strictly positive");
    };
    pos(lambda, "lambda");
    pos(mu, "mu");
    pos(kappa, "kappa");
    pos(beta, "beta");
    CGM_REQUIRE_ARG(mu.size() == lambda.size() && kappa.size() == lambda.size() &&
                        beta.size() == lambda.size(),
                    "material fields must have equal element counts");
  }
};

//! Plane-strain Lame pair from Young's modulus and Poisson ratio.
inline std::pair<double, double> lame_from_young_poisson(double E, double nu) {
  CGM_REQUIRE_ARG(E > 0.0 && nu > -1.0 && nu < 0.5,
                  "lame_from_young_poisson: need E > 0 and nu in (-1, 0.5)");
  const double mu = E / (2.0 * (1.0 + nu));
  const double lambda = E * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  return {lambda, mu};
}

inline Eigen::Vector2d elem_centroid(const FineMesh& fm, int e) {
  return (fm.nodes.row(fm.tris(e, 0)) + fm.nodes.row(fm.tris(e, 1)) +
          fm.nodes.row(fm.tris(e, 2)))
             .transpose() / 3.0;
}

enum class InclusionShape { square, disk };

//! Two-phase periodic field: the unit square is tiled by period x period
//! cells; cells of even parity (ci + cj even) carry a centered inclusion of
//! relative size rel (side for squares, diameter for disks). Elements are
//! classified by centroid: inclusion -> value_max, background -> value_min.
//! With shape = square and rel = 1 this is an exact checkerboard.
inline Eigen::VectorXd periodic_field(const FineMesh& fm, int period,
                                      InclusionShape shape, double rel,
                                      double value_min, double value_max) {
  CGM_REQUIRE_ARG(period >= 1 && fm.nx % period == 0 && fm.ny % period == 0,
                  "periodic_field: period must divide the fine grid");
  CGM_REQUIRE_ARG(rel > 0.0 && rel <= 1.0,
                  "periodic_field: inclusion does not fit its period cell");
  CGM_REQUIRE_ARG(value_min > 0.0 && value_max > 0.0,
                  "periodic_field: values must be positive");
  const double P = 1.0 / period;
  Eigen::VectorXd out(fm.n_elems());
  for (int e = 0; e < fm.n_elems(); ++e) {
    const Eigen::Vector2d c = elem_centroid(fm, e);
    const int ci = std::min(static_cast<int>(c.x() / P), period - 1);
    const int cj = std::min(static_cast<int>(c.y() / P), period - 1);
    bool inside = false;
    if ((ci + cj) % 2 == 0) {
      const double dx = c.x() - (ci + 0.5) * P;
      const double dy = c.y() - (cj + 0.5) * P;
      const double r = 0.5 * rel * P;
      inside = (shape == InclusionShape::square)
                   ? (std::abs(dx) <= r && std::abs(dy) <= r)
                   : (dx * dx + dy * dy <= r * r);
    }
    out[e] = inside ? value_max : value_min;
  }
  return out;
}

//! Raster field: vals(r, c) covers the axis-aligned box with x band c and
//! y band r, r = 0 at the bottom edge. Bands must align with fine cells.
inline Eigen::VectorXd raster_field(const FineMesh& fm,
                                    const Eigen::MatrixXd& vals) {
  const int rows = static_cast<int>(vals.rows());
  const int cols = static_cast<int>(vals.cols());
  CGM_REQUIRE_ARG(rows >= 1 && cols >= 1 && fm.nx % cols == 0 &&
                      fm.ny % rows == 0,
                  "raster_field: raster bands must align with fine cells");
  Eigen::VectorXd out(fm.n_elems());
  for (int e = 0; e < fm.n_elems(); ++e) {
    const Eigen::Vector2d c = elem_centroid(fm, e);
    const int col = std::min(static_cast<int>(c.x() * cols), cols - 1);
    const int row = std::min(static_cast<int>(c.y() * rows), rows - 1);
    out[e] = vals(row, col);
  }
  return out;
}

//! Parses a whitespace-separated numeric matrix. The first file line is the
//! TOP raster row (visual order); rows are flipped so row 0 is the bottom.
inline Eigen::MatrixXd load_raster(const std::string& path) {
  std::ifstream in(path);
  CGM_REQUIRE_ARG(in.good(), "load_raster: cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (!row.empty()) rows.push_back(std::move(row));
  }
  CGM_REQUIRE_ARG(!rows.empty(), "load_raster: empty raster file " + path);
  const std::size_t cols = rows.front().size();
  for (const auto& r : rows)
    CGM_REQUIRE_ARG(r.size() == cols, "load_raster: ragged raster rows");
  Eigen::MatrixXd m(rows.size(), cols);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < cols; ++c)
      m(static_cast<int>(rows.size() - 1 - r), static_cast<int>(c)) = rows[r][c];
  return m;
}

//! Seeded two-phase random raster: each pixel is value_max with probability
//! fill, else value_min. One draw per pixel in row-major order.
inline Eigen::MatrixXd random_raster(int rows, int cols, double fill,
                                     double value_min, double value_max,
                                     std::uint64_t seed) {
  CGM_REQUIRE_ARG(rows >= 1 && cols >= 1 && fill >= 0.0 && fill <= 1.0,
                  "random_raster: bad arguments");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m(r, c) = U(rng) < fill ? value_max : value_min;
  return m;
}

// ---------------------------------------------------------------------------
// Karhunen-Loeve expansion of a log-Gaussian field with covariance
// sigma^2 exp(-|x1-x2|^2 / l^2), discretized at element centroids. The kernel
// separates per axis, so the 2D eigenpairs are products of 1D eigenpairs of
// the kernels on the distinct centroid coordinates (2 nx and 2 ny values).
// ---------------------------------------------------------------------------

struct KleSpec {
  double corr_len = 0.1;  // l
  double sigma = 1.0;     // std of the log field before truncation
  double b0 = 0.0;        // log-field mean
  int m = 20;             // retained modes
};

struct Kle1d {
  Eigen::VectorXd coords;
  Eigen::VectorXd lambda;  // descending
  Eigen::MatrixXd phi;     // column k = eigenvector k, unit 2-norm
};

struct KleBasis {
  Kle1d x, y;
  Eigen::VectorXd lambda;               // product eigenvalues, descending,
                                        // sigma^2 included
  std::vector<std::pair<int, int>> mode;  // (x mode, y mode) per product
  Eigen::VectorXi exi, eyi;             // per-element coordinate indices
  double b0 = 0.0;

  int n_modes() const { return static_cast<int>(lambda.size()); }
  //! phi_k at the centroid of element e.
  double eval(int k, int e) const {
    return x.phi(exi[e], mode[k].first) * y.phi(eyi[e], mode[k].second);
  }
  //! Pointwise variance of the truncated log field at element e.
  double truncated_variance(int e) const {
    double s = 0.0;
    for (int k = 0; k < n_modes(); ++k) {
      const double p = eval(k, e);
      s += lambda[k] * p * p;
    }
    return s;
  }
};

namespace detail {

//! Distinct sorted centroid coordinates along one axis: (i+1/3)/n, (i+2/3)/n.
inline Eigen::VectorXd centroid_coords_1d(int n) {
  Eigen::VectorXd c(2 * n);
  for (int i = 0; i < n; ++i) {
    c[2 * i] = (i + 1.0 / 3.0) / n;
    c[2 * i + 1] = (i + 2.0 / 3.0) / n;
  }
  return c;
}

inline Kle1d kle_eig_1d(const Eigen::VectorXd& coords, double corr_len) {
  const int n = static_cast<int>(coords.size());
  Eigen::MatrixXd K(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const double d = coords[a] - coords[b];
      K(a, b) = std::exp(-d * d / (corr_len * corr_len));
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(K);
  CGM_REQUIRE(es.info() == Eigen::Success, "kle: 1d eigensolve failed");
  Kle1d out;
  out.coords = coords;
  out.lambda.resize(n);
  out.phi.resize(n, n);
  for (int k = 0; k < n; ++k) {  // flip to descending order
    out.lambda[k] = es.eigenvalues()[n - 1 - k];
    out.phi.col(k) = es.eigenvectors().col(n - 1 - k);
    int imax = 0;
    double vmax = 0.0;
    for (int i = 0; i < n; ++i)
      if (std::abs(out.phi(i, k)) > vmax) {
        vmax = std::abs(out.phi(i, k));
        imax = i;
      }
    if (out.phi(imax, k) < 0.0) out.phi.col(k) = -out.phi.col(k);  // fixed sign
  }
  return out;
}

}  // namespace detail

inline KleBasis build_kle_basis(const FineMesh& fm, const KleSpec& spec) {
  CGM_REQUIRE_ARG(spec.corr_len > 0.0 && spec.sigma >= 0.0 && spec.m >= 1,
                  "kle: need corr_len > 0, sigma >= 0, m >= 1");
  const int total = 4 * fm.nx * fm.ny;
  CGM_REQUIRE_ARG(spec.m <= total,
                  "kle: truncation exceeds the available tensor modes");
  KleBasis B;
  B.b0 = spec.b0;
  B.x = detail::kle_eig_1d(detail::centroid_coords_1d(fm.nx), spec.corr_len);
  B.y = detail::kle_eig_1d(detail::centroid_coords_1d(fm.ny), spec.corr_len);

  struct Prod {
    double v;
    int kx, ky;
  };
  std::vector<Prod> prods;
  prods.reserve(total);
  for (int kx = 0; kx < B.x.lambda.size(); ++kx)
    for (int ky = 0; ky < B.y.lambda.size(); ++ky)
      prods.push_back({B.x.lambda[kx] * B.y.lambda[ky], kx, ky});
  std::sort(prods.begin(), prods.end(), [](const Prod& a, const Prod& b) {
    if (a.v != b.v) return a.v > b.v;
    if (a.kx != b.kx) return a.kx < b.kx;
    return a.ky < b.ky;
  });
  B.lambda.resize(spec.m);
  B.mode.resize(spec.m);
  const double s2 = spec.sigma * spec.sigma;
  for (int k = 0; k < spec.m; ++k) {
    B.lambda[k] = s2 * prods[k].v;
    B.mode[k] = {prods[k].kx, prods[k].ky};
  }

  B.exi.resize(fm.n_elems());
  B.eyi.resize(fm.n_elems());
  for (int j = 0; j < fm.ny; ++j)
    for (int i = 0; i < fm.nx; ++i) {
      const int e = 2 * (j * fm.nx + i);
      B.exi[e] = 2 * i + 1;      // lower triangle centroid: ((i+2/3)/nx, (j+1/3)/ny)
      B.eyi[e] = 2 * j;
      B.exi[e + 1] = 2 * i;      // upper triangle centroid: ((i+1/3)/nx, (j+2/3)/ny)
      B.eyi[e + 1] = 2 * j + 1;
    }
  return B;
}

//! One realization exp(b0 + sum_k sqrt(lambda_k) xi_k phi_k) at centroids.
//! The same generator state always yields the same field.
inline Eigen::VectorXd sample_kle_field(const KleBasis& basis,
                                        std::mt19937_64& rng) {
  std::normal_distribution<double> N(0.0, 1.0);
  Eigen::VectorXd xi(basis.n_modes());
  for (int k = 0; k < basis.n_modes(); ++k) xi[k] = N(rng);
  const int ne = static_cast<int>(basis.exi.size());
  Eigen::VectorXd g = Eigen::VectorXd::Constant(ne, basis.b0);
  for (int k = 0; k < basis.n_modes(); ++k) {
    const double a = std::sqrt(std::max(0.0, basis.lambda[k])) * xi[k];
    if (a == 0.0) continue;
    for (int e = 0; e < ne; ++e) g[e] += a * basis.eval(k, e);
  }
  return g.array().exp();
}

inline Eigen::VectorXd sample_kle_field(const FineMesh& fm, const KleSpec& spec,
                                        std::uint64_t seed) {
  const KleBasis basis = build_kle_basis(fm, spec);
  std::mt19937_64 rng(seed);
  return sample_kle_field(basis, rng);
}

//! splitmix64 step; used to derive independent per-field/per-sample seeds.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace cgmsfem
