#include <catch2/catch_amalgamated.hpp>
#include <cstdio>
#include <fstream>
#include <random>

#include "cgmsfem/coeffs.hpp"
#include "cgmsfem/mesh.hpp"

using namespace cgmsfem;

namespace {
double phase_area(const FineMesh& fm, const Eigen::VectorXd& field,
                  double value) {
  double a = 0.0;
  for (int e = 0; e < fm.n_elems(); ++e)
    if (field[e] == value) a += fm.elem_geom(e).area;
  return a;
}
}  // namespace

TEST_CASE("degenerate periodic field is constant", "[coeffs]") {
  const MeshPair mp = build_mesh_pair(8, 8, 2, 2);
  const Eigen::VectorXd f =
      periodic_field(mp.fine, 4, InclusionShape::square, 0.5, 3.0, 3.0);
  CHECK(f.minCoeff() == 3.0);
  CHECK(f.maxCoeff() == 3.0);
}

TEST_CASE("periodic field realizes the requested contrast exactly", "[coeffs]") {
  const MeshPair mp = build_mesh_pair(32, 32, 4, 4);
  const Eigen::VectorXd f =
      periodic_field(mp.fine, 4, InclusionShape::square, 0.5, 1.0, 1.0e4);
  CHECK(f.minCoeff() == 1.0);
  CHECK(f.maxCoeff() == 1.0e4);
  CHECK(std::abs(f.maxCoeff() / f.minCoeff() - 1.0e4) < 1e-10);
}

TEST_CASE("periodic inclusions cover the analytic area fraction", "[coeffs]") {
  SECTION("aligned squares are exact") {
    const MeshPair mp = build_mesh_pair(64, 64, 4, 4);
    const Eigen::VectorXd f =
        periodic_field(mp.fine, 2, InclusionShape::square, 0.5, 1.0, 10.0);
    // Two even-parity cells of four, each with a (0.5 * 0.5)^2 inclusion.
    CHECK(phase_area(mp.fine, f, 10.0) == Catch::Approx(0.125).epsilon(1e-12));
  }
  SECTION("disks match within rasterization error") {
    const MeshPair mp = build_mesh_pair(128, 128, 4, 4);
    const Eigen::VectorXd f =
        periodic_field(mp.fine, 2, InclusionShape::disk, 0.5, 1.0, 10.0);
    const double analytic = 2.0 * M_PI * 0.125 * 0.125;
    CHECK(phase_area(mp.fine, f, 10.0) ==
          Catch::Approx(analytic).epsilon(0.02));
  }
}

TEST_CASE("periodic field validates its geometry", "[coeffs]") {
  const MeshPair mp = build_mesh_pair(8, 8, 2, 2);
  CHECK_THROWS_AS(
      periodic_field(mp.fine, 3, InclusionShape::square, 0.5, 1.0, 2.0),
      std::invalid_argument);  // period does not divide the grid
  CHECK_THROWS_AS(
      periodic_field(mp.fine, 4, InclusionShape::square, 1.5, 1.0, 2.0),
      std::invalid_argument);  // inclusion larger than its cell
}

TEST_CASE("raster fields map pixels onto cells", "[coeffs]") {
  const MeshPair mp = build_mesh_pair(2, 2, 1, 1);
  SECTION("single pixel is constant") {
    Eigen::MatrixXd vals(1, 1);
    vals << 4.25;
    const Eigen::VectorXd f = raster_field(mp.fine, vals);
    CHECK(f.minCoeff() == 4.25);
    CHECK(f.maxCoeff() == 4.25);
  }
  SECTION("2x2 raster on a 2x2 mesh hits each cell") {
    Eigen::MatrixXd vals(2, 2);
    vals << 1, 2,   // bottom row: y in (0, 1/2)
            3, 4;   // top row
    const Eigen::VectorXd f = raster_field(mp.fine, vals);
    CHECK(f[0] == 1.0);  // cell (0,0), both halves
    CHECK(f[1] == 1.0);
    CHECK(f[2] == 2.0);  // cell (1,0)
    CHECK(f[4] == 3.0);  // cell (0,1)
    CHECK(f[6] == 4.0);  // cell (1,1)
  }
  SECTION("misaligned raster is rejected") {
    CHECK_THROWS_AS(raster_field(mp.fine, Eigen::MatrixXd::Ones(3, 2)),
                    std::invalid_argument);
  }
}

TEST_CASE("raster files are read in visual order", "[coeffs]") {
  const std::string path = "raster_tmp_test.txt";
  {
    std::ofstream out(path);
    out << "5 6\n7 8\n";
  }
  const Eigen::MatrixXd m = load_raster(path);
  std::remove(path.c_str());
  REQUIRE(m.rows() == 2);
  CHECK(m(1, 0) == 5.0);  // first file line is the top band
  CHECK(m(0, 0) == 7.0);
  CHECK(m(0, 1) == 8.0);
}

TEST_CASE("checkerboard raster equals the full-size periodic inclusions",
          "[coeffs]") {
  const MeshPair mp = build_mesh_pair(16, 16, 4, 4);
  const double lo = 2.0, hi = 9.0;
  const Eigen::VectorXd per =
      periodic_field(mp.fine, 4, InclusionShape::square, 1.0, lo, hi);
  Eigen::MatrixXd board(4, 4);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) board(r, c) = ((r + c) % 2 == 0) ? hi : lo;
  const Eigen::VectorXd ras = raster_field(mp.fine, board);
  CHECK((per - ras).lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("random raster is seeded and two-valued", "[coeffs]") {
  const Eigen::MatrixXd a = random_raster(6, 6, 0.4, 1.0, 5.0, 42);
  const Eigen::MatrixXd b = random_raster(6, 6, 0.4, 1.0, 5.0, 42);
  const Eigen::MatrixXd c = random_raster(6, 6, 0.4, 1.0, 5.0, 43);
  CHECK(a == b);
  CHECK(a != c);
  for (int r = 0; r < 6; ++r)
    for (int col = 0; col < 6; ++col)
      CHECK((a(r, col) == 1.0 || a(r, col) == 5.0));
}

TEST_CASE("lame conversion matches the closed form", "[coeffs]") {
  const auto [lambda, mu] = lame_from_young_poisson(1.0, 0.25);
  CHECK(mu == Catch::Approx(0.4));
  CHECK(lambda == Catch::Approx(0.4));
  CHECK_THROWS_AS(lame_from_young_poisson(1.0, 0.5), std::invalid_argument);
}

TEST_CASE("kle tensor eigenvalues match a dense covariance eigensolve",
          "[coeffs]") {
  // 6x6 cells give a 12x12 grid of distinct centroid coordinates.
  const MeshPair mp = build_mesh_pair(6, 6, 2, 2);
  KleSpec spec;
  spec.corr_len = 0.3;
  spec.sigma = 1.7;
  spec.m = 10;
  const KleBasis basis = build_kle_basis(mp.fine, spec);

  const Eigen::VectorXd cx = detail::centroid_coords_1d(6);
  const int n = 12 * 12;
  Eigen::MatrixXd C(n, n);
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const Eigen::Vector2d pa(cx[a % 12], cx[a / 12]);
      const Eigen::Vector2d pb(cx[b % 12], cx[b / 12]);
      C(a, b) = spec.sigma * spec.sigma *
                std::exp(-(pa - pb).squaredNorm() /
                         (spec.corr_len * spec.corr_len));
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  REQUIRE(es.info() == Eigen::Success);
  for (int k = 0; k < 10; ++k) {
    const double dense = es.eigenvalues()[n - 1 - k];
    CHECK(std::abs(basis.lambda[k] - dense) <= 1e-8 * std::abs(dense));
  }
}

TEST_CASE("kle sampling is deterministic in the seed", "[coeffs]") {
  const MeshPair mp = build_mesh_pair(8, 8, 2, 2);
  KleSpec spec;
  spec.corr_len = 0.2;
  spec.sigma = 1.0;
  spec.m = 12;
  const Eigen::VectorXd a = sample_kle_field(mp.fine, spec, 777);
  const Eigen::VectorXd b = sample_kle_field(mp.fine, spec, 777);
  const Eigen::VectorXd c = sample_kle_field(mp.fine, spec, 778);
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0);
  CHECK(a != c);
  CHECK((a.array() > 0.0).all());
}

TEST_CASE("kle with zero variance is exactly exp(b0)", "[coeffs]") {
  const MeshPair mp = build_mesh_pair(4, 4, 2, 2);
  KleSpec spec;
  spec.corr_len = 0.2;
  spec.sigma = 0.0;
  spec.b0 = 1.25;
  spec.m = 5;
  const Eigen::VectorXd f = sample_kle_field(mp.fine, spec, 11);
  for (int e = 0; e < f.size(); ++e) CHECK(f[e] == std::exp(1.25));
}

TEST_CASE("kle truncation cannot exceed the tensor mode count", "[coeffs]") {
  const MeshPair mp = build_mesh_pair(2, 2, 1, 1);
  KleSpec spec;
  spec.m = 17;  // 4 * nx * ny = 16 available
  CHECK_THROWS_AS(build_kle_basis(mp.fine, spec), std::invalid_argument);
}

TEST_CASE("kle sample moments match the truncated covariance", "[coeffs]") {
  const MeshPair mp = build_mesh_pair(4, 4, 2, 2);
  KleSpec spec;
  spec.corr_len = 0.5;
  spec.sigma = 0.8;
  spec.m = 20;
  const KleBasis basis = build_kle_basis(mp.fine, spec);
  const int n_samples = 2000;
  const int probes[3] = {0, 13, 25};
  Eigen::MatrixXd logs(n_samples, 3);
  std::mt19937_64 rng(2024);
  for (int s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd f = sample_kle_field(basis, rng);
    for (int p = 0; p < 3; ++p) logs(s, p) = std::log(f[probes[p]]);
  }
  for (int p = 0; p < 3; ++p) {
    const double mean = logs.col(p).mean();
    const Eigen::ArrayXd d = logs.col(p).array() - mean;
    const double var = d.square().sum() / (n_samples - 1);
    const double m3 = d.cube().sum() / n_samples;
    const double skew = m3 / std::pow(d.square().sum() / n_samples, 1.5);
    CHECK(var == Catch::Approx(basis.truncated_variance(probes[p])).epsilon(0.10));
    CHECK(std::abs(skew) < 0.15);
  }
}

TEST_CASE("material validation rejects nonpositive fields", "[coeffs]") {
  MaterialField m;
  m.lambda = Eigen::VectorXd::Ones(4);
  m.mu = Eigen::VectorXd::Ones(4);
  m.kappa = Eigen::VectorXd::Ones(4);
  m.beta = Eigen::VectorXd::Ones(4);
  CHECK_NOTHROW(m.validate());
  m.kappa[2] = 0.0;
  CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}
