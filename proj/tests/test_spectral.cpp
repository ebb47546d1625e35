#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Eigenvalues>
#include <cstring>
#include <set>

#include "cgmsfem/coeffs.hpp"
#include "cgmsfem/spectral.hpp"

using namespace cgmsfem;

namespace {

MaterialField contrast_material(const FineMesh& fm) {
  MaterialField mat;
  mat.lambda = periodic_field(fm, 2, InclusionShape::square, 1.0, 1.0, 10.0);
  mat.mu = periodic_field(fm, 2, InclusionShape::square, 1.0, 0.5, 5.0);
  mat.kappa = periodic_field(fm, 2, InclusionShape::square, 1.0, 0.1, 10.0);
  mat.beta = periodic_field(fm, 2, InclusionShape::square, 1.0, 0.2, 2.0);
  return mat;
}

MaterialField constant_material(const FineMesh& fm) {
  MaterialField mat;
  mat.lambda = Eigen::VectorXd::Constant(fm.n_elems(), 1.0);
  mat.mu = Eigen::VectorXd::Constant(fm.n_elems(), 0.8);
  mat.kappa = Eigen::VectorXd::Constant(fm.n_elems(), 2.0);
  mat.beta = Eigen::VectorXd::Constant(fm.n_elems(), 0.5);
  return mat;
}

double spectrum_scale(const PatchSpectrum& S) {
  return S.lambda_raw.cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("diagonal pencil toy problem", "[spectral]") {
  Eigen::MatrixXd A = Eigen::Vector2d(2.0, 8.0).asDiagonal();
  Eigen::MatrixXd M = Eigen::Vector2d(1.0, 2.0).asDiagonal();
  SpectralConfig cfg;
  cfg.n_keep = 2;
  cfg.H = 0.5;
  const PatchSpectrum S = solve_pencil(A, M, cfg);
  REQUIRE(S.dim == 2);
  REQUIRE(S.n_selected() == 2);
  CHECK(S.lambda_raw[0].real() == Catch::Approx(2.0).margin(1e-12));
  CHECK(S.lambda_raw[1].real() == Catch::Approx(4.0).margin(1e-12));
  CHECK(S.lambda_raw[0].imag() == 0.0);
  CHECK(S.reported(0) == Catch::Approx(0.5).margin(1e-12));
  CHECK(S.reported(1) == Catch::Approx(1.0).margin(1e-12));
  // M-normalized eigenvectors of a diagonal pencil, sign-fixed positive.
  CHECK(S.vectors(0, 0) == Catch::Approx(1.0).margin(1e-12));
  CHECK(std::abs(S.vectors(1, 0)) < 1e-12);
  CHECK(std::abs(S.vectors(0, 1)) < 1e-12);
  CHECK(S.vectors(1, 1) == Catch::Approx(1.0 / std::sqrt(2.0)).margin(1e-12));
}

TEST_CASE("pencil eigenvalues match a QZ reference", "[spectral]") {
  const MeshPair mp = build_mesh_pair(2, 2, 1, 1);
  const MaterialField mat = contrast_material(mp.fine);
  const OperatorBlocks B =
      assemble_patch_blocks(mp.fine, mat, mp.coarse.patches[0]);
  SpectralConfig cfg;
  cfg.gamma1 = 0.4;
  cfg.gamma2 = 0.04;
  cfg.n_keep = 6;
  cfg.H = 1.0;
  Eigen::MatrixXd A, M;
  dense_pencil(B, cfg.gamma1, cfg.gamma2, A, M);
  const PatchSpectrum S = solve_pencil(A, M, cfg);

  Eigen::GeneralizedEigenSolver<Eigen::MatrixXd> qz(A, M);
  REQUIRE(qz.info() == Eigen::Success);
  Eigen::VectorXcd ref = qz.eigenvalues();

  const int n = S.dim;
  REQUIRE(ref.size() == n);
  Eigen::VectorXd re1 = S.lambda_raw.real(), re2 = ref.real();
  Eigen::VectorXd im1 = S.lambda_raw.imag().cwiseAbs(),
                  im2 = ref.imag().cwiseAbs();
  std::sort(re1.data(), re1.data() + n);
  std::sort(re2.data(), re2.data() + n);
  std::sort(im1.data(), im1.data() + n);
  std::sort(im2.data(), im2.data() + n);
  const double scale = re1.cwiseAbs().maxCoeff();
  CHECK((re1 - re2).cwiseAbs().maxCoeff() < 1e-8 * scale);
  CHECK((im1 - im2).cwiseAbs().maxCoeff() < 1e-8 * scale);
}

TEST_CASE("patch kernels hold exactly the rigid displacements", "[spectral]") {
  const MeshPair mp = build_mesh_pair(8, 8, 2, 2);
  const MaterialField mat = contrast_material(mp.fine);
  SpectralConfig cfg;
  cfg.gamma1 = 0.4;
  cfg.gamma2 = 0.04;
  cfg.n_keep = 4;
  cfg.H = 0.5;
  for (const Patch& pa : mp.coarse.patches) {
    const OperatorBlocks B = assemble_patch_blocks(mp.fine, mat, pa);
    const PatchSpectrum S = solve_patch_spectrum(B, cfg);
    const double scale = spectrum_scale(S);
    int n_zero = 0;
    for (int i = 0; i < S.dim; ++i)
      if (std::abs(S.lambda_raw[i].real()) <= 1e-8 * scale) ++n_zero;
    CHECK(n_zero == 3);
    // Sorted ascending by real part, so the kernel occupies the front.
    CHECK(std::abs(S.lambda_raw[2].real()) <= 1e-8 * scale);
    CHECK(S.lambda_raw[3].real() > 1e-8 * scale);
  }
}

TEST_CASE("antisymmetric coupling keeps the spectrum real and modes "
          "M-orthonormal",
          "[spectral]") {
  const MeshPair mp = build_mesh_pair(4, 4, 2, 2);
  const MaterialField mat = contrast_material(mp.fine);
  const OperatorBlocks B =
      assemble_patch_blocks(mp.fine, mat, mp.coarse.patches[4]);
  SpectralConfig cfg;
  cfg.gamma1 = 0.3;
  cfg.gamma2 = -0.3;
  cfg.n_keep = 8;
  cfg.H = 0.5;
  Eigen::MatrixXd A, M;
  dense_pencil(B, cfg.gamma1, cfg.gamma2, A, M);
  CHECK((A - A.transpose()).cwiseAbs().maxCoeff() < 1e-14);
  const PatchSpectrum S = solve_pencil(A, M, cfg);
  const double scale = spectrum_scale(S);
  CHECK(S.lambda_raw.imag().cwiseAbs().maxCoeff() <= 1e-9 * scale);
  CHECK(S.max_imag_selected <= 1e-9 * scale);
  const Eigen::MatrixXd G = S.vectors.transpose() * M * S.vectors;
  CHECK((G - Eigen::MatrixXd::Identity(8, 8)).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("mass scaling leaves the selected span unchanged", "[spectral]") {
  const MeshPair mp = build_mesh_pair(4, 4, 2, 2);
  const MaterialField mat = contrast_material(mp.fine);
  const OperatorBlocks B =
      assemble_patch_blocks(mp.fine, mat, mp.coarse.patches[4]);
  SpectralConfig cfg;
  cfg.gamma1 = 0.4;
  cfg.gamma2 = 0.04;
  cfg.n_keep = 6;
  cfg.H = 0.5;
  Eigen::MatrixXd A, M;
  dense_pencil(B, cfg.gamma1, cfg.gamma2, A, M);
  const PatchSpectrum S1 = solve_pencil(A, M, cfg);
  const Eigen::MatrixXd Ms = 3.7 * M;
  const PatchSpectrum S2 = solve_pencil(A, Ms, cfg);
  const double scale = spectrum_scale(S1);
  for (int i = 0; i < 10; ++i)
    CHECK(std::abs(S2.lambda_raw[i].real() * 3.7 - S1.lambda_raw[i].real()) <
          1e-9 * scale);
  REQUIRE(S1.rank == S2.rank);
  CHECK(subspace_angle_sin(S1.vectors, S2.vectors) < 1e-8);
}

TEST_CASE("zero coupling reproduces the decoupled block spectra",
          "[spectral]") {
  const MeshPair mp = build_mesh_pair(4, 4, 2, 2);
  const MaterialField mat = contrast_material(mp.fine);
  const OperatorBlocks B =
      assemble_patch_blocks(mp.fine, mat, mp.coarse.patches[4]);
  SpectralConfig cfg;
  cfg.n_keep = 6;
  cfg.H = 0.5;
  const PatchSpectrum Sc = solve_patch_spectrum(B, cfg);

  Eigen::MatrixXd Au(B.A1), Mu(B.M1), At(B.A4), Mt(B.M2);
  Eigen::VectorXd wu, wt;
  detail::dsygv_inplace(Au, Mu, wu);
  detail::dsygv_inplace(At, Mt, wt);
  int iu = 0, it = 0;
  for (int s = 0; s < cfg.n_keep; ++s) {
    if (it >= wt.size() || (iu < wu.size() && wu[iu] <= wt[it]))
      ++iu;
    else
      ++it;
  }
  const PatchSpectrum Sd = solve_patch_spectrum_decoupled(B, cfg, iu, it);

  const double scale = spectrum_scale(Sc);
  for (int i = 0; i < cfg.n_keep; ++i)
    CHECK(std::abs(Sc.lambda_raw[i].real() - Sd.lambda_raw[i].real()) <
          1e-8 * scale);
  CHECK(subspace_angle_sin(Sc.vectors, Sd.vectors) < 1e-8);
}

TEST_CASE("unit partition weights reproduce the patch modes", "[spectral]") {
  const MeshPair mp = build_mesh_pair(2, 2, 1, 1);
  const MaterialField mat = contrast_material(mp.fine);
  SpectralConfig cfg;
  cfg.gamma1 = 0.4;
  cfg.gamma2 = 0.04;
  cfg.H = 1.0;
  std::vector<PatchSpectrum> spectra;
  for (int v = 0; v < 4; ++v) {
    const OperatorBlocks B =
        assemble_patch_blocks(mp.fine, mat, mp.coarse.patches[v]);
    cfg.n_keep = v == 0 ? 5 : 0;
    spectra.push_back(solve_patch_spectrum(B, cfg));
  }
  PartitionOfUnity pou;
  pou.kind = PouKind::bilinear;
  pou.chi.resize(4);
  pou.chi[0] = Eigen::VectorXd::Ones(mp.coarse.patches[0].n_nodes());
  for (int v = 1; v < 4; ++v)
    pou.chi[v] = Eigen::VectorXd::Zero(mp.coarse.patches[v].n_nodes());
  const DofMap dm = make_dof_map(mp.fine);
  const MultiscaleBasis basis =
      build_multiscale_basis(mp, pou, dm, spectra);

  REQUIRE(basis.n_cols() == 5);
  CHECK(basis.dropped_small == 0);
  const Patch& pa = mp.coarse.patches[0];
  const int m = pa.n_nodes();
  const Eigen::MatrixXd D(basis.R);
  for (int c = 0; c < 5; ++c) {
    CHECK(basis.col_patch[c] == 0);
    CHECK(basis.col_rank[c] == c);
    Eigen::VectorXd expected = Eigen::VectorXd::Zero(dm.n_dofs());
    for (int k = 0; k < m; ++k) {
      const int p = pa.nodes[k];
      if (!dm.fixed(dm.u1(p))) expected[dm.u1(p)] = spectra[0].vectors(k, c);
      if (!dm.fixed(dm.u2(p)))
        expected[dm.u2(p)] = spectra[0].vectors(m + k, c);
      if (!dm.fixed(dm.th(p)))
        expected[dm.th(p)] = spectra[0].vectors(2 * m + k, c);
    }
    CHECK((D.col(c) - expected).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("basis columns stay inside their patch", "[spectral]") {
  const MeshPair mp = build_mesh_pair(8, 8, 4, 4);
  const MaterialField mat = contrast_material(mp.fine);
  SpectralConfig cfg;
  cfg.gamma1 = 0.4;
  cfg.gamma2 = 0.04;
  cfg.n_keep = 3;
  cfg.H = 0.25;
  std::vector<PatchSpectrum> spectra;
  for (const Patch& pa : mp.coarse.patches)
    spectra.push_back(
        solve_patch_spectrum(assemble_patch_blocks(mp.fine, mat, pa), cfg));
  const PartitionOfUnity pou = build_partition_of_unity(mp, PouKind::bilinear);
  const DofMap dm = make_dof_map(mp.fine);
  const MultiscaleBasis basis = build_multiscale_basis(mp, pou, dm, spectra);

  CHECK(basis.dropped_small == 0);
  REQUIRE(basis.n_cols() == 25 * 3);
  for (int c = 0; c < basis.n_cols(); ++c) {
    const Patch& pa = mp.coarse.patches[basis.col_patch[c]];
    std::set<int> allowed;
    for (int p : pa.nodes) {
      allowed.insert(dm.u1(p));
      allowed.insert(dm.u2(p));
      allowed.insert(dm.th(p));
    }
    int nnz = 0;
    for (SpMat::InnerIterator it(basis.R, c); it; ++it) {
      CHECK(allowed.count(static_cast<int>(it.row())) == 1);
      ++nnz;
    }
    CHECK(nnz > 0);
  }
}

TEST_CASE("decoupled modes keep their block and start from the constant",
          "[spectral]") {
  const MeshPair mp = build_mesh_pair(4, 4, 2, 2);
  const MaterialField mat = constant_material(mp.fine);
  const OperatorBlocks B =
      assemble_patch_blocks(mp.fine, mat, mp.coarse.patches[4]);
  SpectralConfig cfg;
  cfg.H = 0.5;
  const PatchSpectrum S = solve_patch_spectrum_decoupled(B, cfg, 2, 2);
  const int m = B.n;
  REQUIRE(S.n_selected() == 4);
  CHECK(S.kind == std::vector<char>({'u', 'u', 't', 't'}));
  CHECK(S.rank == std::vector<int>({0, 1, 0, 1}));
  CHECK(S.vectors.col(0).tail(m).cwiseAbs().maxCoeff() == 0.0);
  CHECK(S.vectors.col(1).tail(m).cwiseAbs().maxCoeff() == 0.0);
  CHECK(S.vectors.col(2).head(2 * m).cwiseAbs().maxCoeff() == 0.0);
  CHECK(S.vectors.col(3).head(2 * m).cwiseAbs().maxCoeff() == 0.0);
  // Pure Neumann heat block with constant conductivity: first mode constant.
  const Eigen::VectorXd th = S.vectors.col(2).tail(m);
  CHECK((th.maxCoeff() - th.minCoeff()) < 1e-10 * std::abs(th.mean()));
  // Kernel of the merged spectrum: three rigid modes plus the constant.
  const double scale = spectrum_scale(S);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(S.lambda_raw[i].real()) <= 1e-8 * scale);
  CHECK(S.lambda_raw[4].real() > 1e-8 * scale);
}

TEST_CASE("patch spectra are reproducible", "[spectral]") {
  const MeshPair mp = build_mesh_pair(4, 4, 2, 2);
  const MaterialField mat = contrast_material(mp.fine);
  const OperatorBlocks B =
      assemble_patch_blocks(mp.fine, mat, mp.coarse.patches[4]);
  SpectralConfig cfg;
  cfg.gamma1 = 0.4;
  cfg.gamma2 = 0.04;
  cfg.n_keep = 6;
  cfg.H = 0.5;
  const PatchSpectrum S1 = solve_patch_spectrum(B, cfg);
  const PatchSpectrum S2 = solve_patch_spectrum(B, cfg);
  REQUIRE(S1.lambda_raw.size() == S2.lambda_raw.size());
  CHECK(std::memcmp(S1.lambda_raw.data(), S2.lambda_raw.data(),
                    sizeof(std::complex<double>) * S1.lambda_raw.size()) == 0);
  REQUIRE(S1.vectors.cols() == S2.vectors.cols());
  CHECK(std::memcmp(S1.vectors.data(), S2.vectors.data(),
                    sizeof(double) * S1.vectors.size()) == 0);
}

TEST_CASE("eigenvalues come out sorted ascending", "[spectral]") {
  const MeshPair mp = build_mesh_pair(4, 4, 2, 2);
  const MaterialField mat = contrast_material(mp.fine);
  const OperatorBlocks B =
      assemble_patch_blocks(mp.fine, mat, mp.coarse.patches[4]);
  SpectralConfig cfg;
  cfg.gamma1 = 0.4;
  cfg.gamma2 = 0.04;
  cfg.n_keep = 6;
  cfg.H = 0.5;
  const PatchSpectrum S = solve_patch_spectrum(B, cfg);
  for (int i = 0; i + 1 < S.dim; ++i) {
    CHECK(S.lambda_raw[i].real() <= S.lambda_raw[i + 1].real());
    CHECK(S.reported(i) <= S.reported(i + 1));
  }
  CHECK(S.reported(S.dim - 1) ==
        Catch::Approx(0.25 * S.lambda_raw[S.dim - 1].real()));
}

TEST_CASE("rank filtering trims an overcomplete basis", "[spectral]") {
  const MeshPair mp = build_mesh_pair(2, 2, 1, 1);
  const MaterialField mat = contrast_material(mp.fine);
  SpectralConfig cfg;
  cfg.gamma1 = 0.4;
  cfg.gamma2 = 0.04;
  cfg.n_keep = 27;  // entire pencil of every patch
  cfg.H = 1.0;
  std::vector<PatchSpectrum> spectra;
  for (const Patch& pa : mp.coarse.patches)
    spectra.push_back(
        solve_patch_spectrum(assemble_patch_blocks(mp.fine, mat, pa), cfg));
  const PartitionOfUnity pou = build_partition_of_unity(mp, PouKind::bilinear);
  const DofMap dm = make_dof_map(mp.fine);

  BasisOptions opt;
  opt.rank_drop = true;
  const MultiscaleBasis basis = build_multiscale_basis(mp, pou, dm, spectra, opt);
  REQUIRE(basis.n_cols() == dm.n_free);
  CHECK(basis.dropped_rank > 0);
  const Eigen::MatrixXd G =
      Eigen::MatrixXd(basis.R).transpose() * Eigen::MatrixXd(basis.R);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G);
  CHECK(es.eigenvalues().minCoeff() > 1e-12);
  CHECK(static_cast<int>(basis.col_patch.size()) == basis.n_cols());
  CHECK(static_cast<int>(basis.col_rank.size()) == basis.n_cols());
}
