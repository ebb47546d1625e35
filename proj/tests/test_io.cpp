#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cgmsfem/experiment.hpp"
#include "cgmsfem/verify.hpp"

using namespace cgmsfem;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  const fs::path dir = fs::temp_directory_path() / ("cgmsfem_" + tag);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

Eigen::VectorXd random_state(int size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::VectorXd w(size);
  for (int i = 0; i < size; ++i) w[i] = gauss(rng);
  return w;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

//! results.csv content with the wall_ms column blanked, for determinism
//! comparisons across reruns.
std::string strip_wall_column(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  while (std::getline(in, line)) {
    const std::size_t cut = line.rfind(',');
    out << line.substr(0, cut) << "\n";
  }
  return out.str();
}

ExperimentConfig tiny_two_phase_config() {
  ExperimentConfig cfg;
  cfg.experiment_id = "tiny";
  cfg.nx = cfg.ny = 8;
  cfg.Nx = cfg.Ny = 2;
  cfg.medium = "periodic";
  cfg.period = 4;
  cfg.inclusion_rel = 1.0;
  cfg.lambda_v = {1.0, 10.0};
  cfg.mu_v = {0.4, 4.0};
  cfg.kappa_v = {0.1, 10.0};
  cfg.beta_v = {0.1, 1.0};
  cfg.gamma1 = 0.4;
  cfg.gamma2 = 0.04;
  cfg.L_values = {2, 3};
  cfg.tau = 0.1;
  cfg.n_steps = 2;
  cfg.g_source = "gaussian-bump";
  cfg.store = "final";
  return cfg;
}

}  // namespace

TEST_CASE("state files round trip losslessly", "[io]") {
  const MeshPair mp = build_mesh_pair(3, 2, 1, 1);
  const FineMesh& fm = mp.fine;
  const Eigen::VectorXd w = random_state(3 * fm.n_nodes(), 77);
  const fs::path dir = temp_dir("vtk_roundtrip");
  const std::string path = (dir / "state.vtk").string();
  write_vtk_state(path, fm, w, "roundtrip");

  const VtkState back = read_vtk_state(path);
  REQUIRE(back.points.rows() == fm.n_nodes());
  REQUIRE(back.tris.rows() == fm.n_elems());
  CHECK(back.points == fm.nodes);
  CHECK(back.tris == fm.tris);
  REQUIRE(back.w.size() == w.size());
  CHECK(back.w == w);  // %.17g output makes the cycle exact
}

TEST_CASE("patch mode files carry the submesh", "[io]") {
  const MeshPair mp = build_mesh_pair(4, 4, 2, 2);
  const Patch& pa = mp.coarse.patches[mp.coarse.vertex_id(1, 1)];
  const Eigen::VectorXd mode = random_state(3 * pa.n_nodes(), 5);
  const fs::path dir = temp_dir("vtk_patch");
  const std::string path = (dir / "mode.vtk").string();
  write_vtk_patch_mode(path, mp.fine, pa, mode);

  const VtkState back = read_vtk_state(path);
  REQUIRE(back.points.rows() == pa.n_nodes());
  REQUIRE(back.tris.rows() == static_cast<int>(pa.elems.size()));
  CHECK(back.w == mode);
  for (int k = 0; k < pa.n_nodes(); ++k)
    CHECK(back.points.row(k) == mp.fine.nodes.row(pa.nodes[k]));
}

TEST_CASE("config json round trips and rejects unknown keys", "[io]") {
  const ExperimentConfig cfg = preset_config("periodic-desk");
  const nlohmann::json j = config_to_json(cfg);
  const ExperimentConfig back = config_from_json(j);
  CHECK(config_to_json(back).dump() == j.dump());

  nlohmann::json bad = j;
  bad["nx_typo"] = 12;
  CHECK_THROWS_AS(config_from_json(bad), std::invalid_argument);

  nlohmann::json wrong = j;
  wrong["medium"] = "granite";
  CHECK_THROWS_AS(config_from_json(wrong), std::invalid_argument);

  nlohmann::json negative = j;
  negative["tau"] = -0.5;
  CHECK_THROWS_AS(config_from_json(negative), std::invalid_argument);
}

TEST_CASE("presets are valid and distinct", "[io]") {
  const std::vector<std::string> names{
      "periodic",          "periodic-desk", "random-inclusions",
      "random-inclusions-desk", "lognormal",     "lognormal-desk"};
  std::vector<std::string> hashes;
  for (const auto& name : names) {
    const ExperimentConfig cfg = preset_config(name);
    CHECK_NOTHROW(cfg.validate());
    const ExperimentConfig back = config_from_json(config_to_json(cfg));
    CHECK(config_to_json(back).dump() == config_to_json(cfg).dump());
    hashes.push_back(config_hash(cfg));
  }
  for (std::size_t a = 0; a < hashes.size(); ++a)
    for (std::size_t b = a + 1; b < hashes.size(); ++b)
      CHECK(hashes[a] != hashes[b]);
  CHECK_THROWS_AS(preset_config("granite"), std::invalid_argument);
}

TEST_CASE("bundled demo configs parse and validate", "[io]") {
  const fs::path dir = fs::path(CGMSFEM_SOURCE_DIR) / "configs";
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() != ".json") continue;
    std::ifstream in(entry.path());
    REQUIRE(in.good());
    const nlohmann::json j = nlohmann::json::parse(in);
    CHECK_NOTHROW(config_from_json(j));
    ++seen;
  }
  CHECK(seen >= 4);
}

TEST_CASE("spectrum truncation takes mode prefixes", "[io]") {
  const MeshPair mp = build_mesh_pair(4, 4, 2, 2);
  MaterialField mat;
  mat.lambda = periodic_field(mp.fine, 2, InclusionShape::square, 1.0, 1.0, 10.0);
  mat.mu = periodic_field(mp.fine, 2, InclusionShape::square, 1.0, 0.5, 5.0);
  mat.kappa = periodic_field(mp.fine, 2, InclusionShape::square, 1.0, 0.1, 10.0);
  mat.beta = periodic_field(mp.fine, 2, InclusionShape::square, 1.0, 0.2, 2.0);
  const Patch& pa = mp.coarse.patches[mp.coarse.vertex_id(1, 1)];
  const OperatorBlocks B = assemble_patch_blocks(mp.fine, mat, pa);

  SpectralConfig cfg;
  cfg.gamma1 = 0.4;
  cfg.gamma2 = 0.04;
  cfg.n_keep = 6;
  const PatchSpectrum S = solve_patch_spectrum(B, cfg);
  const PatchSpectrum T = truncate_coupled(S, 4);
  REQUIRE(T.n_selected() == 4);
  CHECK(T.vectors == S.vectors.leftCols(4));
  CHECK(T.lambda_raw == S.lambda_raw);
  CHECK(T.rank == std::vector<int>(S.rank.begin(), S.rank.begin() + 4));

  const PatchSpectrum D = solve_patch_spectrum_decoupled(B, cfg, 4, 3);
  const PatchSpectrum Dt = truncate_decoupled(D, 2, 1);
  REQUIRE(Dt.n_selected() == 3);
  CHECK(Dt.kind == std::vector<char>{'u', 'u', 't'});
  CHECK(Dt.vectors.col(0) == D.vectors.col(0));
  CHECK(Dt.vectors.col(1) == D.vectors.col(1));
  CHECK(Dt.vectors.col(2) == D.vectors.col(4));
  CHECK_THROWS_AS(truncate_decoupled(D, 5, 0), std::invalid_argument);
  CHECK_THROWS_AS(truncate_coupled(S, 7), std::invalid_argument);
}

TEST_CASE("sweep expansion applies the axes", "[io]") {
  ExperimentConfig cfg = tiny_two_phase_config();
  cfg.beta_contrast_values = {10.0, 100.0};
  const std::vector<SweepPoint> pts = expand_sweep(cfg);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].cfg.experiment_id == "tiny-b10");
  CHECK(pts[1].cfg.experiment_id == "tiny-b100");
  CHECK(pts[0].cfg.beta_v[1] == Catch::Approx(1.0));
  CHECK(pts[1].cfg.beta_v[1] == Catch::Approx(10.0));
  CHECK(pts[0].cfg.beta_contrast_values.empty());

  ExperimentConfig ln = cfg;
  ln.medium = "lognormal";
  ln.beta_contrast_values.clear();
  ln.sigma_values = {2.0, 4.0};
  const std::vector<SweepPoint> spts = expand_sweep(ln);
  REQUIRE(spts.size() == 2);
  CHECK(spts[0].cfg.experiment_id == "tiny-s2");
  CHECK(spts[0].sigma == 2.0);
  CHECK(spts[1].sigma == 4.0);

  const std::vector<SweepPoint> single = expand_sweep(tiny_two_phase_config());
  REQUIRE(single.size() == 1);
  CHECK(single[0].cfg.experiment_id == "tiny");
}

TEST_CASE("experiment outputs are deterministic", "[io]") {
  const ExperimentConfig cfg = tiny_two_phase_config();
  const fs::path dir1 = temp_dir("exp_a");
  const fs::path dir2 = temp_dir("exp_b");
  const SweepResult r1 = run_experiment(cfg, dir1.string());
  const SweepResult r2 = run_experiment(cfg, dir2.string());

  const std::string csv1 = read_file(dir1 / "results.csv");
  const std::string csv2 = read_file(dir2 / "results.csv");
  CHECK(csv1.substr(0, csv1.find('\n')) == results_csv_header());
  CHECK(strip_wall_column(csv1) == strip_wall_column(csv2));
  CHECK(read_file(dir1 / "sweep_summary.csv") ==
        read_file(dir2 / "sweep_summary.csv"));

  const nlohmann::json m1 = nlohmann::json::parse(read_file(dir1 / "manifest.json"));
  const nlohmann::json m2 = nlohmann::json::parse(read_file(dir2 / "manifest.json"));
  CHECK(m1.at("config_hash") == m2.at("config_hash"));
  CHECK(m1.at("config").dump() == m2.at("config").dump());
  CHECK(m1.at("rows").get<int>() == static_cast<int>(r1.rows.size()));

  // one fine row plus a cgm and gm row per mode count
  REQUIRE(r1.rows.size() == 1 + 2 * cfg.L_values.size());
  CHECK(r1.rows[0].method == "fine");
  for (std::size_t i = 0; i < r1.rows.size(); ++i) {
    CHECK(r1.rows[i].experiment_id == "tiny");
    if (r1.rows[i].method != "fine") {
      CHECK(r1.rows[i].err_w > 0.0);
      CHECK(r1.rows[i].err_w == r2.rows[i].err_w);
      CHECK(std::isfinite(r1.rows[i].lambda_L1));
    }
  }

  // VTK output is byte-stable as well
  const std::string v1 = read_file(dir1 / "tiny_cgm_L2_final.vtk");
  const std::string v2 = read_file(dir2 / "tiny_cgm_L2_final.vtk");
  CHECK(v1 == v2);
  CHECK(read_file(dir1 / "tiny_fine_final.vtk") ==
        read_file(dir2 / "tiny_fine_final.vtk"));
}

TEST_CASE("multi-sample runs append mean rows", "[io]") {
  ExperimentConfig cfg = tiny_two_phase_config();
  cfg.medium = "lognormal";
  cfg.kle_corr_len = 0.3;
  cfg.kle_modes = 10;
  cfg.n_samples = 2;
  cfg.sigma_values = {1.5};
  cfg.L_values = {2};
  cfg.write_vtk = false;
  const fs::path dir = temp_dir("exp_mean");
  const SweepResult res = run_experiment(cfg, dir.string());

  int mean_rows = 0, sample_rows = 0;
  double cgm_sum = 0.0, cgm_mean = -1.0;
  for (const auto& r : res.rows) {
    if (r.experiment_id.find("#mean") != std::string::npos) {
      ++mean_rows;
      if (r.method == "cgm") cgm_mean = r.err_w;
    } else if (r.experiment_id.find("#s") != std::string::npos) {
      ++sample_rows;
      if (r.method == "cgm") cgm_sum += r.err_w;
    }
  }
  CHECK(mean_rows == 3);    // fine, cgm, gm
  CHECK(sample_rows == 6);  // two samples of each
  CHECK(cgm_mean == Catch::Approx(cgm_sum / 2.0).epsilon(1e-12));

  // summary pairs the mean rows
  REQUIRE(res.summary_lines.size() == 1);
  CHECK(res.summary_lines[0].rfind("tiny-s1.5,2,", 0) == 0);
}

TEST_CASE("eigenvalue tables are deterministic", "[io]") {
  const MeshPair mp = build_mesh_pair(8, 8, 2, 2);
  MaterialField mat;
  mat.lambda = periodic_field(mp.fine, 4, InclusionShape::square, 1.0, 1.0, 10.0);
  mat.mu = periodic_field(mp.fine, 4, InclusionShape::square, 1.0, 0.5, 5.0);
  mat.kappa = periodic_field(mp.fine, 4, InclusionShape::square, 1.0, 0.1, 10.0);
  mat.beta = periodic_field(mp.fine, 4, InclusionShape::square, 1.0, 0.2, 2.0);
  SpectralConfig scfg;
  scfg.gamma1 = 0.4;
  scfg.gamma2 = 0.04;
  scfg.n_keep = 4;
  scfg.H = mp.coarse.H;
  const std::vector<PatchSpectrum> spectra =
      compute_coupled_spectra(mp, mat, scfg);

  const fs::path dir = temp_dir("eig_csv");
  write_eigenvalue_csv((dir / "a.csv").string(), spectra, 8);
  write_eigenvalue_csv((dir / "b.csv").string(), spectra, 8);
  const std::string a = read_file(dir / "a.csv");
  CHECK(a == read_file(dir / "b.csv"));
  CHECK(a.substr(0, a.find('\n')) ==
        "patch,index,lambda_re,lambda_im,lambda_reported");
  // 9 patches x 8 eigenvalues plus the header
  CHECK(std::count(a.begin(), a.end(), '\n') == 73);
}

TEST_CASE("cli subcommands run end to end", "[io]") {
  const std::string bin = CGMSFEM_CLI_BIN;
  REQUIRE(fs::exists(bin));
  const fs::path dir = temp_dir("cli");
  const auto shell = [&](const std::string& args) {
    const std::string cmd = bin + " " + args + " > " +
                            (dir / "stdout.txt").string() + " 2>&1";
    return std::system(cmd.c_str());
  };

  CHECK(shell("--version") == 0);
  CHECK(shell("run --preset granite") != 0);
  CHECK(shell("run") != 0);  // needs --config or --preset

  const std::string demo =
      (fs::path(CGMSFEM_SOURCE_DIR) / "configs" / "small-demo.json").string();
  const std::string out_run = (dir / "run").string();
  REQUIRE(shell("run --config " + demo + " --out " + out_run) == 0);
  CHECK(fs::exists(fs::path(out_run) / "results.csv"));
  CHECK(fs::exists(fs::path(out_run) / "sweep_summary.csv"));
  CHECK(fs::exists(fs::path(out_run) / "manifest.json"));
  // strided storage writes a time series next to the finals
  CHECK(fs::exists(fs::path(out_run) / "small-demo_fine_final.vtk"));
  CHECK(fs::exists(fs::path(out_run) / "small-demo_fine_t1.vtk"));
  CHECK(fs::exists(fs::path(out_run) / "small-demo_cgm_L4_final.vtk"));

  const std::string out_rep = (dir / "report").string();
  REQUIRE(shell("basis-report --config " + demo + " --out " + out_rep +
                " --modes 6 --patch 12 --vtk-modes 2") == 0);
  CHECK(fs::exists(fs::path(out_rep) / "cgm_eigenvalues.csv"));
  CHECK(fs::exists(fs::path(out_rep) / "gm_eigenvalues.csv"));
  CHECK(fs::exists(fs::path(out_rep) / "patch12_mode0.vtk"));
  CHECK(fs::exists(fs::path(out_rep) / "patch12_mode1.vtk"));

  REQUIRE(shell("verify --trials 2 --meshes 8 16") == 0);
  const std::string log = read_file(dir / "stdout.txt");
  CHECK(log.find("[PASS]") != std::string::npos);
  CHECK(log.find("all checks passed") != std::string::npos);
}
