#pragma once

//! Legacy ASCII VTK output of composite states on the triangulation, plus a
//! minimal reader for round-trip checks. Values are printed with %.17g so a
//! write/read cycle is lossless for doubles.

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cgmsfem/common.hpp"
#include "cgmsfem/mesh.hpp"

namespace cgmsfem {

namespace detail {

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_vtk_mesh_header(std::ostream& out, const std::string& title,
                                  const Eigen::MatrixXd& nodes,
                                  const Eigen::MatrixXi& tris) {
  const int n = static_cast<int>(nodes.rows());
  const int m = static_cast<int>(tris.rows());
  out << "# vtk DataFile Version 3.0\n" << title << "\nASCII\n";
  out << "DATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << n << " double\n";
  for (int p = 0; p < n; ++p)
    out << fmt_g17(nodes(p, 0)) << ' ' << fmt_g17(nodes(p, 1)) << " 0\n";
  out << "CELLS " << m << ' ' << 4 * m << '\n';
  for (int e = 0; e < m; ++e)
    out << "3 " << tris(e, 0) << ' ' << tris(e, 1) << ' ' << tris(e, 2)
        << '\n';
  out << "CELL_TYPES " << m << '\n';
  for (int e = 0; e < m; ++e) out << "5\n";
}

inline void write_vtk_state_data(std::ostream& out, const Eigen::VectorXd& w,
                                 int n) {
  out << "POINT_DATA " << n << '\n';
  out << "VECTORS displacement double\n";
  for (int p = 0; p < n; ++p)
    out << fmt_g17(w[p]) << ' ' << fmt_g17(w[n + p]) << " 0\n";
  out << "SCALARS temperature double 1\nLOOKUP_TABLE default\n";
  for (int p = 0; p < n; ++p) out << fmt_g17(w[2 * n + p]) << '\n';
}

}  // namespace detail

//! Composite state (displacement vector field + temperature) on the fine mesh.
inline void write_vtk_state(const std::string& path, const FineMesh& fm,
                            const Eigen::VectorXd& w,
                            const std::string& title = "state") {
  const int n = fm.n_nodes();
  CGM_REQUIRE_ARG(w.size() == 3 * n, "write_vtk_state: state size mismatch");
  std::ofstream out(path);
  CGM_REQUIRE(out.good(), "write_vtk_state: cannot open " + path);
  detail::write_vtk_mesh_header(out, title, fm.nodes, fm.tris);
  detail::write_vtk_state_data(out, w, n);
  CGM_REQUIRE(out.good(), "write_vtk_state: write failed on " + path);
}

//! One pencil mode on the patch submesh, in patch-local numbering.
inline void write_vtk_patch_mode(const std::string& path, const FineMesh& fm,
                                 const Patch& pa, const Eigen::VectorXd& mode,
                                 const std::string& title = "patch mode") {
  const int m = pa.n_nodes();
  CGM_REQUIRE_ARG(mode.size() == 3 * m,
                  "write_vtk_patch_mode: mode size mismatch");
  Eigen::MatrixXd nodes(m, 2);
  for (int k = 0; k < m; ++k) nodes.row(k) = fm.nodes.row(pa.nodes[k]);
  Eigen::MatrixXi tris(static_cast<int>(pa.elems.size()), 3);
  for (std::size_t i = 0; i < pa.elems.size(); ++i)
    for (int c = 0; c < 3; ++c) {
      const int g = fm.tris(pa.elems[i], c);
      tris(static_cast<int>(i), c) =
          pa.local_node(fm.node_i(g), fm.node_j(g));
    }
  std::ofstream out(path);
  CGM_REQUIRE(out.good(), "write_vtk_patch_mode: cannot open " + path);
  detail::write_vtk_mesh_header(out, title, nodes, tris);
  detail::write_vtk_state_data(out, mode, m);
  CGM_REQUIRE(out.good(), "write_vtk_patch_mode: write failed on " + path);
}

//! Parsed content of a state file written above.
struct VtkState {
  Eigen::MatrixXd points;  // n x 2
  Eigen::MatrixXi tris;    // m x 3
  Eigen::VectorXd w;       // composite [u1; u2; theta]
};

inline VtkState read_vtk_state(const std::string& path) {
  std::ifstream in(path);
  CGM_REQUIRE(in.good(), "read_vtk_state: cannot open " + path);
  VtkState out;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    if (key == "POINTS") {
      ls >> n;
      CGM_REQUIRE(n > 0, "read_vtk_state: bad point count");
      out.points.resize(n, 2);
      double x, y, z;
      for (int p = 0; p < n; ++p) {
        in >> x >> y >> z;
        out.points(p, 0) = x;
        out.points(p, 1) = y;
      }
    } else if (key == "CELLS") {
      int m = 0, total = 0;
      ls >> m >> total;
      CGM_REQUIRE(m > 0 && total == 4 * m, "read_vtk_state: bad cell block");
      out.tris.resize(m, 3);
      for (int e = 0; e < m; ++e) {
        int k, a, b, c;
        in >> k >> a >> b >> c;
        CGM_REQUIRE(k == 3, "read_vtk_state: only triangle cells supported");
        out.tris.row(e) << a, b, c;
      }
    } else if (key == "VECTORS") {
      CGM_REQUIRE(n > 0, "read_vtk_state: VECTORS before POINTS");
      if (out.w.size() == 0) out.w = Eigen::VectorXd::Zero(3 * n);
      double x, y, z;
      for (int p = 0; p < n; ++p) {
        in >> x >> y >> z;
        out.w[p] = x;
        out.w[n + p] = y;
      }
    } else if (key == "SCALARS") {
      CGM_REQUIRE(n > 0, "read_vtk_state: SCALARS before POINTS");
      std::getline(in, line);  // LOOKUP_TABLE
      if (out.w.size() == 0) out.w = Eigen::VectorXd::Zero(3 * n);
      double v;
      for (int p = 0; p < n; ++p) {
        in >> v;
        out.w[2 * n + p] = v;
      }
    }
  }
  CGM_REQUIRE(out.points.size() > 0 && out.w.size() > 0,
              "read_vtk_state: incomplete file " + path);
  return out;
}

}  // namespace cgmsfem
