#include "dg/cage.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dg {

namespace {

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

// Strict convex hull corners (collinear points excluded), monotone chain.
// Collinearity uses a tolerance relative to the squared bounding-box size so
// the corner set survives rigid transforms of the panel.
std::vector<int> hull_corners(const std::vector<Vec2>& pts) {
  const int n = static_cast<int>(pts.size());
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  std::sort(idx.begin(), idx.end(), [&](int a, int b) {
    if (pts[a].x() != pts[b].x()) return pts[a].x() < pts[b].x();
    return pts[a].y() < pts[b].y();
  });
  Vec2 lo = pts[0], hi = pts[0];
  for (const Vec2& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const double tol = 1e-9 * (hi - lo).squaredNorm();
  auto build = [&](std::vector<int>& out, bool lower) {
    for (int k = 0; k < n; ++k) {
      int i = idx[lower ? k : n - 1 - k];
      while (out.size() >= 2) {
        const Vec2& a = pts[out[out.size() - 2]];
        const Vec2& b = pts[out[out.size() - 1]];
        if (cross2(b - a, pts[i] - a) > tol) break;
        out.pop_back();
      }
      out.push_back(i);
    }
  };
  std::vector<int> lower, upper;
  build(lower, true);
  build(upper, false);
  lower.pop_back();
  upper.pop_back();
  lower.insert(lower.end(), upper.begin(), upper.end());
  return lower;
}

bool point_in_polygon(const Vec2& p, const std::vector<Vec2>& poly) {
  bool inside = false;
  const int n = static_cast<int>(poly.size());
  for (int i = 0, j = n - 1; i < n; j = i++) {
    const Vec2& a = poly[i];
    const Vec2& b = poly[j];
    if ((a.y() > p.y()) != (b.y() > p.y()) &&
        p.x() < (b.x() - a.x()) * (p.y() - a.y()) / (b.y() - a.y()) + a.x())
      inside = !inside;
  }
  return inside;
}

double dist_to_segment(const Vec2& p, const Vec2& a, const Vec2& b, double& t_out) {
  Vec2 ab = b - a;
  double t = ab.squaredNorm() > 0.0 ? (p - a).dot(ab) / ab.squaredNorm() : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  t_out = t;
  return (p - (a + t * ab)).norm();
}

}  // namespace

std::vector<int> select_handles(const std::vector<Vec2>& uv, const BoundaryLoop& loop,
                                double angle_threshold_deg) {
  const int n = static_cast<int>(loop.vertices.size());
  if (n < 3) throw std::runtime_error("boundary loop shorter than 3 vertices");
  std::vector<Vec2> pts(n);
  for (int i = 0; i < n; ++i) pts[i] = uv[loop.vertices[i]];

  std::vector<bool> mark(n, false);
  for (int h : hull_corners(pts)) mark[h] = true;

  const double thresh = angle_threshold_deg * M_PI / 180.0;
  for (int i = 0; i < n; ++i) {
    Vec2 e_in = pts[i] - pts[(i + n - 1) % n];
    Vec2 e_out = pts[(i + 1) % n] - pts[i];
    double turn = std::atan2(cross2(e_in, e_out), e_in.dot(e_out));
    if (std::abs(turn) > thresh) mark[i] = true;
  }

  std::vector<int> handles;
  for (int i = 0; i < n; ++i)
    if (mark[i]) handles.push_back(loop.vertices[i]);
  if (handles.size() < 3) {
    // degenerate loop shape; fall back to uniform subsampling
    int stride = (n + 7) / 8;
    handles.clear();
    for (int i = 0; i < n; i += stride) handles.push_back(loop.vertices[i]);
  }
  return handles;
}

MatX mvc_weights(const std::vector<Vec2>& points, const std::vector<Vec2>& cage) {
  const int m = static_cast<int>(cage.size());
  const int np = static_cast<int>(points.size());
  if (m < 3) throw std::runtime_error("cage polygon needs at least 3 vertices");
  double scale = 0.0;
  for (const Vec2& c : cage) scale = std::max(scale, c.cwiseAbs().maxCoeff());
  const double eps = 1e-12 * std::max(scale, 1.0);

  MatX W = MatX::Zero(np, m);
  for (int p = 0; p < np; ++p) {
    const Vec2& x = points[p];
    // coincident with a handle?
    int coincident = -1;
    for (int i = 0; i < m; ++i)
      if ((x - cage[i]).norm() <= eps) {
        coincident = i;
        break;
      }
    if (coincident >= 0) {
      W(p, coincident) = 1.0;
      continue;
    }
    // on a cage edge?
    int on_edge = -1;
    double t_edge = 0.0;
    for (int i = 0; i < m; ++i) {
      double t;
      if (dist_to_segment(x, cage[i], cage[(i + 1) % m], t) <= 1e-9 * std::max(scale, 1.0)) {
        on_edge = i;
        t_edge = t;
        break;
      }
    }
    if (on_edge >= 0) {
      W(p, on_edge) = 1.0 - t_edge;
      W(p, (on_edge + 1) % m) = t_edge;
      continue;
    }
    if (!point_in_polygon(x, cage)) {
      double d = 1e300;
      for (int i = 0; i < m; ++i) {
        double t;
        d = std::min(d, dist_to_segment(x, cage[i], cage[(i + 1) % m], t));
      }
      if (d > 1e-9)
        throw std::runtime_error("pattern vertex " + std::to_string(p) +
                                 " lies outside the cage polygon");
    }
    // tan(alpha_i/2) = cross(d_i, d_{i+1}) / (r_i r_{i+1} + d_i . d_{i+1})
    std::vector<double> r(m), tan_half(m);
    std::vector<Vec2> d(m);
    for (int i = 0; i < m; ++i) {
      d[i] = cage[i] - x;
      r[i] = d[i].norm();
    }
    for (int i = 0; i < m; ++i) {
      int j = (i + 1) % m;
      tan_half[i] = cross2(d[i], d[j]) / (r[i] * r[j] + d[i].dot(d[j]));
    }
    double sum = 0.0;
    for (int i = 0; i < m; ++i) {
      double w = (tan_half[(i + m - 1) % m] + tan_half[i]) / r[i];
      W(p, i) = w;
      sum += w;
    }
    W.row(p) /= sum;
  }
  return W;
}

ControlCage build_cage(const PatternMesh& mesh, double angle_threshold_deg) {
  ControlCage cage;
  for (int panel = 0; panel < mesh.num_panels; ++panel) {
    const BoundaryLoop* outer = nullptr;
    for (const auto& loop : mesh.boundary_loops)
      if (loop.panel == panel && loop.outer) {
        outer = &loop;
        break;
      }
    if (!outer) throw std::runtime_error("panel " + std::to_string(panel) + " has no outer loop");

    PanelCage pc;
    pc.panel = panel;
    pc.handles = select_handles(mesh.uv, *outer, angle_threshold_deg);

    std::vector<bool> in_panel(mesh.uv.size(), false);
    for (size_t f = 0; f < mesh.faces.size(); ++f)
      if (mesh.face_panel[f] == panel)
        for (int k = 0; k < 3; ++k) in_panel[mesh.faces[f][k]] = true;
    for (size_t v = 0; v < mesh.uv.size(); ++v)
      if (in_panel[v]) pc.panel_vertices.push_back(static_cast<int>(v));

    std::vector<Vec2> poly(pc.handles.size()), pts(pc.panel_vertices.size());
    for (size_t i = 0; i < pc.handles.size(); ++i) poly[i] = mesh.uv[pc.handles[i]];
    for (size_t i = 0; i < pc.panel_vertices.size(); ++i) pts[i] = mesh.uv[pc.panel_vertices[i]];
    pc.W = mvc_weights(pts, poly);
    pc.zeta0 = poly;
    cage.panels.push_back(std::move(pc));
  }
  return cage;
}

VecX cage_pack(const ControlCage& cage) {
  VecX z(2 * cage.num_handles());
  int off = 0;
  for (const auto& pc : cage.panels)
    for (const Vec2& h : pc.zeta0) {
      z[off++] = h.x();
      z[off++] = h.y();
    }
  return z;
}

std::vector<Vec2> cage_deform(const ControlCage& cage, const PatternMesh& mesh,
                              const VecX& zeta) {
  if (zeta.size() != 2 * cage.num_handles())
    throw std::runtime_error("cage_deform: handle vector size mismatch");
  std::vector<Vec2> uv = mesh.uv;
  int off = 0;
  for (const auto& pc : cage.panels) {
    const int h = static_cast<int>(pc.handles.size());
    MatX z(h, 2);
    for (int i = 0; i < h; ++i) {
      z(i, 0) = zeta[off + 2 * i];
      z(i, 1) = zeta[off + 2 * i + 1];
    }
    off += 2 * h;
    MatX out = pc.W * z;  // panel_vertices x 2
    for (size_t i = 0; i < pc.panel_vertices.size(); ++i)
      uv[pc.panel_vertices[i]] = Vec2(out(i, 0), out(i, 1));
  }
  // reject inverted rest triangles
  std::vector<int> bad;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    Vec2 e0 = uv[t[1]] - uv[t[0]], e1 = uv[t[2]] - uv[t[0]];
    if (cross2(e0, e1) <= 0.0) bad.push_back(static_cast<int>(f));
  }
  if (!bad.empty()) {
    std::ostringstream os;
    os << "cage deformation inverts rest faces:";
    for (int f : bad) os << " " << f;
    throw std::runtime_error(os.str());
  }
  return uv;
}

VecX cage_chain_gradient(const ControlCage& cage, const PatternMesh& mesh,
                         const VecX& d_xbar) {
  if (d_xbar.size() != 2 * static_cast<int>(mesh.uv.size()))
    throw std::runtime_error("cage_chain_gradient: gradient size mismatch");
  VecX g = VecX::Zero(2 * cage.num_handles());
  int off = 0;
  for (const auto& pc : cage.panels) {
    const int h = static_cast<int>(pc.handles.size());
    MatX gx(pc.panel_vertices.size(), 2);
    for (size_t i = 0; i < pc.panel_vertices.size(); ++i) {
      gx(i, 0) = d_xbar[2 * pc.panel_vertices[i]];
      gx(i, 1) = d_xbar[2 * pc.panel_vertices[i] + 1];
    }
    MatX gz = pc.W.transpose() * gx;  // handles x 2
    for (int i = 0; i < h; ++i) {
      g[off + 2 * i] += gz(i, 0);
      g[off + 2 * i + 1] += gz(i, 1);
    }
    off += 2 * h;
  }
  return g;
}

void save_cage(const ControlCage& cage, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  for (const auto& pc : cage.panels) {
    out << "panel " << pc.panel << "\n";
    for (size_t i = 0; i < pc.handles.size(); ++i)
      out << "handle " << pc.handles[i] << " " << pc.zeta0[i].x() << " " << pc.zeta0[i].y()
          << "\n";
  }
}

}  // namespace dg
