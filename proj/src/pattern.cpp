#include "dg/pattern.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dg {

namespace {

double signed_area_2d(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x()));
}

// Union-find over pattern vertices for panel extraction.
struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int a) {
    while (parent[a] != a) {
      parent[a] = parent[parent[a]];
      a = parent[a];
    }
    return a;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
};

void assign_panels(PatternMesh& mesh) {
  const int nv = static_cast<int>(mesh.uv.size());
  UnionFind uf(nv);
  for (const auto& f : mesh.faces) {
    uf.unite(f[0], f[1]);
    uf.unite(f[0], f[2]);
  }
  std::map<int, int> root_to_panel;
  mesh.face_panel.resize(mesh.faces.size());
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    int root = uf.find(mesh.faces[f][0]);
    auto it = root_to_panel.find(root);
    if (it == root_to_panel.end())
      it = root_to_panel.emplace(root, static_cast<int>(root_to_panel.size())).first;
    mesh.face_panel[f] = it->second;
  }
  mesh.num_panels = static_cast<int>(root_to_panel.size());
}

}  // namespace

std::vector<BoundaryLoop> extract_boundary_loops(const PatternMesh& mesh) {
  // Directed boundary half-edges: a face edge (i,j) with no opposite (j,i).
  std::map<std::pair<int, int>, int> edge_count;  // undirected -> face count
  std::map<std::pair<int, int>, int> directed;    // (i,j) -> face
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    for (int e = 0; e < 3; ++e) {
      int i = t[e], j = t[(e + 1) % 3];
      auto key = std::minmax(i, j);
      edge_count[{key.first, key.second}]++;
      directed[{i, j}] = static_cast<int>(f);
    }
  }
  for (const auto& [e, c] : edge_count) {
    if (c > 2) {
      std::ostringstream os;
      os << "non-manifold pattern edge (" << e.first << "," << e.second
         << ") shared by " << c << " faces";
      throw std::runtime_error(os.str());
    }
  }
  // next-vertex map along the boundary, following face orientation.
  std::map<int, int> next;
  for (const auto& [he, f] : directed) {
    auto key = std::minmax(he.first, he.second);
    if (edge_count[{key.first, key.second}] == 1) {
      if (next.count(he.first))
        throw std::runtime_error("non-manifold boundary at vertex " + std::to_string(he.first));
      next[he.first] = he.second;
    }
  }
  // Panel id per vertex (from any incident face).
  std::vector<int> vertex_panel(mesh.uv.size(), -1);
  for (size_t f = 0; f < mesh.faces.size(); ++f)
    for (int k = 0; k < 3; ++k) vertex_panel[mesh.faces[f][k]] = mesh.face_panel[f];

  std::vector<BoundaryLoop> loops;
  std::set<int> visited;
  // Deterministic: start candidate loops from the lowest unvisited vertex.
  for (const auto& [start, _] : next) {
    if (visited.count(start)) continue;
    BoundaryLoop loop;
    int v = start;
    do {
      loop.vertices.push_back(v);
      visited.insert(v);
      auto it = next.find(v);
      if (it == next.end())
        throw std::runtime_error("open boundary chain at vertex " + std::to_string(v));
      v = it->second;
    } while (v != start);
    // Rotate so the lowest index comes first.
    auto mn = std::min_element(loop.vertices.begin(), loop.vertices.end());
    std::rotate(loop.vertices.begin(), mn, loop.vertices.end());
    loop.panel = vertex_panel[loop.vertices[0]];
    double area2 = 0.0;
    for (size_t k = 0; k < loop.vertices.size(); ++k) {
      const Vec2& a = mesh.uv[loop.vertices[k]];
      const Vec2& b = mesh.uv[loop.vertices[(k + 1) % loop.vertices.size()]];
      area2 += a.x() * b.y() - b.x() * a.y();
    }
    loop.outer = area2 > 0.0;
    loops.push_back(std::move(loop));
  }
  std::sort(loops.begin(), loops.end(), [](const BoundaryLoop& a, const BoundaryLoop& b) {
    if (a.panel != b.panel) return a.panel < b.panel;
    if (a.outer != b.outer) return a.outer;
    return a.vertices[0] < b.vertices[0];
  });
  return loops;
}

std::vector<std::vector<int>> garment_boundary_loops(const PatternMesh& mesh) {
  std::map<std::pair<int, int>, int> edge_count;
  std::map<std::pair<int, int>, bool> directed;
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    auto t = mesh.sim_face(static_cast<int>(f));
    for (int e = 0; e < 3; ++e) {
      int i = t[e], j = t[(e + 1) % 3];
      auto key = std::minmax(i, j);
      edge_count[{key.first, key.second}]++;
      directed[{i, j}] = true;
    }
  }
  std::map<int, int> next;
  for (const auto& [he, ok] : directed) {
    (void)ok;
    auto key = std::minmax(he.first, he.second);
    if (edge_count[{key.first, key.second}] == 1) next[he.first] = he.second;
  }
  std::vector<std::vector<int>> loops;
  std::set<int> visited;
  for (const auto& [start, _] : next) {
    if (visited.count(start)) continue;
    std::vector<int> loop;
    int v = start;
    do {
      loop.push_back(v);
      visited.insert(v);
      v = next.at(v);
    } while (v != start);
    auto mn = std::min_element(loop.begin(), loop.end());
    std::rotate(loop.begin(), mn, loop.end());
    loops.push_back(std::move(loop));
  }
  std::sort(loops.begin(), loops.end());
  return loops;
}

void validate_pattern(const PatternMesh& mesh) {
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    const auto& t = mesh.faces[f];
    int p = mesh.face_panel[f];
    for (int k = 0; k < 3; ++k) {
      if (t[k] < 0 || t[k] >= static_cast<int>(mesh.uv.size()))
        throw std::runtime_error("face " + std::to_string(f) + " has out-of-range vertex");
    }
    (void)p;
    double a = signed_area_2d(mesh.uv[t[0]], mesh.uv[t[1]], mesh.uv[t[2]]);
    if (a <= 0.0)
      throw std::runtime_error("inverted rest element: face " + std::to_string(f) +
                               " has non-positive 2D area");
  }
  for (size_t s = 0; s < mesh.seams.size(); ++s) {
    const SeamPair& sp = mesh.seams[s];
    if (sp.side_a.size() != sp.side_b.size() || sp.side_a.size() < 2)
      throw std::runtime_error("seam " + std::to_string(s) +
                               ": chains must have equal length >= 2");
    std::set<int> ia(sp.side_a.begin() + 1, sp.side_a.end() - 1);
    for (size_t k = 1; k + 1 < sp.side_b.size(); ++k)
      if (ia.count(sp.side_b[k]))
        throw std::runtime_error("seam " + std::to_string(s) + ": chains share interior vertices");
  }
  for (size_t pv = 0; pv < mesh.sim_vertex.size(); ++pv)
    if (mesh.sim_vertex[pv] < 0 || mesh.sim_vertex[pv] >= mesh.num_sim_vertices)
      throw std::runtime_error("pattern vertex " + std::to_string(pv) +
                               " maps to invalid sim vertex");
}

PatternMesh load_pattern(const std::string& obj_path, const std::string& seam_path) {
  std::ifstream in(obj_path);
  if (!in) throw std::runtime_error("cannot open pattern file: " + obj_path);

  PatternMesh mesh;
  std::vector<Vec3> positions;
  std::vector<Vec2> texcoords;
  // face corner records: (v index, vt index)
  std::vector<std::array<std::pair<int, int>, 3>> face_corners;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string tag;
    ss >> tag;
    if (tag == "v") {
      double x, y, z = 0.0;
      ss >> x >> y >> z;
      positions.emplace_back(x, y, z);
    } else if (tag == "vt") {
      double u, v;
      if (!(ss >> u >> v))
        throw std::runtime_error(obj_path + ":" + std::to_string(lineno) + ": bad vt line");
      texcoords.emplace_back(u, v);
    } else if (tag == "f") {
      std::array<std::pair<int, int>, 3> corners;
      for (int k = 0; k < 3; ++k) {
        std::string tok;
        if (!(ss >> tok))
          throw std::runtime_error(obj_path + ":" + std::to_string(lineno) +
                                   ": face needs 3 corners");
        int vi = 0, ti = 0;
        size_t slash = tok.find('/');
        if (slash == std::string::npos) {
          vi = std::stoi(tok);
          ti = vi;
        } else {
          vi = std::stoi(tok.substr(0, slash));
          std::string rest = tok.substr(slash + 1);
          size_t slash2 = rest.find('/');
          ti = std::stoi(slash2 == std::string::npos ? rest : rest.substr(0, slash2));
        }
        corners[k] = {vi - 1, ti - 1};
      }
      std::string extra;
      if (ss >> extra)
        throw std::runtime_error(obj_path + ":" + std::to_string(lineno) +
                                 ": only triangle faces are supported");
      face_corners.push_back(corners);
    }
  }
  if (texcoords.empty())
    throw std::runtime_error(obj_path + ": pattern OBJ must carry vt (2D rest) coordinates");

  mesh.uv = texcoords;
  mesh.sim_vertex.assign(texcoords.size(), -1);
  for (size_t f = 0; f < face_corners.size(); ++f) {
    std::array<int, 3> tri;
    for (int k = 0; k < 3; ++k) {
      auto [vi, ti] = face_corners[f][k];
      if (ti < 0 || ti >= static_cast<int>(texcoords.size()))
        throw std::runtime_error(obj_path + ": face " + std::to_string(f) +
                                 " references missing vt index");
      if (vi < 0 || vi >= static_cast<int>(positions.size()))
        throw std::runtime_error(obj_path + ": face " + std::to_string(f) +
                                 " references missing v index");
      if (mesh.sim_vertex[ti] != -1 && mesh.sim_vertex[ti] != vi)
        throw std::runtime_error(obj_path + ": pattern vertex " + std::to_string(ti) +
                                 " is bound to two different 3D vertices");
      mesh.sim_vertex[ti] = vi;
      tri[k] = ti;
    }
    mesh.faces.push_back(tri);
  }
  // Unreferenced texcoords get their own sim vertex slot check below.
  for (size_t t = 0; t < mesh.sim_vertex.size(); ++t)
    if (mesh.sim_vertex[t] < 0)
      throw std::runtime_error(obj_path + ": unreferenced vt " + std::to_string(t));

  mesh.num_sim_vertices = static_cast<int>(positions.size());
  mesh.rest_embedding = positions;

  assign_panels(mesh);
  validate_pattern(mesh);
  mesh.boundary_loops = extract_boundary_loops(mesh);

  if (!seam_path.empty()) {
    std::ifstream sin(seam_path);
    if (!sin) throw std::runtime_error("cannot open seam file: " + seam_path);
    // vertex panel lookup
    std::vector<int> vertex_panel(mesh.uv.size(), -1);
    for (size_t f = 0; f < mesh.faces.size(); ++f)
      for (int k = 0; k < 3; ++k) vertex_panel[mesh.faces[f][k]] = mesh.face_panel[f];
    while (std::getline(sin, line)) {
      std::istringstream ss(line);
      std::string tag;
      if (!(ss >> tag) || tag[0] == '#') continue;
      if (tag != "seam") throw std::runtime_error(seam_path + ": unknown record '" + tag + "'");
      std::vector<int> nums;
      int x;
      while (ss >> x) nums.push_back(x);
      if (nums.size() < 6 || nums.size() % 2 != 0)
        throw std::runtime_error(seam_path + ": malformed seam line");
      size_t n = (nums.size() - 2) / 2;
      SeamPair sp;
      sp.panel_a = nums[0];
      sp.side_a.assign(nums.begin() + 1, nums.begin() + 1 + n);
      sp.panel_b = nums[1 + n];
      sp.side_b.assign(nums.begin() + 2 + n, nums.end());
      for (int v : sp.side_a)
        if (vertex_panel[v] != sp.panel_a)
          throw std::runtime_error(seam_path + ": seam vertex " + std::to_string(v) +
                                   " not in panel " + std::to_string(sp.panel_a));
      for (int v : sp.side_b)
        if (vertex_panel[v] != sp.panel_b)
          throw std::runtime_error(seam_path + ": seam vertex " + std::to_string(v) +
                                   " not in panel " + std::to_string(sp.panel_b));
      mesh.seams.push_back(std::move(sp));
    }
    validate_pattern(mesh);
  }
  return mesh;
}

void save_pattern(const PatternMesh& mesh, const std::string& obj_path,
                  const std::string& seam_path) {
  std::ofstream out(obj_path);
  if (!out) throw std::runtime_error("cannot write " + obj_path);
  out.precision(17);
  for (const auto& p : mesh.rest_embedding)
    out << "v " << p.x() << " " << p.y() << " " << p.z() << "\n";
  for (const auto& t : mesh.uv) out << "vt " << t.x() << " " << t.y() << "\n";
  for (size_t f = 0; f < mesh.faces.size(); ++f) {
    out << "f";
    for (int k = 0; k < 3; ++k) {
      int ti = mesh.faces[f][k];
      out << " " << mesh.sim_vertex[ti] + 1 << "/" << ti + 1;
    }
    out << "\n";
  }
  if (!seam_path.empty()) {
    std::ofstream sout(seam_path);
    if (!sout) throw std::runtime_error("cannot write " + seam_path);
    for (const auto& sp : mesh.seams) {
      sout << "seam " << sp.panel_a;
      for (int v : sp.side_a) sout << " " << v;
      sout << " " << sp.panel_b;
      for (int v : sp.side_b) sout << " " << v;
      sout << "\n";
    }
  }
}

RestShapeData build_rest_shape(const PatternMesh& mesh, double density) {
  if (density <= 0.0) throw std::runtime_error("density must be positive");
  RestShapeData rs;
  rs.density = density;
  const size_t nf = mesh.faces.size();
  rs.Dbar.resize(nf);
  rs.Dbar_inv.resize(nf);
  rs.area.resize(nf);
  rs.mass.assign(mesh.num_sim_vertices, 0.0);
  for (size_t f = 0; f < nf; ++f) {
    const auto& t = mesh.faces[f];
    Mat2 D;
    D.col(0) = mesh.uv[t[0]] - mesh.uv[t[2]];
    D.col(1) = mesh.uv[t[1]] - mesh.uv[t[2]];
    double det = D.determinant();
    if (std::abs(det) < 1e-12)
      throw std::runtime_error("degenerate rest face " + std::to_string(f));
    rs.Dbar[f] = D;
    rs.Dbar_inv[f] = D.inverse();
    rs.area[f] = 0.5 * std::abs(det);
    rs.total_area += rs.area[f];
    for (int k = 0; k < 3; ++k) rs.mass[mesh.sim_vertex[t[k]]] += density * rs.area[f] / 3.0;
  }
  return rs;
}

double triangle_quality(const Vec2& a, const Vec2& b, const Vec2& c) {
  double area = std::abs(signed_area_2d(a, b, c));
  double l2 = (b - a).squaredNorm() + (c - b).squaredNorm() + (a - c).squaredNorm();
  if (l2 <= 0.0) return 0.0;
  return 4.0 * std::sqrt(3.0) * area / l2;
}

double triangle_quality(const Vec3& a, const Vec3& b, const Vec3& c) {
  double area = 0.5 * (b - a).cross(c - a).norm();
  double l2 = (b - a).squaredNorm() + (c - b).squaredNorm() + (a - c).squaredNorm();
  if (l2 <= 0.0) return 0.0;
  return 4.0 * std::sqrt(3.0) * area / l2;
}

QualityStats mesh_quality(const std::vector<Vec2>& uv,
                          const std::vector<std::array<int, 3>>& faces) {
  QualityStats qs;
  qs.per_face.reserve(faces.size());
  double sum = 0.0;
  double mn = faces.empty() ? 0.0 : 1.0;
  for (const auto& t : faces) {
    double q = triangle_quality(uv[t[0]], uv[t[1]], uv[t[2]]);
    qs.per_face.push_back(q);
    sum += q;
    mn = std::min(mn, q);
  }
  qs.min = mn;
  qs.mean = faces.empty() ? 0.0 : sum / faces.size();
  return qs;
}

}  // namespace dg
