// Generates the bundled desk-scale assets: pattern OBJs with seam sidecars,
// the low-res humanoid body, and ready-to-run scene configs.
//
//   make_assets <output_dir>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

#include "dg/body.hpp"
#include "dg/pattern.hpp"
#include "dg/sim.hpp"

namespace {

using namespace dg;

// Single-panel nc x nr grid; uv spans [0,w] x [0,h]; embedding via callback.
PatternMesh make_grid(int nc, int nr, double w, double h,
                      const std::function<Vec3(double, double)>& embed) {
  PatternMesh m;
  for (int j = 0; j < nr; ++j)
    for (int i = 0; i < nc; ++i)
      m.uv.emplace_back(w * i / (nc - 1), h * j / (nr - 1));
  for (int j = 0; j + 1 < nr; ++j)
    for (int i = 0; i + 1 < nc; ++i) {
      int a = j * nc + i, b = j * nc + i + 1;
      int c = (j + 1) * nc + i + 1, d = (j + 1) * nc + i;
      m.faces.push_back({a, b, c});
      m.faces.push_back({a, c, d});
      m.face_panel.push_back(0);
      m.face_panel.push_back(0);
    }
  m.num_panels = 1;
  m.sim_vertex.resize(m.uv.size());
  for (size_t i = 0; i < m.uv.size(); ++i) m.sim_vertex[i] = static_cast<int>(i);
  m.num_sim_vertices = static_cast<int>(m.uv.size());
  for (const auto& t : m.uv) m.rest_embedding.push_back(embed(t.x(), t.y()));
  m.boundary_loops = extract_boundary_loops(m);
  return m;
}

// Four trapezoid panels sewn into a tube. height_factor stretches each
// panel's height individually (used for the deliberately mismatched
// variant); scale multiplies the whole pattern.
PatternMesh make_skirt(double scale, std::array<double, 4> height_factor) {
  const int nc = 4, nr = 6, panels = 4;
  const int cols = panels * (nc - 1);
  const double w_waist = 0.32, w_hem = 0.46, height = 0.5;
  const double r_waist = 0.21, r_hem = 0.30, z_waist = 1.06, z_hem = 0.56;

  PatternMesh m;
  m.num_panels = panels;
  m.num_sim_vertices = cols * nr;
  for (int p = 0; p < panels; ++p) {
    double hp = height * height_factor[p];
    for (int j = 0; j < nr; ++j) {
      double t = static_cast<double>(j) / (nr - 1);
      double wj = (w_waist + (w_hem - w_waist) * t) * scale;
      for (int i = 0; i < nc; ++i) {
        double u = 0.8 * p + (static_cast<double>(i) / (nc - 1) - 0.5) * wj;
        m.uv.emplace_back(u, scale * hp * t);
        m.sim_vertex.push_back(j * cols + (p * (nc - 1) + i) % cols);
      }
    }
    int base = p * nc * nr;
    for (int j = 0; j + 1 < nr; ++j)
      for (int i = 0; i + 1 < nc; ++i) {
        int a = base + j * nc + i, b = base + j * nc + i + 1;
        int c = base + (j + 1) * nc + i + 1, d = base + (j + 1) * nc + i;
        m.faces.push_back({a, b, c});
        m.faces.push_back({a, c, d});
        m.face_panel.push_back(p);
        m.face_panel.push_back(p);
      }
  }
  m.rest_embedding.resize(m.num_sim_vertices);
  for (int j = 0; j < nr; ++j) {
    double t = static_cast<double>(j) / (nr - 1);
    double r = r_waist + (r_hem - r_waist) * t;
    double z = z_waist + (z_hem - z_waist) * t;
    for (int c = 0; c < cols; ++c) {
      // Half-column phase: keeps cloth vertices off the body's x-z symmetry
      // plane, where closest-point feet flip between mirror faces.
      double th = 2.0 * M_PI * (c + 0.25) / cols;
      m.rest_embedding[j * cols + c] = Vec3(r * std::cos(th), r * std::sin(th), z);
    }
  }
  for (int p = 0; p < panels; ++p) {
    SeamPair sp;
    sp.panel_a = p;
    sp.panel_b = (p + 1) % panels;
    for (int j = 0; j < nr; ++j) {
      sp.side_a.push_back(p * nc * nr + j * nc + (nc - 1));
      sp.side_b.push_back(sp.panel_b * nc * nr + j * nc);
    }
    m.seams.push_back(sp);
  }
  m.boundary_loops = extract_boundary_loops(m);
  return m;
}

// Two rectangular panels sewn along both vertical sides (a hanging tube).
PatternMesh make_top() {
  const int nc = 5, nr = 5, panels = 2;
  const int cols = panels * (nc - 1);
  const double w = 0.6, h = 0.45;
  const double r = w * panels / (2.0 * M_PI), z_top = 1.30;

  PatternMesh m;
  m.num_panels = panels;
  m.num_sim_vertices = cols * nr;
  for (int p = 0; p < panels; ++p) {
    for (int j = 0; j < nr; ++j)
      for (int i = 0; i < nc; ++i) {
        m.uv.emplace_back(0.9 * p + w * i / (nc - 1), h * j / (nr - 1));
        m.sim_vertex.push_back(j * cols + (p * (nc - 1) + i) % cols);
      }
    int base = p * nc * nr;
    for (int j = 0; j + 1 < nr; ++j)
      for (int i = 0; i + 1 < nc; ++i) {
        int a = base + j * nc + i, b = base + j * nc + i + 1;
        int c = base + (j + 1) * nc + i + 1, d = base + (j + 1) * nc + i;
        m.faces.push_back({a, b, c});
        m.faces.push_back({a, c, d});
        m.face_panel.push_back(p);
        m.face_panel.push_back(p);
      }
  }
  m.rest_embedding.resize(m.num_sim_vertices);
  for (int j = 0; j < nr; ++j)
    for (int c = 0; c < cols; ++c) {
      double th = 2.0 * M_PI * c / cols;
      m.rest_embedding[j * cols + c] =
          Vec3(r * std::cos(th), r * std::sin(th), z_top - h * j / (nr - 1));
    }
  // Two seams: panel 0 right edge to panel 1 left edge, and panel 1 right
  // edge back to panel 0 left edge.
  for (int p = 0; p < panels; ++p) {
    SeamPair sp;
    sp.panel_a = p;
    sp.panel_b = (p + 1) % panels;
    for (int j = 0; j < nr; ++j) {
      sp.side_a.push_back(p * nc * nr + j * nc + (nc - 1));
      sp.side_b.push_back(sp.panel_b * nc * nr + j * nc);
    }
    m.seams.push_back(sp);
  }
  m.boundary_loops = extract_boundary_loops(m);
  return m;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

void check(const std::string& obj, const std::string& seams, const std::vector<int>& pins) {
  PatternMesh m = load_pattern(obj, seams);
  MaterialParams mat;
  build_cloth(m, mat, pins);  // throws on inverted/degenerate elements
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: make_assets <output_dir>\n");
    return 2;
  }
  std::string dir = argv[1];
  std::filesystem::create_directories(dir);

  // Gradient-check strip: 4x4 patch dropped on the body's head, no pins.
  PatternMesh gstrip = make_grid(4, 4, 0.2, 0.2, [](double u, double v) {
    return Vec3(u - 0.1, v - 0.1, 1.80);
  });
  save_pattern(gstrip, dir + "/gstrip.obj", "");
  check(dir + "/gstrip.obj", "", {});

  // Cantilever strip: horizontal, one short edge pinned, droops under
  // gravity; the droop shape is the bending-compliance signal.
  PatternMesh strip = make_grid(3, 7, 0.12, 0.36, [](double u, double v) {
    return Vec3(u, v, 1.2);
  });
  save_pattern(strip, dir + "/strip.obj", "");
  check(dir + "/strip.obj", "", {0, 1, 2, 3, 4, 5});

  PatternMesh skirt = make_skirt(1.0, {1, 1, 1, 1});
  save_pattern(skirt, dir + "/skirt.obj", dir + "/skirt.seams");
  std::vector<int> waist_pins;
  for (int c = 0; c < 12; ++c) waist_pins.push_back(c);
  check(dir + "/skirt.obj", dir + "/skirt.seams", waist_pins);

  // Same skirt with deliberately mismatched panel heights: the paired seam
  // chains start out 8% different in length.
  PatternMesh skirt_p = make_skirt(1.0, {1.08, 0.92, 1.08, 0.92});
  save_pattern(skirt_p, dir + "/skirt_mismatch.obj", dir + "/skirt_mismatch.seams");
  check(dir + "/skirt_mismatch.obj", dir + "/skirt_mismatch.seams", waist_pins);

  PatternMesh top = make_top();
  save_pattern(top, dir + "/top.obj", dir + "/top.seams");
  std::vector<int> collar_pins;
  for (int c = 0; c < 8; ++c) collar_pins.push_back(c);
  check(dir + "/top.obj", dir + "/top.seams", collar_pins);

  BodyModel body = make_default_humanoid();
  save_body(body, dir + "/body.obj", dir + "/body.rig");

  write_file(dir + "/gradcheck.cfg",
             "paths.pattern = " + dir + "/gstrip.obj\n" +
             "paths.body_obj = " + dir + "/body.obj\n" +
             "paths.body_rig = " + dir + "/body.rig\n" +
             "material.weft = 2e-4\n"
             "material.warp = 2e-4\n"
             "material.shear = 5e-4\n"
             "material.bend = 1e-2\n"
             "sim.iterations = 60\n"
             "gradcheck.steps = 30\n");

  write_file(dir + "/strip.cfg",
             "paths.pattern = " + dir + "/strip.obj\n" +
             "scene.pins = 0,1,2,3,4,5\n"
             "material.bend = 5e2\n"
             "opt.material = true\n"
             "opt.rate_material = 0.1\n"
             "opt.max_iterations = 100\n");

  write_file(dir + "/skirt.cfg",
             "paths.pattern = " + dir + "/skirt.obj\n" +
             "paths.seams = " + dir + "/skirt.seams\n" +
             "paths.body_obj = " + dir + "/body.obj\n" +
             "paths.body_rig = " + dir + "/body.rig\n" +
             "scene.pins = 0,1,2,3,4,5,6,7,8,9,10,11\n"
             "opt.pattern = true\n"
             "opt.mode = cage\n"
             "opt.max_iterations = 150\n");

  write_file(dir + "/top.cfg",
             "paths.pattern = " + dir + "/top.obj\n" +
             "paths.seams = " + dir + "/top.seams\n" +
             "scene.pins = 0,1,2,3,4,5,6,7\n"
             "opt.pattern = true\n"
             "opt.mode = cage\n"
             "opt.max_iterations = 40\n");

  std::printf("assets written to %s\n", dir.c_str());
  return 0;
}
