#pragma once

#include <array>
#include <string>
#include <vector>

#include "dg/types.hpp"

namespace dg {

// Paired boundary chains that get sewn together. Indices refer to pattern
// (2D) vertices; chains have equal vertex counts and run in sewing order.
struct SeamPair {
  int panel_a = -1;
  int panel_b = -1;
  std::vector<int> side_a;
  std::vector<int> side_b;
};

// Ordered boundary cycle of one panel. Outer loops are CCW in pattern space,
// interior hole loops CW (face-orientation induced). Starts at the lowest
// vertex index on the cycle.
struct BoundaryLoop {
  int panel = -1;
  bool outer = true;
  std::vector<int> vertices;  // pattern vertex indices, closed cycle
};

// A garment as a 2D sewing pattern sharing one 3D triangulation.
//
// Pattern vertices carry the 2D rest coordinates; seam vertices are
// duplicated per panel in pattern space but may map to the same 3D sim
// vertex (that identification is how panels are sewn). All lengths are in
// meters.
struct PatternMesh {
  std::vector<Vec2> uv;                    // 2D rest coordinates per pattern vertex
  std::vector<std::array<int, 3>> faces;   // pattern vertex index triples, CCW in 2D
  std::vector<int> face_panel;             // panel id per face
  int num_panels = 0;

  std::vector<int> sim_vertex;             // pattern vertex -> 3D sim vertex
  int num_sim_vertices = 0;
  std::vector<Vec3> rest_embedding;        // initial 3D position per sim vertex

  std::vector<SeamPair> seams;
  std::vector<BoundaryLoop> boundary_loops;

  std::array<int, 3> sim_face(int f) const {
    return {sim_vertex[faces[f][0]], sim_vertex[faces[f][1]], sim_vertex[faces[f][2]]};
  }
};

// Per-face rest matrices and lumped vertex masses.
struct RestShapeData {
  std::vector<Mat2> Dbar;       // columns (uv0-uv2, uv1-uv2)
  std::vector<Mat2> Dbar_inv;
  std::vector<double> area;     // 0.5*det(Dbar), strictly positive
  std::vector<double> mass;     // lumped mass per *sim* vertex (kg)
  double density = 0.0;         // kg/m^2
  double total_area = 0.0;
};

// Reads an OBJ (v = optional 3D embedding, vt = 2D rest coordinates,
// f = v/vt triples) plus an optional seam sidecar. Panels are connected
// components in pattern space. Throws std::runtime_error with the offending
// face/edge on invalid input.
PatternMesh load_pattern(const std::string& obj_path, const std::string& seam_path = "");

void save_pattern(const PatternMesh& mesh, const std::string& obj_path,
                  const std::string& seam_path = "");

// Recomputes boundary loops from faces. Non-manifold pattern edges (shared
// by more than two faces) are an error.
std::vector<BoundaryLoop> extract_boundary_loops(const PatternMesh& mesh);

// Boundary loops of the sewn 3D mesh (edges of the sim triangulation with a
// single incident face). Each loop is ordered and starts at its lowest sim
// vertex index.
std::vector<std::vector<int>> garment_boundary_loops(const PatternMesh& mesh);

RestShapeData build_rest_shape(const PatternMesh& mesh, double density);

// Conditioning quality 4*sqrt(3)*area / sum(edge^2): 1 for equilateral,
// 0 for degenerate. Scale invariant.
double triangle_quality(const Vec2& a, const Vec2& b, const Vec2& c);
double triangle_quality(const Vec3& a, const Vec3& b, const Vec3& c);

struct QualityStats {
  std::vector<double> per_face;
  double min = 0.0;
  double mean = 0.0;
};

QualityStats mesh_quality(const std::vector<Vec2>& uv,
                          const std::vector<std::array<int, 3>>& faces);

// Validates all PatternMesh invariants; throws on violation.
void validate_pattern(const PatternMesh& mesh);

}  // namespace dg
