#pragma once

#include <string>
#include <vector>

#include "dg/pattern.hpp"
#include "dg/types.hpp"

namespace dg {

// Control cage of one panel: handles on the outer boundary loop plus the
// mean-value weight matrix tying every pattern vertex of the panel to them.
struct PanelCage {
  int panel = -1;
  std::vector<int> handles;        // pattern vertex indices, in loop order
  std::vector<int> panel_vertices; // all pattern vertices of this panel
  MatX W;                          // panel_vertices x handles, rows sum to 1
  std::vector<Vec2> zeta0;         // handle positions at initialization
};

struct ControlCage {
  std::vector<PanelCage> panels;
  int num_handles() const {
    int n = 0;
    for (const auto& p : panels) n += static_cast<int>(p.handles.size());
    return n;
  }
};

// Marks a loop vertex as a handle if it lies on the loop's convex hull or
// its turning angle deviates from straight by more than the threshold.
// Falls back to every ceil(len/8)-th vertex when fewer than 3 survive.
std::vector<int> select_handles(const std::vector<Vec2>& uv, const BoundaryLoop& loop,
                                double angle_threshold_deg = 10.0);

// Classic mean value coordinates of `points` w.r.t. the simple polygon
// `cage`. Points coincident with a cage vertex get indicator rows; points on
// a cage edge the two-endpoint interpolation. Points outside the polygon
// (beyond 1e-9) are an error.
MatX mvc_weights(const std::vector<Vec2>& points, const std::vector<Vec2>& cage);

// Builds cages for every panel of the mesh (outer loop only; hole vertices
// ride on the same weights).
ControlCage build_cage(const PatternMesh& mesh, double angle_threshold_deg = 10.0);

// Flat handle vector <-> per-panel positions. Layout: panels in order, per
// handle (x, y).
VecX cage_pack(const ControlCage& cage);

// Applies x_bar = W * zeta. Throws with the offending face list if the new
// rest pattern contains a non-positive-area triangle.
std::vector<Vec2> cage_deform(const ControlCage& cage, const PatternMesh& mesh,
                              const VecX& zeta);

// dphi/dzeta = W^T dphi/dx_bar, per panel. d_xbar is 2 entries per pattern
// vertex (same layout as PatternMesh::uv).
VecX cage_chain_gradient(const ControlCage& cage, const PatternMesh& mesh,
                         const VecX& d_xbar);

void save_cage(const ControlCage& cage, const std::string& path);

}  // namespace dg
