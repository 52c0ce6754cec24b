#pragma once

#include <string>
#include <vector>

#include "dg/pattern.hpp"
#include "dg/types.hpp"

namespace dg {

// Exact nearest-neighbor search over a fixed 3D point cloud.
class KdTree3 {
 public:
  explicit KdTree3(std::vector<Vec3> points);

  // Returns the point index minimizing distance to q; brute-force tie
  // behavior (lowest index wins on exact ties).
  int nearest(const Vec3& q) const;
  int nearest_brute(const Vec3& q) const;

  const std::vector<Vec3>& points() const { return pts_; }

 private:
  struct Node {
    int axis = -1;
    double split = 0.0;
    int left = -1, right = -1;
    int begin = 0, end = 0;  // leaf range into order_
  };
  int build(int begin, int end, int depth);
  void query(int node, const Vec3& q, double& best, int& best_idx) const;

  std::vector<Vec3> pts_;
  std::vector<int> order_;
  std::vector<Node> nodes_;
  int root_ = -1;
};

// Scan-side optimization target: an interior point cloud plus labeled
// boundary polylines (closed, one per garment boundary loop, in the order
// garment_boundary_loops() reports them).
struct TargetGarment {
  std::vector<Vec3> interior;
  std::vector<std::vector<Vec3>> boundaries;
};

TargetGarment load_target(const std::string& path);
void save_target(const TargetGarment& target, const std::string& path);

struct LossConfig {
  double w_boundary = 1.0;
  double w_interior = 1.0;
  double alpha_seam = 0.1;
  double beta_curvature = 0.1;
  // Accumulate raw per-edge length-squared differences instead of squaring
  // them (sign cancellation allowed).
  bool seam_signed = false;
};

struct LossGrads {
  double total = 0.0;
  double boundary = 0.0;
  double interior = 0.0;
  double seam = 0.0;
  double curvature = 0.0;
  VecX d_x;     // 3 per sim vertex (boundary + interior terms)
  VecX d_xbar;  // 2 per pattern vertex (seam + curvature regularizers)
};

// Mean squared distance from each garment boundary-loop vertex to its
// labeled target polyline. The foot point is treated as fixed for the
// gradient (exact to first order).
double boundary_loss(const PatternMesh& mesh, const VecX& x, const TargetGarment& target,
                     VecX* d_x);

// Symmetric Chamfer: mean over garment vertices of the squared distance to
// the nearest target point, plus mean over target points of the squared
// distance to the nearest garment vertex. Matches are fixed for the
// gradient.
double interior_chamfer(const VecX& x, const KdTree3& target_tree, VecX* d_x);

// Rest-space regularizer: edges sewn together should keep matching lengths.
// Default is sum over seam edge pairs of (|e|^2 - |e'|^2)^2.
double seam_length_loss(const PatternMesh& mesh, const std::vector<Vec2>& uv,
                        bool signed_sum, VecX* d_uv);

// Rest-space regularizer penalizing boundary curvature change relative to a
// template: per boundary vertex, fit the least-squares scaled rotation T
// from the template edge pair to the current one and accumulate
// |(e1 - T et1) + (e2 - T et2)|^2. Gradient is fully analytic (T is linear
// in the positions).
double curvature_loss(const PatternMesh& mesh, const std::vector<Vec2>& uv,
                      const std::vector<Vec2>& uv_template, VecX* d_uv);

// Full objective; tree must be built over target.interior.
LossGrads total_loss(const PatternMesh& mesh, const VecX& x, const std::vector<Vec2>& uv,
                     const std::vector<Vec2>& uv_template, const TargetGarment& target,
                     const KdTree3& target_tree, const LossConfig& cfg);

// Symmetric Chamfer distance (mean squared, both directions) between two
// clouds; reporting metric.
double metric_chamfer(const std::vector<Vec3>& a, const std::vector<Vec3>& b);

}  // namespace dg
