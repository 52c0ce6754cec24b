#pragma once

#include <array>
#include <string>
#include <vector>

#include "dg/types.hpp"

namespace dg {

struct Joint {
  std::string name;
  int parent = -1;      // -1 for root
  Vec3 rest_pos = Vec3::Zero();
};

// Minimal parametric body: shaped rest mesh + skeleton with linear blend
// skinning. Pose vector layout: [root translation (3)] then per joint
// [3 intrinsic-XYZ Euler angles], then per joint [1 bone length scale
// offset] (length factor = 1 + offset).
struct BodyModel {
  std::vector<Vec3> verts0;
  std::vector<std::array<int, 3>> faces;
  std::vector<Joint> joints;
  std::vector<std::vector<std::pair<int, double>>> weights;  // per vertex (joint, w), sums to 1
  std::vector<std::vector<Vec3>> shape_basis;                // K fields of size |verts0|

  int num_vertices() const { return static_cast<int>(verts0.size()); }
  int num_joints() const { return static_cast<int>(joints.size()); }
  int num_shape() const { return static_cast<int>(shape_basis.size()); }
  int pose_dim() const { return 3 + 4 * num_joints(); }
};

struct ClosestPoint {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::Zero();   // outward, unit
  int face = -1;
  Vec3 bary = Vec3::Zero();
  double signed_dist = 0.0;     // negative inside
};

// Posed body with an AABB tree for closest-point queries. Immutable after
// construction; queries are thread-safe.
class PosedBody {
 public:
  PosedBody(std::vector<Vec3> verts, std::vector<std::array<int, 3>> faces);

  ClosestPoint closest_point(const Vec3& query) const;
  ClosestPoint closest_point_brute(const Vec3& query) const;

  const std::vector<Vec3>& verts() const { return verts_; }
  const std::vector<std::array<int, 3>>& faces() const { return faces_; }
  const Vec3& face_normal(int f) const { return face_normals_[f]; }

 private:
  struct Node {
    Vec3 lo, hi;
    int left = -1, right = -1;   // children, or
    int begin = 0, end = 0;      // leaf face range
  };
  int build(int begin, int end);
  void query(int node, const Vec3& q, double& best, int& best_face, Vec3& best_p,
             Vec3& best_bary) const;

  std::vector<Vec3> verts_;
  std::vector<std::array<int, 3>> faces_;
  std::vector<Vec3> face_normals_;
  std::vector<Vec3> vertex_normals_;  // angle-weighted, for sign tests
  std::vector<int> order_;            // face permutation for the tree
  std::vector<Node> nodes_;
  int root_ = -1;
};

std::vector<Vec3> body_shape(const BodyModel& body, const VecX& nu);

// Global joint frames for a pose: rotation R_j and origin p_j.
struct JointFrames {
  std::vector<Mat3> R;
  std::vector<Vec3> p;
};
JointFrames pose_joints(const BodyModel& body, const VecX& psi);

std::vector<Vec3> body_skin(const BodyModel& body, const std::vector<Vec3>& rest_verts,
                            const VecX& psi);

PosedBody pose_body(const BodyModel& body, const VecX& nu, const VecX& psi);

// Analytic Jacobians of posed vertex positions. d_nu is 3Vb x K, d_psi is
// 3Vb x P (vertex-major rows: vertex i occupies rows 3i..3i+2).
void body_jacobians(const BodyModel& body, const VecX& nu, const VecX& psi,
                    MatX* d_nu, MatX* d_psi);

struct FitOptions {
  int iterations = 200;
  double rate_nu = 0.05;
  double rate_psi = 0.05;
  double angle_limit = 1.2;      // radians, box clamp on joint angles
  double length_limit = 0.3;     // clamp on bone length offsets
  bool fit_nu = true;
  bool fit_psi = true;
};

// Gradient descent with backtracking on the symmetric Chamfer distance
// between posed body vertices and the target cloud.
struct FitResult {
  VecX nu, psi;
  double chamfer = 0.0;
  int iterations_used = 0;
  bool diverged = false;
};
FitResult init_fit(const BodyModel& body, const std::vector<Vec3>& target, VecX nu0,
                   VecX psi0, const FitOptions& opts = {});

BodyModel load_body(const std::string& obj_path, const std::string& rig_path);
void save_body(const BodyModel& body, const std::string& obj_path, const std::string& rig_path);

// Bundled stylized humanoid: star-shaped watertight blob, 12 joints,
// 4 shape basis fields (scale, girth, height, shoulder width).
BodyModel make_default_humanoid();

}  // namespace dg
