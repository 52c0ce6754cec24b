#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dg/body.hpp"
#include "dg/pattern.hpp"
#include "dg/types.hpp"

namespace dg {

struct MaterialParams {
  // XPBD compliances (inverse stiffness) for the orthotropic strain block
  // [eps00, eps11, eps01] and the hinge bending constraint.
  double compliance_weft = 1e-6;
  double compliance_warp = 1e-6;
  double compliance_shear = 5e-6;
  double bending_compliance = 1e-2;
  double density = 0.15;    // kg/m^2
  double thickness = 3e-3;  // collision offset r (m)

  void validate() const;
};

struct Hinge {
  int v0, v1, v2, v3;   // sim vertices; shared edge (v0, v1)
  double rest_angle = 0.0;
};

// Simulation-ready cloth: sewn mesh topology, rest matrices, masses, pins.
struct Cloth {
  PatternMesh mesh;
  RestShapeData rest;
  MaterialParams material;
  std::vector<Hinge> hinges;
  std::vector<char> pinned;  // per sim vertex
  VecX inv_mass;             // per sim vertex, 0 for pinned
  Vec3 gravity = Vec3(0, 0, -9.81);

  int nv() const { return mesh.num_sim_vertices; }
  int nf() const { return static_cast<int>(mesh.faces.size()); }
  int nh() const { return static_cast<int>(hinges.size()); }

  // Replaces the 2D rest coordinates and rebuilds rest matrices and masses.
  void set_rest_uv(const std::vector<Vec2>& uv);
};

Cloth build_cloth(const PatternMesh& mesh, const MaterialParams& material,
                  const std::vector<int>& pins = {});

struct SimState {
  VecX x, v;  // 3V
  int n = 0;
};

struct Contact {
  int vert = -1;
  int body_face = -1;
  Vec3 bary = Vec3::Zero();
  Vec3 n = Vec3::Zero();      // outward body normal at the contact
  Vec3 p = Vec3::Zero();      // body contact point
  double lambda = 0.0;
  bool frozen_equality = false;
};

struct StepRecord {
  VecX lambda_strain;  // 3 per face
  VecX lambda_hinge;   // 1 per hinge
  std::vector<char> hinge_skipped;
  std::vector<Contact> contacts;
};

struct Trajectory {
  std::vector<SimState> states;        // N+1 states
  std::vector<StepRecord> records;     // N records
  int steps() const { return static_cast<int>(records.size()); }
};

// Fixed per-step contact structure used by gradient checks: perturbed runs
// reuse the reference run's (vertex, face, barycentric, normal) and solve the
// contact as an equality, so the constraint is linear in cloth positions and
// body vertices. Only the foot point p = sum(bary_k * b_k) is re-evaluated.
struct FrozenContacts {
  std::vector<std::vector<Contact>> per_step;
};

FrozenContacts freeze_contacts(const Trajectory& traj);

struct SimOptions {
  double dt = 1.0 / 60.0;
  int iterations = 20;
  double damping = 0.998;          // velocity factor per step; 1 disables
  double v_tol = 1e-3;             // quasi-equilibrium speed threshold (m/s)
  int max_steps = 2000;
  double collision_margin = 2e-3;  // detection band beyond thickness
  double divergence_speed = 1e3;
  double resync_relax = 0.3;       // under-relaxation for the position resync
  const FrozenContacts* frozen = nullptr;
};

// One direct local XPBD projection pass over an ad-hoc constraint set. Solves
// (grad C M^-1 grad C^T + alpha_tilde) dlambda = -C - alpha_tilde lambda per
// constraint, Gauss-Seidel style. Exposed for unit tests; step() is the
// production path.
struct ScalarConstraint {
  std::vector<int> verts;
  std::vector<Vec3> grads;   // evaluated by the caller
  double C = 0.0;
  double alpha_tilde = 0.0;
  bool unilateral = false;   // clamp accumulated lambda >= 0
};
void xpbd_project(VecX& x, std::vector<ScalarConstraint>& constraints, VecX& lambda,
                  const VecX& inv_mass, int iterations);

// Advances one time step: predict, project constraints, velocity update with
// damping. Each solver iteration ends with a position resync
// x = x_pred + M^-1 grad C(x)^T lambda so the converged step satisfies the
// implicit system the backward pass differentiates. Throws on NaN.
SimState step(const Cloth& cloth, const PosedBody* body, const SimState& state,
              const SimOptions& opts, StepRecord* record = nullptr, int frozen_step_index = -1);

// Steps until max vertex speed < v_tol or max_steps. Records everything the
// adjoint needs. Throws on divergence.
Trajectory drape_to_equilibrium(const Cloth& cloth, const PosedBody* body,
                                const SimState& initial, const SimOptions& opts);

// Max |C| over strain components at the state.
double max_strain(const Cloth& cloth, const VecX& x);

void export_obj_sequence(const Cloth& cloth, const Trajectory& traj,
                         const std::string& dir_prefix);
void export_obj(const Cloth& cloth, const VecX& x, const std::string& path);

}  // namespace dg
