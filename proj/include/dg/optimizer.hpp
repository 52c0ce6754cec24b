#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dg/adjoint.hpp"
#include "dg/body.hpp"
#include "dg/cage.hpp"
#include "dg/loss.hpp"
#include "dg/sim.hpp"
#include "dg/types.hpp"

namespace dg {

enum class PatternMode { Cage, Direct };

// Parameter groups of the co-optimization. Disabled groups are excluded
// from the flat packing and never change.
struct ParameterVector {
  VecX zeta;          // cage handle coordinates, or raw rest UVs in Direct mode
  VecX log_material;  // [log bend] or [log bend, log weft, log warp, log shear]
  VecX nu;
  VecX psi;
  bool use_pattern = false;
  bool use_material = false;
  bool use_nu = false;
  bool use_psi = false;

  VecX pack() const;
  void unpack(const VecX& flat);
  std::vector<std::pair<std::string, int>> offsets() const;  // (group, start)
};

struct OptimizerConfig {
  PatternMode pattern_mode = PatternMode::Cage;
  bool opt_pattern = false;
  bool opt_material = false;
  bool opt_nu = false;
  bool opt_psi = false;
  bool material_stretch = false;  // include stretch compliances in the group

  // Per-group step sizes; steps are normalized to unit infinity norm, so
  // these are the largest per-coefficient move per iteration (meters,
  // log-units, radians).
  double rate_pattern = 1e-3;
  double rate_material = 0.1;
  double rate_nu = 1e-2;
  double rate_psi = 1e-2;

  int max_iterations = 200;
  double grad_tol = 1e-6;
  int max_backtracks = 12;
  bool warm_start = true;
  bool mass_term = true;
};

struct IterationLog {
  double phi = 0.0;
  double boundary = 0.0, interior = 0.0, seam = 0.0, curvature = 0.0;
  double gnorm_pattern = 0.0, gnorm_material = 0.0, gnorm_nu = 0.0, gnorm_psi = 0.0;
  int backtracks = 0;
  int inversion_rejections = 0;
  bool accepted = false;
};

struct OptimizationReport {
  std::vector<IterationLog> iterations;
  double initial_phi = 0.0;
  double final_phi = 0.0;
  std::string stop_reason;
  QualityStats initial_quality;
  QualityStats final_quality;
  int total_inversion_rejections = 0;
  bool aborted = false;
  VecX final_x;  // equilibrium positions of the last accepted drape
};

struct OptimizeScene {
  Cloth* cloth = nullptr;                 // rest UVs and material are updated in place
  ControlCage* cage = nullptr;            // required in Cage mode
  const BodyModel* body = nullptr;        // optional
  VecX nu, psi;                           // updated in place via the report? returned in params
  const TargetGarment* target = nullptr;
  std::vector<Vec2> uv_template;          // curvature-loss reference
  SimOptions sim;
  LossConfig loss_cfg;
};

// Gradient descent over the enabled groups: drape to quasi-equilibrium,
// evaluate the loss, backpropagate, take a per-group normalized step with a
// shared backtracking factor. Steps that invert rest triangles are rejected
// and halved. Accepted loss values are non-increasing.
std::pair<ParameterVector, OptimizationReport> co_optimize(OptimizeScene& scene,
                                                           const OptimizerConfig& cfg);

// Initial state for the next drape: previous equilibrium positions, zero
// velocity. Throws if the vertex count changed.
SimState warm_start(const Trajectory& previous, int num_sim_vertices);

}  // namespace dg
