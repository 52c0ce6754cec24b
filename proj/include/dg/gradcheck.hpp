#pragma once

#include <map>
#include <string>
#include <vector>

#include "dg/adjoint.hpp"
#include "dg/scene.hpp"

namespace dg {

// Runs exactly `steps` steps (ignoring the quasi-equilibrium test),
// optionally with a frozen contact schedule.
Trajectory fixed_step_trajectory(const Cloth& cloth, const PosedBody* body,
                                 const SimState& initial, const SimOptions& opts, int steps,
                                 const FrozenContacts* frozen);

struct GradCheckOptions {
  int steps = 30;
  double tolerance = 1e-3;
  std::vector<double> hs = {1e-4, 1e-5, 1e-6};  // best h wins per coordinate
  bool mass_term = true;
  // Negative-control hook: corrupts the first analytic entry of every group
  // so the check must fail.
  bool corrupt_analytic = false;
};

struct GradCheckResult {
  // group name -> report with per-coordinate best-h relative errors
  std::map<std::string, FDReport> groups;
  bool passed = true;
};

// Compares adjoint gradients against central finite differences on the
// scene, group by group. Known groups: xbar, zeta, bend, stretch, nu, psi.
// The probe objective is a fixed quadratic in the final positions. Contacts
// are frozen from the unperturbed run so every evaluation solves the same
// constraint structure.
GradCheckResult run_gradcheck(const SceneBundle& scene, const std::vector<std::string>& groups,
                              const GradCheckOptions& opts);

}  // namespace dg
