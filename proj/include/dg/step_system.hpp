#pragma once

#include <vector>

#include "dg/constraints.hpp"
#include "dg/sim.hpp"

namespace dg {

// One implicit step solves, for the unknowns (x, lambda),
//   F1 = x - x_pred - M^-1 grad C(x)^T lambda = 0
//   F2 = C(x) + diag(alpha_tilde) lambda      = 0.
// This header exposes the linearization shared by the Newton refinement of
// the forward step and by the adjoint solve, which needs its transpose.

enum class RowKind { Strain, Hinge, Contact };

struct StepSystemRow {
  RowKind kind;
  int owner;  // face, hinge or contact index
  int comp;   // strain component for Strain rows
  double lambda;
  double alpha_tilde;
};

struct StepSystem {
  // Row order: the 3 strain components of every face first (row 3*f + c),
  // then active hinges, then active contacts.
  std::vector<StepSystemRow> rows;
  std::vector<StrainJet> jets;                   // per face, at x
  std::vector<std::array<Vec3, 4>> hinge_grad;   // per hinge, valid where row >= 0
  std::vector<int> hinge_row;                    // -1: skipped or degenerate
  std::vector<int> contact_row;                  // -1: clamped off
  SpMat A;  // [[I - K, -M^-1 G^T], [G, diag(alpha_tilde)]], K = M^-1 sum lambda_j H_j
};

StepSystem build_step_system(const Cloth& cloth, const VecX& x, const VecX& lam_strain,
                             const VecX& lam_hinge, const std::vector<Contact>& contacts,
                             const std::vector<char>& hinge_skipped,
                             const double at_strain[3], double at_bend);

// Newton iteration on (F1, F2) from the current iterate, treating every row
// as an equality (callers pass the frozen-replay constraint set). Updates x
// and the multipliers in place; returns the final residual infinity norm.
double newton_polish(const Cloth& cloth, const VecX& x_pred, VecX& x, VecX& lam_strain,
                     VecX& lam_hinge, std::vector<Contact>& contacts,
                     const std::vector<char>& hinge_skipped, const double at_strain[3],
                     double at_bend, double contact_offset, double tol, int max_iters);

}  // namespace dg
