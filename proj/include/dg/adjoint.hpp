#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dg/sim.hpp"
#include "dg/types.hpp"

namespace dg {

// Everything the time-stepper's implicit relation can pass a gradient to.
struct GradientBundle {
  VecX d_xbar;                 // 2 per pattern vertex (rest coordinates)
  double d_compliance_weft = 0.0;
  double d_compliance_warp = 0.0;
  double d_compliance_shear = 0.0;
  double d_bending = 0.0;
  VecX d_body;                 // 3 per body vertex, via contacts

  GradientBundle() = default;
  GradientBundle(int pattern_verts, int body_verts)
      : d_xbar(VecX::Zero(2 * pattern_verts)), d_body(VecX::Zero(3 * body_verts)) {}
};

struct AdjointOptions {
  // Mass depends on the rest shape; disable to drop that chain from d_xbar
  // (the compliance-only sensitivity).
  bool mass_term = true;
  double damping = 0.998;  // must match the forward options
  double dt = 1.0 / 60.0;
};

// Backpropagates d(loss)/d(final position) through the whole trajectory.
// Each step solves the transposed linearization of the implicit system
//   x = x_pred + M^-1 grad C(x)^T lambda,  C(x) + alpha_tilde lambda = 0
// with a sparse direct factorization, then accumulates parameter terms
//   dL/ds += p^T d(x rhs)/ds - q^T (dC/ds + d(alpha_tilde)/ds lambda).
// Clamped-off contacts (lambda == 0) are treated as absent.
GradientBundle adjoint_sweep(const Cloth& cloth, const PosedBody* body,
                             const Trajectory& traj, const VecX& dloss_dx_final,
                             const AdjointOptions& opts);

// Central-difference comparison between an analytic gradient and a scalar
// function of a parameter vector.
struct FDEntry {
  int index;
  double analytic;
  double numeric;
  double rel_error;  // |a - n| / max(|a|, |n|, floor)
};

struct FDReport {
  std::vector<FDEntry> entries;
  double max_rel_error = 0.0;
  double pass_tolerance = 0.0;
  bool passed = false;
};

FDReport finite_difference_check(const std::function<double(const VecX&)>& f, const VecX& x0,
                                 const VecX& analytic, double h, double tolerance,
                                 double abs_floor = 1e-10);

void print_fd_report(const FDReport& report, const std::string& label);

}  // namespace dg
