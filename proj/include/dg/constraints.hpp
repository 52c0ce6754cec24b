#pragma once

#include <array>

#include "dg/types.hpp"

namespace dg {

// F = [x0-x2 | x1-x2] * Dbar_inv, the 3x2 map from pattern space to world.
Mat32 deformation_gradient(const Vec3& x0, const Vec3& x1, const Vec3& x2,
                           const Mat2& Dbar_inv);

// Green strain components [eps00, eps11, eps01] of F.
Vec3 green_strain(const Mat32& F);

// Strain constraint block of one face: C = [eps00, eps11, eps01] with
// gradients w.r.t. the three 3D stencil vertices. grad[c][m] is the gradient
// of component c w.r.t. vertex m.
struct StrainJet {
  Vec3 C;
  std::array<std::array<Vec3, 3>, 3> grad;
  Mat32 F;
  Mat32 G;  // d F(.,a) / d x_m coefficients, G = T * Dbar_inv
};

StrainJet strain_jet(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Mat2& Dbar_inv);

// Hessian of strain component c: d2C/dx_m dx_p = h * I3; returns scalar h.
double strain_hessian_scalar(const StrainJet& jet, int comp, int m, int p);

// dF/dxbar for one rest vertex coordinate (vertex m in {0,1,2}, component n
// in {0,1}); the full third-order tensor of the appendix formula.
struct RestShapeDerivs {
  // per (m, n): dB = d(Dbar_inv), dF, dG
  std::array<std::array<Mat2, 2>, 3> dB;
  std::array<std::array<Mat32, 2>, 3> dF;
  std::array<std::array<Mat32, 2>, 3> dG;
};

RestShapeDerivs rest_shape_derivs(const Mat32& D, const Mat2& Dbar_inv);

// dC_comp/dxbar_{m,n} given the jet and rest derivatives.
double strain_rest_grad(const StrainJet& jet, const RestShapeDerivs& rd, int comp, int m, int n);

// d(grad_x C_comp w.r.t. stencil vertex mv)/dxbar_{m,n}
Vec3 strain_mixed_deriv(const StrainJet& jet, const RestShapeDerivs& rd, int comp, int mv,
                        int m, int n);

// Signed dihedral angle of the hinge (x0, x1) shared edge with opposite
// vertices x2 (face x0,x1,x2) and x3 (face x1,x0,x3). Zero when coplanar.
double dihedral_angle(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Vec3& x3);

// Analytic angle gradient; sums to zero over the stencil. Returns false for
// a degenerate hinge (either face area below 1e-12).
bool dihedral_gradient(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Vec3& x3,
                       std::array<Vec3, 4>& grad);

// 12x12 Hessian of the hinge angle via central differences of the analytic
// gradient.
bool dihedral_hessian(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Vec3& x3,
                      Eigen::Matrix<double, 12, 12>& H, double h = 1e-6);

}  // namespace dg
