#include "dg/constraints.hpp"

#include <cmath>

namespace dg {

namespace {
// dD/dx_m coefficient matrix: row m, column k of Dbar edge layout.
constexpr double kEdgeCoeff[3][2] = {{1, 0}, {0, 1}, {-1, -1}};
}  // namespace

Mat32 deformation_gradient(const Vec3& x0, const Vec3& x1, const Vec3& x2,
                           const Mat2& Dbar_inv) {
  Mat32 D;
  D.col(0) = x0 - x2;
  D.col(1) = x1 - x2;
  return D * Dbar_inv;
}

Vec3 green_strain(const Mat32& F) {
  return Vec3(0.5 * (F.col(0).squaredNorm() - 1.0), 0.5 * (F.col(1).squaredNorm() - 1.0),
              0.5 * F.col(0).dot(F.col(1)));
}

StrainJet strain_jet(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Mat2& Dbar_inv) {
  StrainJet jet;
  jet.F = deformation_gradient(x0, x1, x2, Dbar_inv);
  jet.C = green_strain(jet.F);
  // G_{ma} = sum_k kEdgeCoeff[m][k] * Dbar_inv(k, a)
  for (int m = 0; m < 3; ++m)
    for (int a = 0; a < 2; ++a)
      jet.G(m, a) = kEdgeCoeff[m][0] * Dbar_inv(0, a) + kEdgeCoeff[m][1] * Dbar_inv(1, a);
  for (int m = 0; m < 3; ++m) {
    jet.grad[0][m] = jet.G(m, 0) * jet.F.col(0);
    jet.grad[1][m] = jet.G(m, 1) * jet.F.col(1);
    jet.grad[2][m] = 0.5 * (jet.G(m, 0) * jet.F.col(1) + jet.G(m, 1) * jet.F.col(0));
  }
  return jet;
}

double strain_hessian_scalar(const StrainJet& jet, int comp, int m, int p) {
  switch (comp) {
    case 0: return jet.G(m, 0) * jet.G(p, 0);
    case 1: return jet.G(m, 1) * jet.G(p, 1);
    default: return 0.5 * (jet.G(m, 0) * jet.G(p, 1) + jet.G(m, 1) * jet.G(p, 0));
  }
}

RestShapeDerivs rest_shape_derivs(const Mat32& D, const Mat2& Dbar_inv) {
  RestShapeDerivs rd;
  for (int m = 0; m < 3; ++m)
    for (int n = 0; n < 2; ++n) {
      // E = dDbar/dxbar_{m,n}: E(r,c) = delta_{r n} * kEdgeCoeff[m][c]
      Mat2 E = Mat2::Zero();
      for (int c = 0; c < 2; ++c) E(n, c) = kEdgeCoeff[m][c];
      rd.dB[m][n] = -Dbar_inv * E * Dbar_inv;
      rd.dF[m][n] = D * rd.dB[m][n];
      for (int mv = 0; mv < 3; ++mv)
        for (int a = 0; a < 2; ++a)
          rd.dG[m][n](mv, a) =
              kEdgeCoeff[mv][0] * rd.dB[m][n](0, a) + kEdgeCoeff[mv][1] * rd.dB[m][n](1, a);
    }
  return rd;
}

double strain_rest_grad(const StrainJet& jet, const RestShapeDerivs& rd, int comp, int m,
                        int n) {
  const Mat32& dF = rd.dF[m][n];
  switch (comp) {
    case 0: return jet.F.col(0).dot(dF.col(0));
    case 1: return jet.F.col(1).dot(dF.col(1));
    default: return 0.5 * (dF.col(0).dot(jet.F.col(1)) + jet.F.col(0).dot(dF.col(1)));
  }
}

Vec3 strain_mixed_deriv(const StrainJet& jet, const RestShapeDerivs& rd, int comp, int mv,
                        int m, int n) {
  const Mat32& dF = rd.dF[m][n];
  const Mat32& dG = rd.dG[m][n];
  switch (comp) {
    case 0: return dG(mv, 0) * jet.F.col(0) + jet.G(mv, 0) * dF.col(0);
    case 1: return dG(mv, 1) * jet.F.col(1) + jet.G(mv, 1) * dF.col(1);
    default:
      return 0.5 * (dG(mv, 0) * jet.F.col(1) + jet.G(mv, 0) * dF.col(1) +
                    dG(mv, 1) * jet.F.col(0) + jet.G(mv, 1) * dF.col(0));
  }
}

double dihedral_angle(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Vec3& x3) {
  Vec3 e = x1 - x0;
  Vec3 n1 = e.cross(x2 - x0);
  Vec3 n2 = (x3 - x0).cross(e);
  double el = e.norm();
  if (el < 1e-15) return 0.0;
  Vec3 eh = e / el;
  return std::atan2(n1.cross(n2).dot(eh), n1.dot(n2));
}

bool dihedral_gradient(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Vec3& x3,
                       std::array<Vec3, 4>& grad) {
  Vec3 e = x1 - x0;
  Vec3 n1 = e.cross(x2 - x0);   // face (x0, x1, x2)
  Vec3 n2 = (x3 - x0).cross(e); // face (x1, x0, x3)
  double a1 = n1.norm(), a2 = n2.norm();
  double el = e.norm();
  if (a1 < 2e-12 || a2 < 2e-12 || el < 1e-12) return false;
  // Standard hinge-angle gradient: the opposite vertices move the angle
  // along their face normals; the edge endpoints take the complementary
  // share given by the projections t of the opposite vertices onto the edge.
  Vec3 g2 = -(el / (a1 * a1)) * n1;
  Vec3 g3 = -(el / (a2 * a2)) * n2;
  double t2 = (x2 - x0).dot(e) / (el * el);
  double t3 = (x3 - x0).dot(e) / (el * el);
  grad[2] = g2;
  grad[3] = g3;
  grad[0] = -(1.0 - t2) * g2 - (1.0 - t3) * g3;
  grad[1] = -t2 * g2 - t3 * g3;
  return true;
}

bool dihedral_hessian(const Vec3& x0, const Vec3& x1, const Vec3& x2, const Vec3& x3,
                      Eigen::Matrix<double, 12, 12>& H, double h) {
  std::array<Vec3, 4> x = {x0, x1, x2, x3};
  std::array<Vec3, 4> gp, gm;
  for (int col = 0; col < 12; ++col) {
    std::array<Vec3, 4> xp = x, xm = x;
    xp[col / 3][col % 3] += h;
    xm[col / 3][col % 3] -= h;
    if (!dihedral_gradient(xp[0], xp[1], xp[2], xp[3], gp)) return false;
    if (!dihedral_gradient(xm[0], xm[1], xm[2], xm[3], gm)) return false;
    for (int row = 0; row < 12; ++row)
      H(row, col) = (gp[row / 3][row % 3] - gm[row / 3][row % 3]) / (2.0 * h);
  }
  // symmetrize away finite-difference noise
  H = 0.5 * (H + H.transpose()).eval();
  return true;
}

}  // namespace dg
