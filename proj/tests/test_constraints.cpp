#include <cmath>
#include <random>

#include "dg/constraints.hpp"
#include "doctest.h"

using namespace dg;

namespace {

std::mt19937 rng(42);
double urand(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

Vec3 rvec(double s = 1.0) { return Vec3(urand(-s, s), urand(-s, s), urand(-s, s)); }

// Non-degenerate random rest triangle.
Mat2 random_Dbar() {
  Mat2 D;
  do {
    D << urand(-1, 1), urand(-1, 1), urand(-1, 1), urand(-1, 1);
  } while (std::abs(D.determinant()) < 0.2);
  return D;
}

}  // namespace

TEST_CASE("deformation gradient: identity embedding gives zero strain") {
  Vec2 u0(0.3, 0.1), u1(0.9, 0.2), u2(0.4, 0.8);
  Mat2 D;
  D.col(0) = u0 - u2;
  D.col(1) = u1 - u2;
  Mat2 Binv = D.inverse();
  // Embed the rest triangle flat in 3D.
  Vec3 x0(u0.x(), u0.y(), 0), x1(u1.x(), u1.y(), 0), x2(u2.x(), u2.y(), 0);
  Mat32 F = deformation_gradient(x0, x1, x2, Binv);
  Vec3 eps = green_strain(F);
  CHECK(eps.norm() < 1e-14);
  CHECK((F.transpose() * F - Mat2::Identity()).norm() < 1e-14);
}

TEST_CASE("green strain: uniform stretch by s gives eps = (s^2-1)/2 on the diagonal") {
  Mat2 D = random_Dbar();
  Mat2 Binv = D.inverse();
  double s = 1.3;
  Vec3 x2 = rvec();
  Vec3 x0 = x2 + s * Vec3(D(0, 0), D(1, 0), 0);
  Vec3 x1 = x2 + s * Vec3(D(0, 1), D(1, 1), 0);
  Vec3 eps = green_strain(deformation_gradient(x0, x1, x2, Binv));
  double expect = 0.5 * (s * s - 1.0);
  CHECK(eps[0] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(eps[1] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(std::abs(eps[2]) < 1e-12);
}

TEST_CASE("strain jet gradients match finite differences") {
  for (int trial = 0; trial < 5; ++trial) {
    Mat2 Binv = random_Dbar().inverse();
    Vec3 x[3] = {rvec(), rvec(), rvec()};
    StrainJet jet = strain_jet(x[0], x[1], x[2], Binv);
    const double h = 1e-7;
    for (int c = 0; c < 3; ++c)
      for (int m = 0; m < 3; ++m)
        for (int a = 0; a < 3; ++a) {
          Vec3 xp[3] = {x[0], x[1], x[2]}, xm[3] = {x[0], x[1], x[2]};
          xp[m][a] += h;
          xm[m][a] -= h;
          double num = (green_strain(deformation_gradient(xp[0], xp[1], xp[2], Binv))[c] -
                        green_strain(deformation_gradient(xm[0], xm[1], xm[2], Binv))[c]) /
                       (2 * h);
          CHECK(jet.grad[c][m][a] == doctest::Approx(num).epsilon(1e-5));
        }
  }
}

TEST_CASE("strain gradients sum to zero over the stencil") {
  Mat2 Binv = random_Dbar().inverse();
  StrainJet jet = strain_jet(rvec(), rvec(), rvec(), Binv);
  for (int c = 0; c < 3; ++c) {
    Vec3 sum = jet.grad[c][0] + jet.grad[c][1] + jet.grad[c][2];
    CHECK(sum.norm() < 1e-12);
  }
}

TEST_CASE("strain hessian scalar matches finite differences of the gradient") {
  Mat2 Binv = random_Dbar().inverse();
  Vec3 x[3] = {rvec(), rvec(), rvec()};
  StrainJet jet = strain_jet(x[0], x[1], x[2], Binv);
  const double h = 1e-6;
  for (int c = 0; c < 3; ++c)
    for (int m = 0; m < 3; ++m)
      for (int p = 0; p < 3; ++p) {
        double hs = strain_hessian_scalar(jet, c, m, p);
        // d grad[c][m] / d x_p should be hs * I3.
        for (int a = 0; a < 3; ++a) {
          Vec3 xp[3] = {x[0], x[1], x[2]}, xm[3] = {x[0], x[1], x[2]};
          xp[p][a] += h;
          xm[p][a] -= h;
          Vec3 gp = strain_jet(xp[0], xp[1], xp[2], Binv).grad[c][m];
          Vec3 gm = strain_jet(xm[0], xm[1], xm[2], Binv).grad[c][m];
          Vec3 num = (gp - gm) / (2 * h);
          for (int b = 0; b < 3; ++b) {
            double expect = (a == b) ? hs : 0.0;
            CHECK(num[b] == doctest::Approx(expect).epsilon(1e-4).scale(1.0));
          }
        }
      }
}

TEST_CASE("rest derivative tensor: identity case by hand") {
  Mat2 D = Mat2::Identity();
  Mat2 Binv = Mat2::Identity();
  Mat32 D3;
  D3 << 1, 0, 0, 1, 0, 0;
  RestShapeDerivs rd = rest_shape_derivs(D3, Binv);
  // dF_00/d xbar_00 = -D_0k Binv_k0 Binv_00 = -1 for identity.
  CHECK(rd.dF[0][0](0, 0) == doctest::Approx(-1.0));
}

TEST_CASE("rest derivative tensor: finite difference oracle and sum rule") {
  for (int trial = 0; trial < 5; ++trial) {
    // Random rest triangle and random world positions.
    Vec2 u[3] = {{urand(-1, 1), urand(-1, 1)},
                 {urand(-1, 1), urand(-1, 1)},
                 {urand(-1, 1), urand(-1, 1)}};
    Mat2 D;
    D.col(0) = u[0] - u[2];
    D.col(1) = u[1] - u[2];
    if (std::abs(D.determinant()) < 0.2) continue;
    Vec3 x[3] = {rvec(), rvec(), rvec()};
    Mat32 D3;
    D3.col(0) = x[0] - x[2];
    D3.col(1) = x[1] - x[2];
    RestShapeDerivs rd = rest_shape_derivs(D3, D.inverse());

    const double h = 1e-7;
    for (int m = 0; m < 3; ++m)
      for (int n = 0; n < 2; ++n) {
        Vec2 up[3] = {u[0], u[1], u[2]}, um[3] = {u[0], u[1], u[2]};
        up[m][n] += h;
        um[m][n] -= h;
        Mat2 Dp, Dm;
        Dp.col(0) = up[0] - up[2];
        Dp.col(1) = up[1] - up[2];
        Dm.col(0) = um[0] - um[2];
        Dm.col(1) = um[1] - um[2];
        Mat32 Fp = D3 * Dp.inverse(), Fm = D3 * Dm.inverse();
        Mat32 num = (Fp - Fm) / (2 * h);
        CHECK((rd.dF[m][n] - num).cwiseAbs().maxCoeff() < 1e-6);
      }
    // Translation invariance in pattern space.
    for (int n = 0; n < 2; ++n)
      CHECK((rd.dF[0][n] + rd.dF[1][n] + rd.dF[2][n]).norm() < 1e-12);
  }
}

TEST_CASE("strain rest gradient matches finite differences") {
  Vec2 u[3] = {{0.1, 0.0}, {0.8, 0.15}, {0.35, 0.7}};
  Vec3 x[3] = {Vec3(0.12, 0.01, 0.05), Vec3(0.77, 0.2, -0.1), Vec3(0.3, 0.68, 0.2)};
  Mat2 D;
  D.col(0) = u[0] - u[2];
  D.col(1) = u[1] - u[2];
  Mat32 D3;
  D3.col(0) = x[0] - x[2];
  D3.col(1) = x[1] - x[2];
  StrainJet jet = strain_jet(x[0], x[1], x[2], D.inverse());
  RestShapeDerivs rd = rest_shape_derivs(D3, D.inverse());

  const double h = 1e-7;
  for (int c = 0; c < 3; ++c)
    for (int m = 0; m < 3; ++m)
      for (int n = 0; n < 2; ++n) {
        Vec2 up[3] = {u[0], u[1], u[2]}, um[3] = {u[0], u[1], u[2]};
        up[m][n] += h;
        um[m][n] -= h;
        auto eps_at = [&](Vec2* uu) {
          Mat2 DD;
          DD.col(0) = uu[0] - uu[2];
          DD.col(1) = uu[1] - uu[2];
          return green_strain(deformation_gradient(x[0], x[1], x[2], DD.inverse()))[c];
        };
        double num = (eps_at(up) - eps_at(um)) / (2 * h);
        CHECK(strain_rest_grad(jet, rd, c, m, n) == doctest::Approx(num).epsilon(1e-5));
      }
}

TEST_CASE("strain mixed derivative matches finite differences of the gradient") {
  Vec2 u[3] = {{0.0, 0.0}, {0.9, 0.1}, {0.3, 0.8}};
  Vec3 x[3] = {Vec3(0.05, 0.02, 0.1), Vec3(0.85, 0.05, -0.07), Vec3(0.25, 0.9, 0.15)};
  Mat2 D;
  D.col(0) = u[0] - u[2];
  D.col(1) = u[1] - u[2];
  Mat32 D3;
  D3.col(0) = x[0] - x[2];
  D3.col(1) = x[1] - x[2];
  StrainJet jet = strain_jet(x[0], x[1], x[2], D.inverse());
  RestShapeDerivs rd = rest_shape_derivs(D3, D.inverse());

  const double h = 1e-7;
  for (int c = 0; c < 3; ++c)
    for (int mv = 0; mv < 3; ++mv)
      for (int m = 0; m < 3; ++m)
        for (int n = 0; n < 2; ++n) {
          Vec2 up[3] = {u[0], u[1], u[2]}, um[3] = {u[0], u[1], u[2]};
          up[m][n] += h;
          um[m][n] -= h;
          auto grad_at = [&](Vec2* uu) {
            Mat2 DD;
            DD.col(0) = uu[0] - uu[2];
            DD.col(1) = uu[1] - uu[2];
            return strain_jet(x[0], x[1], x[2], DD.inverse()).grad[c][mv];
          };
          Vec3 num = (grad_at(up) - grad_at(um)) / (2 * h);
          Vec3 an = strain_mixed_deriv(jet, rd, c, mv, m, n);
          CHECK((an - num).cwiseAbs().maxCoeff() < 1e-5);
        }
}

TEST_CASE("dihedral angle: coplanar is zero, right angle is pi/2") {
  Vec3 x0(0, 0, 0), x1(1, 0, 0);
  CHECK(dihedral_angle(x0, x1, Vec3(0.5, 1, 0), Vec3(0.5, -1, 0)) == doctest::Approx(0.0));
  double a = dihedral_angle(x0, x1, Vec3(0.5, 1, 0), Vec3(0.5, 0, 1));
  CHECK(std::abs(a) == doctest::Approx(M_PI / 2).epsilon(1e-12));
}

TEST_CASE("dihedral angle gradient matches finite differences and sums to zero") {
  for (int trial = 0; trial < 8; ++trial) {
    Vec3 x[4] = {rvec(), rvec(), rvec(), rvec()};
    std::array<Vec3, 4> grad;
    if (!dihedral_gradient(x[0], x[1], x[2], x[3], grad)) continue;
    Vec3 sum = grad[0] + grad[1] + grad[2] + grad[3];
    CHECK(sum.norm() < 1e-10);
    const double h = 1e-7;
    for (int m = 0; m < 4; ++m)
      for (int a = 0; a < 3; ++a) {
        Vec3 xp[4] = {x[0], x[1], x[2], x[3]}, xm[4] = {x[0], x[1], x[2], x[3]};
        xp[m][a] += h;
        xm[m][a] -= h;
        double num = (dihedral_angle(xp[0], xp[1], xp[2], xp[3]) -
                      dihedral_angle(xm[0], xm[1], xm[2], xm[3])) /
                     (2 * h);
        CHECK(grad[m][a] == doctest::Approx(num).epsilon(5e-5).scale(1.0));
      }
  }
}

TEST_CASE("dihedral hessian is symmetric and matches second differences") {
  Vec3 x[4] = {Vec3(0, 0, 0), Vec3(1, 0.1, 0), Vec3(0.4, 0.9, 0.2), Vec3(0.6, -0.8, 0.3)};
  Eigen::Matrix<double, 12, 12> H;
  REQUIRE(dihedral_hessian(x[0], x[1], x[2], x[3], H));
  CHECK((H - H.transpose()).cwiseAbs().maxCoeff() < 1e-7);

  const double h = 1e-5;
  for (int k = 0; k < 12; k += 5) {
    Vec3 xp[4] = {x[0], x[1], x[2], x[3]}, xm[4] = {x[0], x[1], x[2], x[3]};
    xp[k / 3][k % 3] += h;
    xm[k / 3][k % 3] -= h;
    std::array<Vec3, 4> gp, gm;
    REQUIRE(dihedral_gradient(xp[0], xp[1], xp[2], xp[3], gp));
    REQUIRE(dihedral_gradient(xm[0], xm[1], xm[2], xm[3], gm));
    for (int m = 0; m < 4; ++m)
      for (int a = 0; a < 3; ++a) {
        double num = (gp[m][a] - gm[m][a]) / (2 * h);
        CHECK(H(3 * m + a, k) == doctest::Approx(num).epsilon(1e-3).scale(1.0));
      }
  }
}

TEST_CASE("dihedral gradient rejects degenerate hinges") {
  std::array<Vec3, 4> grad;
  CHECK_FALSE(dihedral_gradient(Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0.5, 0, 0),
                                Vec3(0.5, 1, 0), grad));
}
