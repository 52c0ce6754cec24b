#include <cmath>
#include <random>

#include "dg/loss.hpp"
#include "dg/pattern.hpp"
#include "doctest.h"

using namespace dg;

namespace {

std::mt19937 rng(7);
double urand(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}
Vec3 rvec3(double s = 1.0) { return Vec3(urand(-s, s), urand(-s, s), urand(-s, s)); }

// One square panel, two triangles, all four vertices on the boundary loop.
PatternMesh square_mesh() {
  PatternMesh m;
  m.uv = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)};
  m.faces = {{0, 1, 2}, {0, 2, 3}};
  m.face_panel = {0, 0};
  m.num_panels = 1;
  m.sim_vertex = {0, 1, 2, 3};
  m.num_sim_vertices = 4;
  m.rest_embedding = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(1, 1, 0), Vec3(0, 1, 0)};
  m.boundary_loops = extract_boundary_loops(m);
  return m;
}

// Two square panels sewn along one edge pair: panel 0's right edge (pattern
// vertices 1->2) to panel 1's left edge (pattern vertices 4->7); the sewn
// vertices share sim vertices 1 and 2.
PatternMesh seamed_mesh() {
  PatternMesh m;
  m.uv = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1),
          Vec2(1.2, 0), Vec2(2.2, 0), Vec2(2.2, 1), Vec2(1.2, 1)};
  m.faces = {{0, 1, 2}, {0, 2, 3}, {4, 5, 6}, {4, 6, 7}};
  m.face_panel = {0, 0, 1, 1};
  m.num_panels = 2;
  m.sim_vertex = {0, 1, 2, 3, 1, 4, 5, 2};
  m.num_sim_vertices = 6;
  m.rest_embedding = {Vec3(0, 0, 0), Vec3(1, 0, 0),   Vec3(1, 1, 0),
                      Vec3(0, 1, 0), Vec3(2, 0, 0.2), Vec3(2, 1, 0.2)};
  SeamPair s;
  s.panel_a = 0;
  s.panel_b = 1;
  s.side_a = {1, 2};
  s.side_b = {4, 7};
  m.seams = {s};
  m.boundary_loops = extract_boundary_loops(m);
  return m;
}

VecX flat_embedding(const PatternMesh& m) {
  VecX x = VecX::Zero(3 * m.num_sim_vertices);
  for (int i = 0; i < m.num_sim_vertices; ++i)
    x.segment<3>(3 * i) = m.rest_embedding[i];
  return x;
}

VecX uv_vec(const std::vector<Vec2>& uv) {
  VecX v(2 * uv.size());
  for (size_t i = 0; i < uv.size(); ++i) v.segment<2>(2 * i) = uv[i];
  return v;
}

}  // namespace

// ---------------------------------------------------------------- boundary

TEST_CASE("boundary loss: vertices exactly on the target polyline give zero") {
  PatternMesh m = square_mesh();
  VecX x = flat_embedding(m);
  auto loops = garment_boundary_loops(m);
  REQUIRE(loops.size() == 1);
  TargetGarment t;
  t.interior = {Vec3(0.5, 0.5, 0)};
  std::vector<Vec3> poly;
  for (int vi : loops[0]) poly.push_back(x.segment<3>(3 * vi));
  t.boundaries = {poly};
  VecX g = VecX::Zero(x.size());
  CHECK(boundary_loss(m, x, t, &g) == 0.0);
  CHECK(g.norm() == 0.0);
}

TEST_CASE("boundary loss: one vertex at distance d contributes d^2 with gradient 2d toward the foot") {
  PatternMesh m = square_mesh();
  VecX x = flat_embedding(m);
  auto loops = garment_boundary_loops(m);
  TargetGarment t;
  t.interior = {Vec3(0.5, 0.5, 0)};
  std::vector<Vec3> poly;
  for (int vi : loops[0]) poly.push_back(x.segment<3>(3 * vi));
  t.boundaries = {poly};

  const double d = 0.07;
  // Lift one vertex off the plane: foot stays its original position
  // (interior of the incident segments, perpendicular offset).
  x[3 * 1 + 2] += d;
  VecX g = VecX::Zero(x.size());
  double loss = boundary_loss(m, x, t, &g);
  const int count = static_cast<int>(loops[0].size());
  CHECK(loss == doctest::Approx(d * d / count).epsilon(1e-12));
  Vec3 gv = g.segment<3>(3 * 1);
  CHECK(gv.norm() == doctest::Approx(2.0 * d / count).epsilon(1e-12));
  CHECK(gv[2] > 0.0);  // pushes back toward the foot when descending
}

TEST_CASE("boundary loss: gradient matches finite differences") {
  PatternMesh m = square_mesh();
  VecX x = flat_embedding(m);
  auto loops = garment_boundary_loops(m);
  TargetGarment t;
  t.interior = {Vec3(0.5, 0.5, 0)};
  std::vector<Vec3> poly;
  for (int vi : loops[0]) poly.push_back(Vec3(x.segment<3>(3 * vi)) + 0.02 * rvec3());
  t.boundaries = {poly};
  for (int i = 0; i < x.size(); ++i) x[i] += urand(-0.03, 0.03);

  VecX g = VecX::Zero(x.size());
  boundary_loss(m, x, t, &g);
  const double h = 1e-6;
  for (int i = 0; i < x.size(); ++i) {
    VecX xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    double num = (boundary_loss(m, xp, t, nullptr) - boundary_loss(m, xm, t, nullptr)) /
                 (2 * h);
    CHECK(g[i] == doctest::Approx(num).epsilon(1e-6));
  }
}

TEST_CASE("boundary loss: loop/polyline count mismatch is an error") {
  PatternMesh m = square_mesh();
  VecX x = flat_embedding(m);
  TargetGarment t;
  t.interior = {Vec3(0, 0, 0)};
  t.boundaries = {};  // garment has one loop
  CHECK_THROWS_AS(boundary_loss(m, x, t, nullptr), std::runtime_error);
}

// ----------------------------------------------------------------- chamfer

TEST_CASE("interior chamfer: identical point sets give zero") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 40; ++i) pts.push_back(rvec3());
  VecX x(3 * pts.size());
  for (size_t i = 0; i < pts.size(); ++i) x.segment<3>(3 * i) = pts[i];
  KdTree3 tree(pts);
  VecX g = VecX::Zero(x.size());
  CHECK(interior_chamfer(x, tree, &g) == 0.0);
  CHECK(g.norm() == 0.0);
}

TEST_CASE("interior chamfer: two single points at distance d give 2 d^2") {
  const double d = 0.37;
  VecX x(3);
  x << 0.0, 0.0, 0.0;
  KdTree3 tree({Vec3(d, 0, 0)});
  CHECK(interior_chamfer(x, tree, nullptr) == doctest::Approx(2 * d * d).epsilon(1e-14));
}

TEST_CASE("interior chamfer: gradient matches finite differences") {
  std::vector<Vec3> target;
  for (int i = 0; i < 25; ++i) target.push_back(rvec3());
  KdTree3 tree(target);
  VecX x(3 * 12);
  for (int i = 0; i < x.size(); ++i) x[i] = urand(-1, 1);

  VecX g = VecX::Zero(x.size());
  interior_chamfer(x, tree, &g);
  const double h = 1e-6;
  for (int i = 0; i < x.size(); ++i) {
    VecX xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    double num =
        (interior_chamfer(xp, tree, nullptr) - interior_chamfer(xm, tree, nullptr)) /
        (2 * h);
    CHECK(g[i] == doctest::Approx(num).epsilon(1e-5));
  }
}

TEST_CASE("kd-tree nearest neighbor equals brute force on 500x500 random points") {
  std::vector<Vec3> pts;
  for (int i = 0; i < 500; ++i) pts.push_back(rvec3(2.0));
  KdTree3 tree(pts);
  for (int q = 0; q < 500; ++q) {
    Vec3 p = rvec3(2.5);
    CHECK(tree.nearest(p) == tree.nearest_brute(p));
  }
}

TEST_CASE("interior chamfer is exactly symmetric when the clouds have equal size") {
  const int n = 30;
  std::vector<Vec3> a, b;
  for (int i = 0; i < n; ++i) {
    a.push_back(rvec3());
    b.push_back(rvec3());
  }
  VecX xa(3 * n), xb(3 * n);
  for (int i = 0; i < n; ++i) {
    xa.segment<3>(3 * i) = a[i];
    xb.segment<3>(3 * i) = b[i];
  }
  double ab = interior_chamfer(xa, KdTree3(b), nullptr);
  double ba = interior_chamfer(xb, KdTree3(a), nullptr);
  CHECK(ab == ba);  // bit-exact by construction
}

// -------------------------------------------------------------------- seam

TEST_CASE("seam loss: matching paired edge lengths give zero") {
  PatternMesh m = seamed_mesh();
  VecX g = VecX::Zero(2 * m.uv.size());
  CHECK(seam_length_loss(m, m.uv, false, &g) == 0.0);
  CHECK(seam_length_loss(m, m.uv, true, nullptr) == 0.0);
  CHECK(g.norm() == 0.0);
}

TEST_CASE("seam loss: signed variant reproduces 1.1^2 - 1.0^2 = 0.21") {
  PatternMesh m = seamed_mesh();
  std::vector<Vec2> uv = m.uv;
  uv[2] = Vec2(1.0, 1.1);  // side_a edge 1->2 now length 1.1, side_b still 1.0
  CHECK(seam_length_loss(m, uv, true, nullptr) ==
        doctest::Approx(1.1 * 1.1 - 1.0).epsilon(1e-14));
  double diff = 1.1 * 1.1 - 1.0;
  CHECK(seam_length_loss(m, uv, false, nullptr) ==
        doctest::Approx(diff * diff).epsilon(1e-14));
}

TEST_CASE("seam loss: gradient matches finite differences") {
  PatternMesh m = seamed_mesh();
  for (bool sgn : {false, true}) {
    std::vector<Vec2> uv = m.uv;
    for (auto& p : uv) p += Vec2(urand(-0.05, 0.05), urand(-0.05, 0.05));
    VecX g = VecX::Zero(2 * uv.size());
    seam_length_loss(m, uv, sgn, &g);
    const double h = 1e-6;
    for (size_t i = 0; i < uv.size(); ++i)
      for (int c = 0; c < 2; ++c) {
        std::vector<Vec2> up = uv, um = uv;
        up[i][c] += h;
        um[i][c] -= h;
        double num = (seam_length_loss(m, up, sgn, nullptr) -
                      seam_length_loss(m, um, sgn, nullptr)) /
                     (2 * h);
        CHECK(g[2 * i + c] == doctest::Approx(num).epsilon(1e-8));
      }
  }
}

// --------------------------------------------------------------- curvature

TEST_CASE("curvature loss: identical pattern gives zero") {
  PatternMesh m = square_mesh();
  VecX g = VecX::Zero(2 * m.uv.size());
  CHECK(curvature_loss(m, m.uv, m.uv, &g) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(g.norm() < 1e-14);
}

TEST_CASE("curvature loss: global rotation plus uniform scale of the template gives zero") {
  PatternMesh m = square_mesh();
  double s = 1.37, th = 0.8;
  Mat2 R;
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  std::vector<Vec2> uv(m.uv.size());
  for (size_t i = 0; i < uv.size(); ++i) uv[i] = s * (R * m.uv[i]) + Vec2(0.3, -0.2);
  CHECK(curvature_loss(m, uv, m.uv, nullptr) < 1e-28);
}

TEST_CASE("curvature loss: same similarity on both patterns rescales by s^2, on one pattern it does not") {
  PatternMesh m = seamed_mesh();
  std::vector<Vec2> uv = m.uv;
  for (auto& p : uv) p += Vec2(urand(-0.08, 0.08), urand(-0.08, 0.08));
  double base = curvature_loss(m, uv, m.uv, nullptr);
  REQUIRE(base > 1e-8);

  double s = 0.81, th = -0.5;
  Mat2 R;
  R << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  auto xf = [&](const std::vector<Vec2>& in) {
    std::vector<Vec2> out(in.size());
    for (size_t i = 0; i < in.size(); ++i) out[i] = s * (R * in[i]) + Vec2(1, 2);
    return out;
  };
  // The residuals are lengths, so a joint similarity with scale s multiplies
  // the loss by s^2 exactly; rotation and translation alone leave it fixed.
  double both = curvature_loss(m, xf(uv), xf(m.uv), nullptr);
  CHECK(both == doctest::Approx(s * s * base).epsilon(1e-10));
  double one = curvature_loss(m, xf(uv), m.uv, nullptr);
  CHECK(std::abs(one - base) > 1e-6 * base);
}

TEST_CASE("curvature loss: gradient matches finite differences on a perturbed loop") {
  PatternMesh m = seamed_mesh();
  std::vector<Vec2> uv = m.uv;
  for (auto& p : uv) p += Vec2(urand(-0.06, 0.06), urand(-0.06, 0.06));
  VecX g = VecX::Zero(2 * uv.size());
  curvature_loss(m, uv, m.uv, &g);
  const double h = 1e-6;
  for (size_t i = 0; i < uv.size(); ++i)
    for (int c = 0; c < 2; ++c) {
      std::vector<Vec2> up = uv, um = uv;
      up[i][c] += h;
      um[i][c] -= h;
      double num =
          (curvature_loss(m, up, m.uv, nullptr) - curvature_loss(m, um, m.uv, nullptr)) /
          (2 * h);
      CHECK(g[2 * i + c] == doctest::Approx(num).epsilon(1e-5));
    }
}

// ------------------------------------------------------------------- total

TEST_CASE("total loss: zero weights give zero value and zero partials") {
  PatternMesh m = seamed_mesh();
  VecX x = flat_embedding(m);
  for (int i = 0; i < x.size(); ++i) x[i] += urand(-0.05, 0.05);
  TargetGarment t;
  for (int i = 0; i < 20; ++i) t.interior.push_back(rvec3());
  auto loops = garment_boundary_loops(m);
  for (const auto& l : loops) {
    std::vector<Vec3> poly;
    for (int vi : l) poly.push_back(Vec3(x.segment<3>(3 * vi)) + 0.01 * rvec3());
    t.boundaries.push_back(poly);
  }
  KdTree3 tree(t.interior);
  LossConfig cfg;
  cfg.w_boundary = cfg.w_interior = cfg.alpha_seam = cfg.beta_curvature = 0.0;
  LossGrads lg = total_loss(m, x, m.uv, m.uv, t, tree, cfg);
  CHECK(lg.total == 0.0);
  CHECK(lg.d_x.norm() == 0.0);
  CHECK(lg.d_xbar.norm() == 0.0);
}

TEST_CASE("total loss: single-term config reproduces the weighted term; sum is linear") {
  PatternMesh m = seamed_mesh();
  VecX x = flat_embedding(m);
  for (int i = 0; i < x.size(); ++i) x[i] += urand(-0.05, 0.05);
  std::vector<Vec2> uv = m.uv;
  for (auto& p : uv) p += Vec2(urand(-0.04, 0.04), urand(-0.04, 0.04));
  TargetGarment t;
  for (int i = 0; i < 20; ++i) t.interior.push_back(rvec3());
  auto loops = garment_boundary_loops(m);
  for (const auto& l : loops) {
    std::vector<Vec3> poly;
    for (int vi : l) poly.push_back(Vec3(x.segment<3>(3 * vi)) + 0.01 * rvec3());
    t.boundaries.push_back(poly);
  }
  KdTree3 tree(t.interior);

  LossConfig only;
  only.w_boundary = 0.0;
  only.w_interior = 1.7;
  only.alpha_seam = 0.0;
  only.beta_curvature = 0.0;
  LossGrads lg = total_loss(m, x, uv, m.uv, t, tree, only);
  CHECK(lg.total == doctest::Approx(1.7 * interior_chamfer(x, tree, nullptr))
                        .epsilon(1e-14));

  LossConfig full;
  full.w_boundary = 0.9;
  full.w_interior = 1.3;
  full.alpha_seam = 0.2;
  full.beta_curvature = 0.4;
  LossGrads f = total_loss(m, x, uv, m.uv, t, tree, full);
  double parts = full.w_boundary * boundary_loss(m, x, t, nullptr) +
                 full.w_interior * interior_chamfer(x, tree, nullptr) +
                 full.alpha_seam * seam_length_loss(m, uv, false, nullptr) +
                 full.beta_curvature * curvature_loss(m, uv, m.uv, nullptr);
  CHECK(f.total == doctest::Approx(parts).epsilon(1e-12));
  CHECK(f.boundary >= 0.0);
  CHECK(f.interior >= 0.0);
  CHECK(f.seam >= 0.0);
  CHECK(f.curvature >= 0.0);
}

// ------------------------------------------------------------------ metric

TEST_CASE("metric chamfer: identical clouds give zero") {
  std::vector<Vec3> a;
  for (int i = 0; i < 30; ++i) a.push_back(rvec3());
  CHECK(metric_chamfer(a, a) == 0.0);
}

TEST_CASE("metric chamfer: small translation of a dense grid gives 2|t|^2") {
  std::vector<Vec3> a, b;
  Vec3 t(0.001, -0.002, 0.0015);
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) {
      Vec3 p(0.1 * i, 0.1 * j, 0.0);
      a.push_back(p);
      b.push_back(p + t);
    }
  CHECK(metric_chamfer(a, b) == doctest::Approx(2.0 * t.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("metric chamfer agrees with brute force on small inputs") {
  std::vector<Vec3> a, b;
  for (int i = 0; i < 17; ++i) a.push_back(rvec3());
  for (int i = 0; i < 23; ++i) b.push_back(rvec3());
  auto brute = [](const std::vector<Vec3>& p, const std::vector<Vec3>& q) {
    double s = 0.0;
    for (const auto& u : p) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& v : q) best = std::min(best, (u - v).squaredNorm());
      s += best;
    }
    return s / p.size();
  };
  CHECK(metric_chamfer(a, b) ==
        doctest::Approx(brute(a, b) + brute(b, a)).epsilon(1e-14));
}
