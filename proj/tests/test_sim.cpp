#include <cmath>
#include <random>

#include "dg/constraints.hpp"
#include "dg/sim.hpp"
#include "doctest.h"

using namespace dg;

namespace {

std::mt19937 rng(31);
double urand(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

// rows x cols vertex grid strip in the x-y plane, spacing h.
PatternMesh grid_pattern(int rows, int cols, double h = 0.05) {
  PatternMesh m;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) m.uv.emplace_back(c * h, r * h);
  for (int r = 0; r + 1 < rows; ++r)
    for (int c = 0; c + 1 < cols; ++c) {
      int a = r * cols + c, b = a + 1, d = a + cols, e = d + 1;
      m.faces.push_back({a, b, e});
      m.faces.push_back({a, e, d});
      m.face_panel.push_back(0);
      m.face_panel.push_back(0);
    }
  m.num_panels = 1;
  m.sim_vertex.resize(m.uv.size());
  for (size_t i = 0; i < m.uv.size(); ++i) m.sim_vertex[i] = static_cast<int>(i);
  m.num_sim_vertices = static_cast<int>(m.uv.size());
  m.rest_embedding.resize(m.uv.size());
  for (size_t i = 0; i < m.uv.size(); ++i)
    m.rest_embedding[i] = Vec3(m.uv[i].x(), m.uv[i].y(), 0.0);
  m.boundary_loops = extract_boundary_loops(m);
  return m;
}

SimState rest_state(const Cloth& cloth) {
  SimState s;
  s.x.resize(3 * cloth.nv());
  for (int i = 0; i < cloth.nv(); ++i)
    s.x.segment<3>(3 * i) = cloth.mesh.rest_embedding[i];
  s.v = VecX::Zero(3 * cloth.nv());
  return s;
}

}  // namespace

// ------------------------------------------------------------ xpbd_project

TEST_CASE("xpbd project: satisfied constraints with zero multipliers change nothing") {
  VecX x(6);
  x << 0, 0, 0, 1, 0, 0;
  VecX x0 = x;
  std::vector<ScalarConstraint> cs(1);
  cs[0].verts = {0, 1};
  cs[0].grads = {Vec3(-1, 0, 0), Vec3(1, 0, 0)};
  cs[0].C = 0.0;
  VecX lambda = VecX::Zero(1);
  VecX w = VecX::Ones(2);
  xpbd_project(x, cs, lambda, w, 4);
  CHECK((x - x0).norm() == 0.0);
  CHECK(lambda.norm() == 0.0);
}

TEST_CASE("xpbd project: a linear two-body constraint solves exactly in one iteration") {
  // Distance-along-x constraint C = x1 - x0 - 1 with unit masses; gradient
  // constant, so one projection lands on C = 0 and splits the correction.
  VecX x(6);
  x << 0, 0, 0, 1.4, 0, 0;
  std::vector<ScalarConstraint> cs(1);
  cs[0].verts = {0, 1};
  cs[0].grads = {Vec3(-1, 0, 0), Vec3(1, 0, 0)};
  cs[0].C = 0.4;
  VecX lambda = VecX::Zero(1);
  VecX w = VecX::Ones(2);
  xpbd_project(x, cs, lambda, w, 1);
  CHECK(x[0] == doctest::Approx(0.2).epsilon(1e-12));
  CHECK(x[3] == doctest::Approx(1.2).epsilon(1e-12));
  CHECK(lambda[0] == doctest::Approx(-0.2).epsilon(1e-12));
}

TEST_CASE("xpbd project: huge compliance means no correction") {
  VecX x(6);
  x << 0, 0, 0, 1.4, 0, 0;
  VecX x0 = x;
  std::vector<ScalarConstraint> cs(1);
  cs[0].verts = {0, 1};
  cs[0].grads = {Vec3(-1, 0, 0), Vec3(1, 0, 0)};
  cs[0].C = 0.4;
  cs[0].alpha_tilde = 1e12;
  VecX lambda = VecX::Zero(1);
  VecX w = VecX::Ones(2);
  xpbd_project(x, cs, lambda, w, 1);
  CHECK((x - x0).norm() < 1e-12);
}

TEST_CASE("xpbd project: all-pinned stencil is skipped, unilateral clamps lambda") {
  VecX x(6);
  x << 0, 0, 0, 1.4, 0, 0;
  VecX x0 = x;
  std::vector<ScalarConstraint> cs(1);
  cs[0].verts = {0, 1};
  cs[0].grads = {Vec3(-1, 0, 0), Vec3(1, 0, 0)};
  cs[0].C = 0.4;
  VecX lambda = VecX::Zero(1);
  VecX w0 = VecX::Zero(2);  // both pinned
  xpbd_project(x, cs, lambda, w0, 3);
  CHECK((x - x0).norm() == 0.0);

  // Unilateral separation: positive C wants negative lambda; clamp keeps 0.
  cs[0].unilateral = true;
  VecX w = VecX::Ones(2);
  lambda.setZero();
  xpbd_project(x, cs, lambda, w, 3);
  CHECK(lambda[0] == 0.0);
  CHECK((x - x0).norm() == 0.0);
}

TEST_CASE("xpbd project conserves momentum for translation-invariant constraints") {
  // Strain constraint gradients sum to zero over the stencil, so with equal
  // finite masses sum(m dx) = dlambda * sum(grad) = 0.
  Mat2 Dbar;
  Dbar << 1, 0, 0, 1;
  Vec3 p0(0.1, 0, 0), p1(1.2, 0.1, 0.3), p2(0, 0.9, -0.2);
  StrainJet jet = strain_jet(p0, p1, p2, Dbar.inverse());

  VecX x(9);
  x << p0, p1, p2;
  VecX masses(3);
  masses << 0.2, 0.5, 1.7;
  VecX w = masses.cwiseInverse();
  for (int c = 0; c < 3; ++c) {
    std::vector<ScalarConstraint> cs(1);
    cs[0].verts = {0, 1, 2};
    cs[0].grads = {jet.grad[c][0], jet.grad[c][1], jet.grad[c][2]};
    cs[0].C = jet.C[c];
    VecX lambda = VecX::Zero(1);
    VecX xi = x;
    xpbd_project(xi, cs, lambda, w, 1);
    Vec3 dp = Vec3::Zero();
    for (int m = 0; m < 3; ++m)
      dp += masses[m] * Vec3(xi.segment<3>(3 * m) - x.segment<3>(3 * m));
    double scale = 0.0;
    for (int m = 0; m < 3; ++m)
      scale += masses[m] * Vec3(xi.segment<3>(3 * m) - x.segment<3>(3 * m)).norm();
    CHECK(dp.norm() <= 1e-9 * std::max(scale, 1e-30));
  }
}

// -------------------------------------------------------------------- step

TEST_CASE("step: rigid translation advances positions by dt times velocity exactly") {
  Cloth cloth = build_cloth(grid_pattern(2, 3), MaterialParams{});
  cloth.gravity = Vec3::Zero();
  SimState s = rest_state(cloth);
  Vec3 v0(0.3, -0.2, 0.5);
  for (int i = 0; i < cloth.nv(); ++i) s.v.segment<3>(3 * i) = v0;
  SimOptions opts;
  opts.damping = 1.0;
  SimState n = step(cloth, nullptr, s, opts);
  for (int i = 0; i < cloth.nv(); ++i) {
    Vec3 expect = Vec3(s.x.segment<3>(3 * i)) + opts.dt * v0;
    CHECK((Vec3(n.x.segment<3>(3 * i)) - expect).norm() < 1e-12);
    CHECK((Vec3(n.v.segment<3>(3 * i)) - v0).norm() < 1e-12);
  }
}

TEST_CASE("step: free fall accumulates velocity n*dt*g over ten steps") {
  Cloth cloth = build_cloth(grid_pattern(2, 3), MaterialParams{});
  SimState s = rest_state(cloth);
  SimOptions opts;
  opts.damping = 1.0;
  for (int n = 0; n < 10; ++n) s = step(cloth, nullptr, s, opts);
  for (int i = 0; i < cloth.nv(); ++i)
    CHECK(s.v[3 * i + 2] == doctest::Approx(10 * opts.dt * -9.81).epsilon(1e-9));
}

TEST_CASE("step: pinned vertices never move") {
  Cloth cloth = build_cloth(grid_pattern(3, 6), MaterialParams{}, {0, 1, 2, 3, 4, 5});
  SimState s = rest_state(cloth);
  SimOptions opts;
  Vec3 pin0 = s.x.segment<3>(0);
  for (int n = 0; n < 25; ++n) s = step(cloth, nullptr, s, opts);
  for (int i = 0; i < 6; ++i) {
    CHECK((Vec3(s.x.segment<3>(3 * i)) - cloth.mesh.rest_embedding[i]).norm() == 0.0);
    CHECK(s.v.segment<3>(3 * i).norm() == 0.0);
  }
  CHECK((Vec3(s.x.segment<3>(0)) - pin0).norm() == 0.0);
  // Unpinned rows must have fallen.
  CHECK(s.x[3 * (2 * 6) + 2] < -1e-3);
}

TEST_CASE("step conserves total momentum of a free cloth with no external force") {
  Cloth cloth = build_cloth(grid_pattern(3, 4), MaterialParams{});
  cloth.gravity = Vec3::Zero();
  SimState s = rest_state(cloth);
  for (int i = 0; i < s.v.size(); ++i) s.v[i] = urand(-0.5, 0.5);
  // Bend the sheet so constraints actually fire.
  for (int i = 0; i < cloth.nv(); ++i) s.x[3 * i + 2] += 0.02 * std::sin(i * 1.3);

  VecX masses = cloth.inv_mass.cwiseInverse();
  Vec3 before = Vec3::Zero();
  for (int i = 0; i < cloth.nv(); ++i)
    before += masses[i] * Vec3(s.v.segment<3>(3 * i));

  SimOptions opts;
  opts.damping = 1.0;
  double moved = 0.0;
  for (int n = 0; n < 5; ++n) {
    SimState next = step(cloth, nullptr, s, opts);
    moved += (next.x - s.x).norm();
    s = next;
  }
  REQUIRE(moved > 1e-4);  // the test is vacuous if nothing happened
  Vec3 after = Vec3::Zero();
  double scale = 0.0;
  for (int i = 0; i < cloth.nv(); ++i) {
    after += masses[i] * Vec3(s.v.segment<3>(3 * i));
    scale += masses[i] * s.v.segment<3>(3 * i).norm();
  }
  CHECK((after - before).norm() <= 1e-9 * std::max(scale, 1e-30));
}

TEST_CASE("step: NaN input aborts with the step index in the message") {
  Cloth cloth = build_cloth(grid_pattern(2, 3), MaterialParams{});
  SimState s = rest_state(cloth);
  s.x[4] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(step(cloth, nullptr, s, SimOptions{}), std::runtime_error);
}

// ------------------------------------------------------------------- drape

TEST_CASE("drape: flat rest pattern with no gravity is already at equilibrium") {
  Cloth cloth = build_cloth(grid_pattern(4, 4), MaterialParams{});
  cloth.gravity = Vec3::Zero();
  SimState s = rest_state(cloth);
  SimOptions opts;
  Trajectory traj = drape_to_equilibrium(cloth, nullptr, s, opts);
  CHECK(traj.steps() <= 3);
  CHECK(max_strain(cloth, traj.states.back().x) < 1e-10);
}

TEST_CASE("drape: max_steps = 1 yields exactly two states") {
  Cloth cloth = build_cloth(grid_pattern(3, 3), MaterialParams{}, {0});
  SimOptions opts;
  opts.max_steps = 1;
  Trajectory traj = drape_to_equilibrium(cloth, nullptr, rest_state(cloth), opts);
  CHECK(traj.states.size() == 2);
  CHECK(traj.records.size() == 1);
}

TEST_CASE("drape: hanging pinned strip settles with bounded strain and decaying energy") {
  Cloth cloth = build_cloth(grid_pattern(8, 3, 0.04), MaterialParams{}, {0, 1, 2});
  SimOptions opts;
  Trajectory traj = drape_to_equilibrium(cloth, nullptr, rest_state(cloth), opts);
  REQUIRE(traj.steps() < opts.max_steps);  // actually settled

  CHECK(max_strain(cloth, traj.states.back().x) < 0.05);

  // Kinetic energy over the trailing quarter of the run trends down.
  auto kinetic = [&](const SimState& s) {
    double e = 0.0;
    for (int i = 0; i < cloth.nv(); ++i)
      if (cloth.inv_mass[i] > 0)
        e += 0.5 / cloth.inv_mass[i] * s.v.segment<3>(3 * i).squaredNorm();
    return e;
  };
  int n = static_cast<int>(traj.states.size());
  double early = 0.0, late = 0.0;
  for (int i = n / 2; i < 3 * n / 4; ++i) early += kinetic(traj.states[i]);
  for (int i = 3 * n / 4; i < n; ++i) late += kinetic(traj.states[i]);
  CHECK(late < early);
}

TEST_CASE("drape throws on divergence") {
  Cloth cloth = build_cloth(grid_pattern(3, 3), MaterialParams{}, {0});
  SimState s = rest_state(cloth);
  s.v.setConstant(50.0);
  SimOptions opts;
  opts.divergence_speed = 10.0;
  CHECK_THROWS_AS(drape_to_equilibrium(cloth, nullptr, s, opts), std::runtime_error);
}

// ------------------------------------------------------------ replay/body

TEST_CASE("replaying stored states through step reproduces the trajectory to 1e-12") {
  Cloth cloth = build_cloth(grid_pattern(6, 3, 0.04), MaterialParams{}, {0, 1, 2});
  SimOptions opts;
  opts.max_steps = 40;
  Trajectory traj = drape_to_equilibrium(cloth, nullptr, rest_state(cloth), opts);
  REQUIRE(traj.steps() >= 10);
  for (int n = 0; n < traj.steps(); ++n) {
    SimState redo = step(cloth, nullptr, traj.states[n], opts, nullptr, n);
    CHECK((redo.x - traj.states[n + 1].x).lpNorm<Eigen::Infinity>() < 1e-12);
    CHECK((redo.v - traj.states[n + 1].v).lpNorm<Eigen::Infinity>() < 1e-12);
  }
}

TEST_CASE("frozen-contact replay satisfies the implicit step system exactly") {
  // Drape a small sheet onto the bundled body, freeze the contact structure,
  // and re-run in frozen mode: the polished steps must stay on the recorded
  // trajectory's contact set and keep every active contact at C >= -1e-6.
  BodyModel body = make_default_humanoid();
  PosedBody posed = pose_body(body, VecX::Zero(body.num_shape()),
                              VecX::Zero(body.pose_dim()));
  PatternMesh pat = grid_pattern(4, 4, 0.05);
  // Center the sheet above the head (head sphere tops out near z = 1.58).
  for (auto& v : pat.rest_embedding) v += Vec3(-0.075, -0.075, 1.75);
  Cloth cloth = build_cloth(pat, MaterialParams{});
  SimState s;
  s.x.resize(3 * cloth.nv());
  for (int i = 0; i < cloth.nv(); ++i) s.x.segment<3>(3 * i) = pat.rest_embedding[i];
  s.v = VecX::Zero(3 * cloth.nv());

  SimOptions opts;
  opts.max_steps = 120;
  Trajectory traj = drape_to_equilibrium(cloth, &posed, s, opts);
  bool touched = false;
  for (const auto& rec : traj.records) touched |= !rec.contacts.empty();
  REQUIRE(touched);

  // No active contact penetrates beyond 1e-6 at the end.
  const VecX& xf = traj.states.back().x;
  for (int i = 0; i < cloth.nv(); ++i) {
    ClosestPoint cp = posed.closest_point(xf.segment<3>(3 * i));
    CHECK(cp.signed_dist > cloth.material.thickness - 1e-6);
  }

  FrozenContacts frozen = freeze_contacts(traj);
  SimOptions fopts = opts;
  fopts.frozen = &frozen;
  Trajectory ftraj;
  ftraj.states.push_back(traj.states[0]);
  SimState cur = traj.states[0];
  for (int n = 0; n < traj.steps(); ++n) {
    cur = step(cloth, &posed, cur, fopts, nullptr, n);
    ftraj.states.push_back(cur);
  }
  // Frozen replay solves each step to the exact implicit system while the
  // recorded run is iterative, so the paths differ by the solver residual
  // scale; they must still track each other.
  CHECK((ftraj.states.back().x - traj.states.back().x).lpNorm<Eigen::Infinity>() < 5e-3);
}

TEST_CASE("material validation rejects nonsense") {
  MaterialParams bad;
  bad.density = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::runtime_error);
  MaterialParams neg;
  neg.compliance_shear = -1.0;
  CHECK_THROWS_AS(neg.validate(), std::runtime_error);
}
