#include "dg/sim.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "dg/constraints.hpp"
#include "dg/step_system.hpp"

namespace dg {

void MaterialParams::validate() const {
  if (compliance_weft < 0 || compliance_warp < 0 || compliance_shear < 0 ||
      bending_compliance < 0)
    throw std::runtime_error("negative compliance");
  if (density <= 0) throw std::runtime_error("density must be positive");
  if (thickness <= 0) throw std::runtime_error("thickness must be positive");
}

void Cloth::set_rest_uv(const std::vector<Vec2>& uv) {
  if (uv.size() != mesh.uv.size()) throw std::runtime_error("set_rest_uv: size mismatch");
  PatternMesh trial = mesh;
  trial.uv = uv;
  RestShapeData next = build_rest_shape(trial, material.density);  // throws on inversion
  mesh.uv = uv;
  rest = std::move(next);
  inv_mass.resize(nv());
  for (int i = 0; i < nv(); ++i)
    inv_mass[i] = pinned[i] ? 0.0 : 1.0 / rest.mass[i];
}

Cloth build_cloth(const PatternMesh& mesh, const MaterialParams& material,
                  const std::vector<int>& pins) {
  material.validate();
  Cloth c;
  c.mesh = mesh;
  c.material = material;
  c.rest = build_rest_shape(mesh, material.density);

  // Hinges: interior edges of the sewn 3D mesh, including across-seam edges.
  std::map<std::pair<int, int>, std::vector<std::pair<int, int>>> edge_faces;  // edge -> (face, opp)
  for (int f = 0; f < c.nf(); ++f) {
    auto sf = mesh.sim_face(f);
    for (int e = 0; e < 3; ++e) {
      int a = sf[e], b = sf[(e + 1) % 3], o = sf[(e + 2) % 3];
      auto key = std::minmax(a, b);
      edge_faces[{key.first, key.second}].push_back({f, o});
    }
  }
  for (auto& [edge, inc] : edge_faces) {
    if (inc.size() > 2) {
      std::ostringstream os;
      os << "non-manifold sewn edge (" << edge.first << ", " << edge.second << ")";
      throw std::runtime_error(os.str());
    }
    if (inc.size() == 2) {
      Hinge h;
      h.v0 = edge.first;
      h.v1 = edge.second;
      h.v2 = inc[0].second;
      h.v3 = inc[1].second;
      c.hinges.push_back(h);
    }
  }

  c.pinned.assign(mesh.num_sim_vertices, 0);
  for (int p : pins) {
    if (p < 0 || p >= mesh.num_sim_vertices) throw std::runtime_error("pin out of range");
    c.pinned[p] = 1;
  }
  c.inv_mass.resize(c.nv());
  for (int i = 0; i < c.nv(); ++i)
    c.inv_mass[i] = c.pinned[i] ? 0.0 : 1.0 / c.rest.mass[i];

  // Rest dihedral angles at the initial embedding.
  for (auto& h : c.hinges) {
    const auto& X = mesh.rest_embedding;
    h.rest_angle = dihedral_angle(X[h.v0], X[h.v1], X[h.v2], X[h.v3]);
  }
  return c;
}

void xpbd_project(VecX& x, std::vector<ScalarConstraint>& constraints, VecX& lambda,
                  const VecX& inv_mass, int iterations) {
  if (lambda.size() != static_cast<int>(constraints.size()))
    throw std::runtime_error("xpbd_project: lambda size mismatch");
  for (int it = 0; it < iterations; ++it) {
    for (size_t j = 0; j < constraints.size(); ++j) {
      auto& c = constraints[j];
      double wgg = 0.0;
      for (size_t k = 0; k < c.verts.size(); ++k)
        wgg += inv_mass[c.verts[k]] * c.grads[k].squaredNorm();
      double denom = wgg + c.alpha_tilde;
      if (denom < 1e-14) continue;
      double dl = (-c.C - c.alpha_tilde * lambda[j]) / denom;
      if (c.unilateral && lambda[j] + dl < 0.0) dl = -lambda[j];
      lambda[j] += dl;
      for (size_t k = 0; k < c.verts.size(); ++k)
        x.segment<3>(3 * c.verts[k]) += inv_mass[c.verts[k]] * dl * c.grads[k];
    }
  }
}

namespace {

Vec3 vert(const VecX& x, int i) { return x.segment<3>(3 * i); }

struct StepWork {
  std::vector<StrainJet> jets;                       // per face, at current x
  std::vector<std::array<Vec3, 4>> hinge_grads;      // per hinge
  std::vector<double> hinge_angle;
  std::vector<char> hinge_ok;
};

void refresh(const Cloth& cloth, const VecX& x, StepWork& w) {
  int nf = cloth.nf(), nh = cloth.nh();
  w.jets.resize(nf);
  w.hinge_grads.resize(nh);
  w.hinge_angle.resize(nh);
  w.hinge_ok.resize(nh);
  for (int f = 0; f < nf; ++f) {
    auto sf = cloth.mesh.sim_face(f);
    w.jets[f] = strain_jet(vert(x, sf[0]), vert(x, sf[1]), vert(x, sf[2]),
                           cloth.rest.Dbar_inv[f]);
  }
  for (int h = 0; h < nh; ++h) {
    const auto& hg = cloth.hinges[h];
    w.hinge_ok[h] = dihedral_gradient(vert(x, hg.v0), vert(x, hg.v1), vert(x, hg.v2),
                                      vert(x, hg.v3), w.hinge_grads[h]);
    w.hinge_angle[h] =
        w.hinge_ok[h]
            ? dihedral_angle(vert(x, hg.v0), vert(x, hg.v1), vert(x, hg.v2), vert(x, hg.v3))
            : 0.0;
  }
}

// x = x_pred + M^-1 grad C(x)^T lambda, gradients at the current x. Driving
// this to a fixed point is what makes the step exactly differentiable.
void resync(const Cloth& cloth, const VecX& x_pred, const StepWork& w,
            const VecX& lam_strain, const VecX& lam_hinge,
            const std::vector<Contact>& contacts, VecX& x, double omega) {
  VecX acc = VecX::Zero(x.size());
  for (int f = 0; f < cloth.nf(); ++f) {
    auto sf = cloth.mesh.sim_face(f);
    for (int c = 0; c < 3; ++c) {
      double l = lam_strain[3 * f + c];
      if (l == 0.0) continue;
      for (int m = 0; m < 3; ++m)
        acc.segment<3>(3 * sf[m]) += l * w.jets[f].grad[c][m];
    }
  }
  for (int h = 0; h < cloth.nh(); ++h) {
    if (!w.hinge_ok[h]) continue;
    double l = lam_hinge[h];
    if (l == 0.0) continue;
    const auto& hg = cloth.hinges[h];
    int vs[4] = {hg.v0, hg.v1, hg.v2, hg.v3};
    for (int m = 0; m < 4; ++m)
      acc.segment<3>(3 * vs[m]) += l * w.hinge_grads[h][m];
  }
  for (const auto& c : contacts) {
    if (c.lambda == 0.0) continue;
    acc.segment<3>(3 * c.vert) += c.lambda * c.n;
  }
  for (int i = 0; i < cloth.nv(); ++i) {
    if (cloth.inv_mass[i] == 0.0) continue;
    Vec3 target = x_pred.segment<3>(3 * i) + cloth.inv_mass[i] * acc.segment<3>(3 * i);
    x.segment<3>(3 * i) += omega * (target - x.segment<3>(3 * i));
  }
}

}  // namespace

SimState step(const Cloth& cloth, const PosedBody* body, const SimState& state,
              const SimOptions& opts, StepRecord* record, int frozen_step_index) {
  const int nv = cloth.nv();
  const double dt = opts.dt;
  const double dt2 = dt * dt;

  VecX x_pred = state.x;
  for (int i = 0; i < nv; ++i) {
    if (cloth.inv_mass[i] == 0.0) continue;
    x_pred.segment<3>(3 * i) +=
        dt * state.v.segment<3>(3 * i) + dt2 * cloth.gravity;
  }

  // Contact set, frozen for the step: (vertex, face, foot point, normal).
  std::vector<Contact> contacts;
  const double r = cloth.material.thickness;
  if (opts.frozen && frozen_step_index >= 0) {
    if (frozen_step_index < static_cast<int>(opts.frozen->per_step.size())) {
      for (Contact c : opts.frozen->per_step[frozen_step_index]) {
        c.lambda = 0.0;
        c.frozen_equality = true;
        const auto& bf = body->faces()[c.body_face];
        c.p = c.bary[0] * body->verts()[bf[0]] + c.bary[1] * body->verts()[bf[1]] +
              c.bary[2] * body->verts()[bf[2]];
        contacts.push_back(c);
      }
    }
  } else if (body) {
    for (int i = 0; i < nv; ++i) {
      if (cloth.inv_mass[i] == 0.0) continue;
      ClosestPoint cp = body->closest_point(vert(x_pred, i));
      if (cp.signed_dist < r + opts.collision_margin) {
        Contact c;
        c.vert = i;
        c.body_face = cp.face;
        c.bary = cp.bary;
        c.p = cp.point;
        c.n = cp.normal;
        contacts.push_back(c);
      }
    }
  }

  VecX lam_strain = VecX::Zero(3 * cloth.nf());
  VecX lam_hinge = VecX::Zero(cloth.nh());
  const double at_strain[3] = {cloth.material.compliance_weft / dt2,
                               cloth.material.compliance_warp / dt2,
                               cloth.material.compliance_shear / dt2};
  const double at_bend = cloth.material.bending_compliance / dt2;

  VecX x = x_pred;
  StepWork work;
  for (int it = 0; it < opts.iterations; ++it) {
    for (int f = 0; f < cloth.nf(); ++f) {
      auto sf = cloth.mesh.sim_face(f);
      StrainJet jet = strain_jet(vert(x, sf[0]), vert(x, sf[1]), vert(x, sf[2]),
                                 cloth.rest.Dbar_inv[f]);
      Mat3 A = Mat3::Zero();
      for (int a = 0; a < 3; ++a)
        for (int b = a; b < 3; ++b) {
          double s = 0.0;
          for (int m = 0; m < 3; ++m)
            s += cloth.inv_mass[sf[m]] * jet.grad[a][m].dot(jet.grad[b][m]);
          A(a, b) = A(b, a) = s;
        }
      for (int a = 0; a < 3; ++a) A(a, a) += at_strain[a];
      Vec3 rhs;
      for (int a = 0; a < 3; ++a)
        rhs[a] = -jet.C[a] - at_strain[a] * lam_strain[3 * f + a];
      Vec3 dl = A.ldlt().solve(rhs);
      for (int a = 0; a < 3; ++a) lam_strain[3 * f + a] += dl[a];
      for (int m = 0; m < 3; ++m) {
        Vec3 dx = Vec3::Zero();
        for (int a = 0; a < 3; ++a) dx += dl[a] * jet.grad[a][m];
        x.segment<3>(3 * sf[m]) += cloth.inv_mass[sf[m]] * dx;
      }
    }

    for (int h = 0; h < cloth.nh(); ++h) {
      const auto& hg = cloth.hinges[h];
      int vs[4] = {hg.v0, hg.v1, hg.v2, hg.v3};
      std::array<Vec3, 4> hgrad;
      if (!dihedral_gradient(vert(x, vs[0]), vert(x, vs[1]), vert(x, vs[2]), vert(x, vs[3]),
                             hgrad))
        continue;
      double wgg = 0.0;
      for (int m = 0; m < 4; ++m)
        wgg += cloth.inv_mass[vs[m]] * hgrad[m].squaredNorm();
      double denom = wgg + at_bend;
      if (denom < 1e-14) continue;
      double C = dihedral_angle(vert(x, vs[0]), vert(x, vs[1]), vert(x, vs[2]),
                                vert(x, vs[3])) -
                 hg.rest_angle;
      double dl = (-C - at_bend * lam_hinge[h]) / denom;
      lam_hinge[h] += dl;
      for (int m = 0; m < 4; ++m)
        x.segment<3>(3 * vs[m]) += cloth.inv_mass[vs[m]] * dl * hgrad[m];
    }

    for (auto& c : contacts) {
      double w = cloth.inv_mass[c.vert];
      if (w == 0.0) continue;
      double C = c.n.dot(vert(x, c.vert) - c.p) - r;
      double dl = -C / w;  // alpha = 0 for contacts
      if (!c.frozen_equality && c.lambda + dl < 0.0) dl = -c.lambda;
      c.lambda += dl;
      x.segment<3>(3 * c.vert) += w * dl * c.n;
    }

    // Fixed-point resync: re-anchor positions to the prediction through the
    // current multipliers with gradients at the updated configuration.
    // Under-relaxed: the full replacement is not contractive on stiff meshes
    // (the gradients rotate faster than the multipliers track them), but the
    // fixed point itself is unchanged, so the converged step still satisfies
    // x = x_pred + M^-1 grad C(x)^T lambda exactly.
    refresh(cloth, x, work);
    resync(cloth, x_pred, work, lam_strain, lam_hinge, contacts, x, opts.resync_relax);
  }

  // Frozen replay is the path the adjoint differentiates, and the adjoint is
  // exact only if (x, lambda) solve the implicit step system. Gauss-Seidel
  // alone leaves a residual far above gradient-check tolerance, so refine
  // with Newton on the full system (all contacts are equalities here).
  if (opts.frozen && frozen_step_index >= 0) {
    std::vector<char> hinge_skipped(work.hinge_ok.begin(), work.hinge_ok.end());
    for (auto& s : hinge_skipped) s = !s;
    double resid = newton_polish(cloth, x_pred, x, lam_strain, lam_hinge, contacts,
                                 hinge_skipped, at_strain, at_bend, r, 1e-12, 20);
    if (resid > 1e-9)
      throw std::runtime_error("step: implicit solve did not converge (residual " +
                               std::to_string(resid) + ")");
    refresh(cloth, x, work);
  }

  SimState next;
  next.x = x;
  next.v.resize(3 * nv);
  for (int i = 0; i < nv; ++i) {
    if (cloth.inv_mass[i] == 0.0)
      next.v.segment<3>(3 * i).setZero();
    else
      next.v.segment<3>(3 * i) =
          opts.damping * (x.segment<3>(3 * i) - state.x.segment<3>(3 * i)) / dt;
  }
  next.n = state.n + 1;

  // Inelastic contact response: the position projection alone would convert
  // penetration depth into an outgoing normal speed of depth/dt (perfect
  // restitution), so resting cloth bounces forever. Kill the normal velocity
  // of vertices that pushed against the body this step. Skipped in frozen
  // replay, which keeps contacts on the surface as equality constraints and
  // must stay an exact match for its adjoint.
  if (!(opts.frozen && frozen_step_index >= 0)) {
    for (const Contact& c : contacts) {
      if (c.lambda <= 0.0) continue;
      auto v = next.v.segment<3>(3 * c.vert);
      v -= c.n * c.n.dot(v);
    }
  }

  if (!next.x.allFinite() || !next.v.allFinite())
    throw std::runtime_error("step: non-finite state at step " + std::to_string(next.n));

  if (record) {
    record->lambda_strain = lam_strain;
    record->lambda_hinge = lam_hinge;
    record->hinge_skipped.assign(work.hinge_ok.begin(), work.hinge_ok.end());
    for (auto& s : record->hinge_skipped) s = !s;
    record->contacts = contacts;
  }
  return next;
}

FrozenContacts freeze_contacts(const Trajectory& traj) {
  FrozenContacts fc;
  fc.per_step.resize(traj.records.size());
  for (size_t n = 0; n < traj.records.size(); ++n)
    for (const Contact& c : traj.records[n].contacts)
      if (c.lambda > 0.0) fc.per_step[n].push_back(c);
  return fc;
}

Trajectory drape_to_equilibrium(const Cloth& cloth, const PosedBody* body,
                                const SimState& initial, const SimOptions& opts) {
  Trajectory traj;
  traj.states.push_back(initial);
  for (int n = 0; n < opts.max_steps; ++n) {
    StepRecord rec;
    SimState next = step(cloth, body, traj.states.back(), opts, &rec, n);
    traj.records.push_back(std::move(rec));
    traj.states.push_back(std::move(next));

    double vmax = 0.0;
    const VecX& v = traj.states.back().v;
    for (int i = 0; i < cloth.nv(); ++i)
      vmax = std::max(vmax, v.segment<3>(3 * i).norm());
    if (vmax > opts.divergence_speed)
      throw std::runtime_error("simulation diverged at step " + std::to_string(n + 1) +
                               " (max speed " + std::to_string(vmax) + ")");
    if (vmax < opts.v_tol) break;
  }
  return traj;
}

double max_strain(const Cloth& cloth, const VecX& x) {
  double m = 0.0;
  for (int f = 0; f < cloth.nf(); ++f) {
    auto sf = cloth.mesh.sim_face(f);
    Mat32 F = deformation_gradient(vert(x, sf[0]), vert(x, sf[1]), vert(x, sf[2]),
                                   cloth.rest.Dbar_inv[f]);
    Vec3 eps = green_strain(F);
    m = std::max(m, eps.cwiseAbs().maxCoeff());
  }
  return m;
}

void export_obj(const Cloth& cloth, const VecX& x, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(9);
  for (int i = 0; i < cloth.nv(); ++i)
    out << "v " << x[3 * i] << " " << x[3 * i + 1] << " " << x[3 * i + 2] << "\n";
  for (int f = 0; f < cloth.nf(); ++f) {
    auto sf = cloth.mesh.sim_face(f);
    out << "f " << sf[0] + 1 << " " << sf[1] + 1 << " " << sf[2] + 1 << "\n";
  }
}

void export_obj_sequence(const Cloth& cloth, const Trajectory& traj,
                         const std::string& dir_prefix) {
  std::filesystem::create_directories(std::filesystem::path(dir_prefix).parent_path().empty()
                                          ? "."
                                          : std::filesystem::path(dir_prefix).parent_path());
  for (size_t n = 0; n < traj.states.size(); ++n) {
    std::ostringstream name;
    name << dir_prefix << "_" << n << ".obj";
    export_obj(cloth, traj.states[n].x, name.str());
  }
}

}  // namespace dg
