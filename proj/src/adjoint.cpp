#include "dg/adjoint.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "dg/constraints.hpp"
#include "dg/step_system.hpp"

namespace dg {

namespace {

Vec3 vert(const VecX& x, int i) { return x.segment<3>(3 * i); }

}  // namespace

GradientBundle adjoint_sweep(const Cloth& cloth, const PosedBody* body,
                             const Trajectory& traj, const VecX& dloss_dx_final,
                             const AdjointOptions& opts) {
  const int nv = cloth.nv();
  const int nf = cloth.nf();
  const int np = static_cast<int>(cloth.mesh.uv.size());
  const int nb = body ? static_cast<int>(body->verts().size()) : 0;
  const int N = traj.steps();
  const double dt = opts.dt;
  const double dt2 = dt * dt;

  if (dloss_dx_final.size() != 3 * nv)
    throw std::runtime_error("adjoint_sweep: gradient size mismatch");

  GradientBundle g(np, nb);

  const double at_strain[3] = {cloth.material.compliance_weft / dt2,
                               cloth.material.compliance_warp / dt2,
                               cloth.material.compliance_shear / dt2};
  const double at_bend = cloth.material.bending_compliance / dt2;

  VecX xhat = dloss_dx_final;
  VecX vhat = VecX::Zero(3 * nv);

  for (int n = N - 1; n >= 0; --n) {
    const VecX& x = traj.states[n + 1].x;
    const StepRecord& rec = traj.records[n];

    // Active rows and their gradients/Hessian contributions at x_{n+1}.
    StepSystem sys = build_step_system(cloth, x, rec.lambda_strain, rec.lambda_hinge,
                                       rec.contacts, rec.hinge_skipped, at_strain, at_bend);
    const std::vector<StrainJet>& jets = sys.jets;
    const std::vector<int>& hinge_row = sys.hinge_row;
    const std::vector<int>& contact_row = sys.contact_row;
    const int m = static_cast<int>(sys.rows.size());
    const int dim = 3 * nv + m;

    SpMat At = SpMat(sys.A.transpose());

    VecX rhs = VecX::Zero(dim);
    for (int i = 0; i < nv; ++i) {
      double di = cloth.inv_mass[i] == 0.0 ? 0.0 : opts.damping;
      rhs.segment<3>(3 * i) =
          xhat.segment<3>(3 * i) + (di / dt) * vhat.segment<3>(3 * i);
    }

    Eigen::SparseLU<SpMat> lu;
    lu.compute(At);
    if (lu.info() != Eigen::Success)
      throw std::runtime_error("adjoint_sweep: singular step system at step " +
                               std::to_string(n));
    VecX z = lu.solve(rhs);
    VecX p = z.head(3 * nv);
    VecX q = z.tail(m);

    // Rest-shape terms: -q^T dC/dxbar + p^T M^-1 d(grad C^T lambda)/dxbar.
    for (int f = 0; f < nf; ++f) {
      auto sf = cloth.mesh.sim_face(f);
      const auto& pv = cloth.mesh.faces[f];
      Mat32 D;
      D.col(0) = vert(x, sf[0]) - vert(x, sf[2]);
      D.col(1) = vert(x, sf[1]) - vert(x, sf[2]);
      RestShapeDerivs rd = rest_shape_derivs(D, cloth.rest.Dbar_inv[f]);
      for (int mm = 0; mm < 3; ++mm)
        for (int nn = 0; nn < 2; ++nn) {
          double acc = 0.0;
          for (int c = 0; c < 3; ++c) {
            acc -= q[3 * f + c] * strain_rest_grad(jets[f], rd, c, mm, nn);
            double lam = rec.lambda_strain[3 * f + c];
            if (lam == 0.0) continue;
            for (int mv = 0; mv < 3; ++mv) {
              double w = cloth.inv_mass[sf[mv]];
              if (w == 0.0) continue;
              acc += lam * w *
                     p.segment<3>(3 * sf[mv])
                         .dot(strain_mixed_deriv(jets[f], rd, c, mv, mm, nn));
            }
          }
          g.d_xbar[2 * pv[mm] + nn] += acc;
        }
    }

    if (opts.mass_term) {
      // Total constraint impulse per vertex from the step identity
      // M (x_{n+1} - x_pred) = grad C^T lambda.
      const VecX& x0 = traj.states[n].x;
      const VecX& v0 = traj.states[n].v;
      VecX s = VecX::Zero(nv);  // p_i . g_i * d(1/m_i)/dm scale
      for (int i = 0; i < nv; ++i) {
        double w = cloth.inv_mass[i];
        if (w == 0.0) continue;
        Vec3 xpred = x0.segment<3>(3 * i) + dt * v0.segment<3>(3 * i) + dt2 * cloth.gravity;
        Vec3 gi = (x.segment<3>(3 * i) - xpred) / w;
        s[i] = -p.segment<3>(3 * i).dot(gi) * w * w;  // times dm_i/dxbar below
      }
      const double rho3 = cloth.material.density / 3.0;
      for (int f = 0; f < nf; ++f) {
        auto sf = cloth.mesh.sim_face(f);
        double sv = s[sf[0]] + s[sf[1]] + s[sf[2]];
        if (sv == 0.0) continue;
        const Mat2& D = cloth.rest.Dbar[f];
        Mat2 adj;
        adj << D(1, 1), -D(0, 1), -D(1, 0), D(0, 0);
        const auto& pv = cloth.mesh.faces[f];
        for (int nn = 0; nn < 2; ++nn) {
          g.d_xbar[2 * pv[0] + nn] += sv * rho3 * 0.5 * adj(0, nn);
          g.d_xbar[2 * pv[1] + nn] += sv * rho3 * 0.5 * adj(1, nn);
          g.d_xbar[2 * pv[2] + nn] += sv * rho3 * 0.5 * (-adj(0, nn) - adj(1, nn));
        }
      }
    }

    // Compliance terms: d(alpha_tilde)/d(alpha) = 1/dt^2.
    for (int f = 0; f < nf; ++f) {
      g.d_compliance_weft -= q[3 * f + 0] * rec.lambda_strain[3 * f + 0] / dt2;
      g.d_compliance_warp -= q[3 * f + 1] * rec.lambda_strain[3 * f + 1] / dt2;
      g.d_compliance_shear -= q[3 * f + 2] * rec.lambda_strain[3 * f + 2] / dt2;
    }
    for (int h = 0; h < cloth.nh(); ++h)
      if (hinge_row[h] >= 0)
        g.d_bending -= q[hinge_row[h]] * rec.lambda_hinge[h] / dt2;

    // Body terms: C = n . (x_v - sum_k beta_k b_k) - r, so dC/db_k = -beta_k n.
    if (body) {
      for (size_t j = 0; j < rec.contacts.size(); ++j) {
        if (contact_row[j] < 0) continue;
        const Contact& c = rec.contacts[j];
        double qj = q[contact_row[j]];
        const auto& bf = body->faces()[c.body_face];
        for (int k = 0; k < 3; ++k)
          g.d_body.segment<3>(3 * bf[k]) += qj * c.bary[k] * c.n;
      }
    }

    // Recursion.
    VecX xhat_prev(3 * nv), vhat_prev(3 * nv);
    for (int i = 0; i < nv; ++i) {
      if (cloth.inv_mass[i] == 0.0) {
        xhat_prev.segment<3>(3 * i) = p.segment<3>(3 * i);
        vhat_prev.segment<3>(3 * i).setZero();
      } else {
        xhat_prev.segment<3>(3 * i) =
            p.segment<3>(3 * i) - (opts.damping / dt) * vhat.segment<3>(3 * i);
        vhat_prev.segment<3>(3 * i) = dt * p.segment<3>(3 * i);
      }
    }
    xhat = std::move(xhat_prev);
    vhat = std::move(vhat_prev);
  }

  return g;
}

FDReport finite_difference_check(const std::function<double(const VecX&)>& f, const VecX& x0,
                                 const VecX& analytic, double h, double tolerance,
                                 double abs_floor) {
  if (analytic.size() != x0.size())
    throw std::runtime_error("finite_difference_check: size mismatch");
  FDReport rep;
  rep.pass_tolerance = tolerance;
  for (int i = 0; i < x0.size(); ++i) {
    VecX xp = x0, xm = x0;
    xp[i] += h;
    xm[i] -= h;
    double num = (f(xp) - f(xm)) / (2.0 * h);
    double denom = std::max({std::abs(analytic[i]), std::abs(num), abs_floor});
    FDEntry e{static_cast<int>(i), analytic[i], num, std::abs(analytic[i] - num) / denom};
    rep.max_rel_error = std::max(rep.max_rel_error, e.rel_error);
    rep.entries.push_back(e);
  }
  rep.passed = rep.max_rel_error < tolerance;
  return rep;
}

void print_fd_report(const FDReport& rep, const std::string& label) {
  std::printf("%s: %zu params, max rel error %.3e (tol %.1e) -> %s\n", label.c_str(),
              rep.entries.size(), rep.max_rel_error, rep.pass_tolerance,
              rep.passed ? "ok" : "FAIL");
  if (!rep.passed) {
    for (const auto& e : rep.entries)
      if (e.rel_error >= rep.pass_tolerance)
        std::printf("  [%d] analytic %.9e numeric %.9e rel %.3e\n", e.index, e.analytic,
                    e.numeric, e.rel_error);
  }
}

}  // namespace dg
