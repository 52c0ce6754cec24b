#include "dg/step_system.hpp"

#include <Eigen/SparseLU>
#include <stdexcept>

namespace dg {

namespace {
Vec3 vert(const VecX& x, int i) { return x.segment<3>(3 * i); }
}  // namespace

StepSystem build_step_system(const Cloth& cloth, const VecX& x, const VecX& lam_strain,
                             const VecX& lam_hinge, const std::vector<Contact>& contacts,
                             const std::vector<char>& hinge_skipped,
                             const double at_strain[3], double at_bend) {
  const int nv = cloth.nv();
  const int nf = cloth.nf();
  const int nh = cloth.nh();

  StepSystem s;
  s.rows.reserve(3 * nf + nh + contacts.size());
  s.jets.resize(nf);
  for (int f = 0; f < nf; ++f) {
    auto sf = cloth.mesh.sim_face(f);
    s.jets[f] = strain_jet(vert(x, sf[0]), vert(x, sf[1]), vert(x, sf[2]),
                           cloth.rest.Dbar_inv[f]);
    for (int c = 0; c < 3; ++c)
      s.rows.push_back({RowKind::Strain, f, c, lam_strain[3 * f + c], at_strain[c]});
  }
  s.hinge_grad.resize(nh);
  s.hinge_row.assign(nh, -1);
  for (int h = 0; h < nh; ++h) {
    if (hinge_skipped[h]) continue;
    const auto& hg = cloth.hinges[h];
    if (!dihedral_gradient(vert(x, hg.v0), vert(x, hg.v1), vert(x, hg.v2), vert(x, hg.v3),
                           s.hinge_grad[h]))
      continue;
    s.hinge_row[h] = static_cast<int>(s.rows.size());
    s.rows.push_back({RowKind::Hinge, h, 0, lam_hinge[h], at_bend});
  }
  s.contact_row.assign(contacts.size(), -1);
  for (size_t j = 0; j < contacts.size(); ++j) {
    const Contact& c = contacts[j];
    if (!c.frozen_equality && c.lambda == 0.0) continue;  // clamped off
    s.contact_row[j] = static_cast<int>(s.rows.size());
    s.rows.push_back({RowKind::Contact, static_cast<int>(j), 0, c.lambda, 0.0});
  }

  const int m = static_cast<int>(s.rows.size());
  const int dim = 3 * nv + m;
  std::vector<Triplet> trips;
  trips.reserve(dim * 8);
  for (int i = 0; i < 3 * nv; ++i) trips.emplace_back(i, i, 1.0);

  auto add_K = [&](int vi, int vp, const Mat3& block) {
    double w = cloth.inv_mass[vi];
    if (w == 0.0) return;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        double val = -w * block(a, b);  // I - K
        if (val != 0.0) trips.emplace_back(3 * vi + a, 3 * vp + b, val);
      }
  };
  auto add_G = [&](int row, int vi, const Vec3& grad) {
    for (int a = 0; a < 3; ++a) {
      if (grad[a] == 0.0) continue;
      trips.emplace_back(3 * nv + row, 3 * vi + a, grad[a]);
      double w = cloth.inv_mass[vi];
      if (w != 0.0) trips.emplace_back(3 * vi + a, 3 * nv + row, -w * grad[a]);
    }
  };

  for (int r = 0; r < m; ++r) {
    const StepSystemRow& cr = s.rows[r];
    if (cr.kind == RowKind::Strain) {
      auto sf = cloth.mesh.sim_face(cr.owner);
      const StrainJet& jet = s.jets[cr.owner];
      for (int mv = 0; mv < 3; ++mv) add_G(r, sf[mv], jet.grad[cr.comp][mv]);
      if (cr.lambda != 0.0) {
        for (int mv = 0; mv < 3; ++mv)
          for (int pv = 0; pv < 3; ++pv) {
            double hs = strain_hessian_scalar(jet, cr.comp, mv, pv);
            if (hs != 0.0) add_K(sf[mv], sf[pv], cr.lambda * hs * Mat3::Identity());
          }
      }
    } else if (cr.kind == RowKind::Hinge) {
      const Hinge& hg = cloth.hinges[cr.owner];
      int vs[4] = {hg.v0, hg.v1, hg.v2, hg.v3};
      for (int mv = 0; mv < 4; ++mv) add_G(r, vs[mv], s.hinge_grad[cr.owner][mv]);
      if (cr.lambda != 0.0) {
        Eigen::Matrix<double, 12, 12> H;
        if (dihedral_hessian(vert(x, hg.v0), vert(x, hg.v1), vert(x, hg.v2), vert(x, hg.v3),
                             H)) {
          for (int mv = 0; mv < 4; ++mv)
            for (int pv = 0; pv < 4; ++pv)
              add_K(vs[mv], vs[pv], cr.lambda * H.block<3, 3>(3 * mv, 3 * pv));
        }
      }
    } else {
      const Contact& c = contacts[cr.owner];
      add_G(r, c.vert, c.n);  // linear in x: no Hessian
    }
    trips.emplace_back(3 * nv + r, 3 * nv + r, cr.alpha_tilde);
  }

  s.A.resize(dim, dim);
  s.A.setFromTriplets(trips.begin(), trips.end());
  return s;
}

double newton_polish(const Cloth& cloth, const VecX& x_pred, VecX& x, VecX& lam_strain,
                     VecX& lam_hinge, std::vector<Contact>& contacts,
                     const std::vector<char>& hinge_skipped, const double at_strain[3],
                     double at_bend, double contact_offset, double tol, int max_iters) {
  const int nv = cloth.nv();
  double resid_norm = std::numeric_limits<double>::infinity();

  for (int it = 0; it < max_iters; ++it) {
    StepSystem s =
        build_step_system(cloth, x, lam_strain, lam_hinge, contacts, hinge_skipped,
                          at_strain, at_bend);
    const int m = static_cast<int>(s.rows.size());
    VecX resid = VecX::Zero(3 * nv + m);

    // F1 = x - x_pred - M^-1 grad C^T lambda (identically zero on pinned verts).
    VecX acc = VecX::Zero(3 * nv);
    for (int r = 0; r < m; ++r) {
      const StepSystemRow& cr = s.rows[r];
      if (cr.lambda == 0.0) continue;
      if (cr.kind == RowKind::Strain) {
        auto sf = cloth.mesh.sim_face(cr.owner);
        for (int mv = 0; mv < 3; ++mv)
          acc.segment<3>(3 * sf[mv]) += cr.lambda * s.jets[cr.owner].grad[cr.comp][mv];
      } else if (cr.kind == RowKind::Hinge) {
        const Hinge& hg = cloth.hinges[cr.owner];
        int vs[4] = {hg.v0, hg.v1, hg.v2, hg.v3};
        for (int mv = 0; mv < 4; ++mv)
          acc.segment<3>(3 * vs[mv]) += cr.lambda * s.hinge_grad[cr.owner][mv];
      } else {
        const Contact& c = contacts[cr.owner];
        acc.segment<3>(3 * c.vert) += cr.lambda * c.n;
      }
    }
    for (int i = 0; i < nv; ++i)
      resid.segment<3>(3 * i) = x.segment<3>(3 * i) - x_pred.segment<3>(3 * i) -
                                cloth.inv_mass[i] * acc.segment<3>(3 * i);

    // F2 = C + alpha_tilde lambda per row.
    for (int r = 0; r < m; ++r) {
      const StepSystemRow& cr = s.rows[r];
      double C;
      if (cr.kind == RowKind::Strain) {
        C = s.jets[cr.owner].C[cr.comp];
      } else if (cr.kind == RowKind::Hinge) {
        const Hinge& hg = cloth.hinges[cr.owner];
        C = dihedral_angle(vert(x, hg.v0), vert(x, hg.v1), vert(x, hg.v2),
                           vert(x, hg.v3)) -
            hg.rest_angle;
      } else {
        const Contact& c = contacts[cr.owner];
        C = c.n.dot(vert(x, c.vert) - c.p) - contact_offset;
      }
      resid[3 * nv + r] = C + cr.alpha_tilde * cr.lambda;
    }

    resid_norm = resid.lpNorm<Eigen::Infinity>();
    if (resid_norm < tol) return resid_norm;

    Eigen::SparseLU<SpMat> lu;
    lu.compute(s.A);
    if (lu.info() != Eigen::Success) return resid_norm;  // keep the iterate we have
    VecX delta = lu.solve(-resid);

    x += delta.head(3 * nv);
    for (int r = 0; r < m; ++r) {
      const StepSystemRow& cr = s.rows[r];
      double dl = delta[3 * nv + r];
      if (cr.kind == RowKind::Strain)
        lam_strain[3 * cr.owner + cr.comp] += dl;
      else if (cr.kind == RowKind::Hinge)
        lam_hinge[cr.owner] += dl;
      else
        contacts[cr.owner].lambda += dl;
    }
  }
  return resid_norm;
}

}  // namespace dg
