#include "dg/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dg {

VecX ParameterVector::pack() const {
  int n = 0;
  if (use_pattern) n += static_cast<int>(zeta.size());
  if (use_material) n += static_cast<int>(log_material.size());
  if (use_nu) n += static_cast<int>(nu.size());
  if (use_psi) n += static_cast<int>(psi.size());
  VecX flat(n);
  int at = 0;
  auto put = [&](const VecX& v) {
    flat.segment(at, v.size()) = v;
    at += static_cast<int>(v.size());
  };
  if (use_pattern) put(zeta);
  if (use_material) put(log_material);
  if (use_nu) put(nu);
  if (use_psi) put(psi);
  return flat;
}

void ParameterVector::unpack(const VecX& flat) {
  int expect = 0;
  if (use_pattern) expect += static_cast<int>(zeta.size());
  if (use_material) expect += static_cast<int>(log_material.size());
  if (use_nu) expect += static_cast<int>(nu.size());
  if (use_psi) expect += static_cast<int>(psi.size());
  if (flat.size() != expect)
    throw std::runtime_error("ParameterVector::unpack: dimension mismatch");
  int at = 0;
  auto take = [&](VecX& v) {
    v = flat.segment(at, v.size());
    at += static_cast<int>(v.size());
  };
  if (use_pattern) take(zeta);
  if (use_material) take(log_material);
  if (use_nu) take(nu);
  if (use_psi) take(psi);
}

std::vector<std::pair<std::string, int>> ParameterVector::offsets() const {
  std::vector<std::pair<std::string, int>> out;
  int at = 0;
  if (use_pattern) {
    out.push_back({"pattern", at});
    at += static_cast<int>(zeta.size());
  }
  if (use_material) {
    out.push_back({"material", at});
    at += static_cast<int>(log_material.size());
  }
  if (use_nu) {
    out.push_back({"nu", at});
    at += static_cast<int>(nu.size());
  }
  if (use_psi) {
    out.push_back({"psi", at});
    at += static_cast<int>(psi.size());
  }
  return out;
}

SimState warm_start(const Trajectory& previous, int num_sim_vertices) {
  if (previous.states.empty() ||
      previous.states.back().x.size() != 3 * num_sim_vertices)
    throw std::runtime_error("warm_start: topology mismatch");
  SimState s;
  s.x = previous.states.back().x;
  s.v = VecX::Zero(3 * num_sim_vertices);
  return s;
}

namespace {

struct EvalResult {
  double phi = 0.0;
  Trajectory traj;
  LossGrads loss;
  bool inverted = false;  // rest-pattern inversion, no simulation ran
};

void apply_material(Cloth& cloth, const ParameterVector& p, bool stretch) {
  if (!p.use_material) return;
  cloth.material.bending_compliance = std::exp(p.log_material[0]);
  if (stretch) {
    cloth.material.compliance_weft = std::exp(p.log_material[1]);
    cloth.material.compliance_warp = std::exp(p.log_material[2]);
    cloth.material.compliance_shear = std::exp(p.log_material[3]);
  }
}

// Applies parameters and runs the forward pipeline. Inversion of the rest
// pattern is reported, not thrown; simulation divergence propagates.
EvalResult evaluate(OptimizeScene& scene, const OptimizerConfig& cfg,
                    const ParameterVector& p, const KdTree3& tree,
                    const SimState* warm) {
  EvalResult r;
  Cloth& cloth = *scene.cloth;

  if (p.use_pattern) {
    try {
      std::vector<Vec2> uv;
      if (cfg.pattern_mode == PatternMode::Cage) {
        uv = cage_deform(*scene.cage, cloth.mesh, p.zeta);
      } else {
        uv.resize(p.zeta.size() / 2);
        for (size_t i = 0; i < uv.size(); ++i) uv[i] = p.zeta.segment<2>(2 * i);
      }
      cloth.set_rest_uv(uv);  // rebuild also validates rest areas
    } catch (const std::runtime_error&) {
      r.inverted = true;
      return r;
    }
  }
  apply_material(cloth, p, cfg.material_stretch);

  std::optional<PosedBody> body;
  if (scene.body) body.emplace(pose_body(*scene.body, p.nu, p.psi));

  SimState init;
  if (warm) {
    init = *warm;
  } else {
    init.x.resize(3 * cloth.nv());
    for (int i = 0; i < cloth.nv(); ++i)
      init.x.segment<3>(3 * i) = cloth.mesh.rest_embedding[i];
    init.v = VecX::Zero(3 * cloth.nv());
  }

  r.traj = drape_to_equilibrium(cloth, body ? &*body : nullptr, init, scene.sim);
  r.loss = total_loss(cloth.mesh, r.traj.states.back().x, cloth.mesh.uv,
                      scene.uv_template, *scene.target, tree, scene.loss_cfg);
  r.phi = r.loss.total;
  return r;
}

struct Grads {
  VecX pattern, material, nu, psi;
  double norm(const VecX& v) const { return v.size() ? v.cwiseAbs().maxCoeff() : 0.0; }
};

Grads gradients(OptimizeScene& scene, const OptimizerConfig& cfg,
                const ParameterVector& p, const EvalResult& ev) {
  Grads g;
  Cloth& cloth = *scene.cloth;

  AdjointOptions aopt;
  aopt.dt = scene.sim.dt;
  aopt.damping = scene.sim.damping;
  aopt.mass_term = cfg.mass_term;

  std::optional<PosedBody> body;
  if (scene.body) body.emplace(pose_body(*scene.body, p.nu, p.psi));

  GradientBundle bundle =
      adjoint_sweep(cloth, body ? &*body : nullptr, ev.traj, ev.loss.d_x, aopt);

  if (p.use_pattern) {
    VecX d_xbar = bundle.d_xbar + ev.loss.d_xbar;
    if (cfg.pattern_mode == PatternMode::Cage)
      g.pattern = cage_chain_gradient(*scene.cage, cloth.mesh, d_xbar);
    else
      g.pattern = d_xbar;
  }
  if (p.use_material) {
    g.material.resize(p.log_material.size());
    g.material[0] = bundle.d_bending * cloth.material.bending_compliance;
    if (cfg.material_stretch) {
      g.material[1] = bundle.d_compliance_weft * cloth.material.compliance_weft;
      g.material[2] = bundle.d_compliance_warp * cloth.material.compliance_warp;
      g.material[3] = bundle.d_compliance_shear * cloth.material.compliance_shear;
    }
  }
  if ((p.use_nu || p.use_psi) && scene.body) {
    MatX d_nu, d_psi;
    body_jacobians(*scene.body, p.nu, p.psi, p.use_nu ? &d_nu : nullptr,
                   p.use_psi ? &d_psi : nullptr);
    if (p.use_nu) g.nu = d_nu.transpose() * bundle.d_body;
    if (p.use_psi) g.psi = d_psi.transpose() * bundle.d_body;
  }
  return g;
}

// Normalized descent direction: unit infinity norm, zero if the gradient is.
VecX direction(const VecX& grad) {
  if (!grad.size()) return grad;
  double n = grad.cwiseAbs().maxCoeff();
  if (n < 1e-300) return VecX::Zero(grad.size());
  return -grad / n;
}

}  // namespace

std::pair<ParameterVector, OptimizationReport> co_optimize(OptimizeScene& scene,
                                                           const OptimizerConfig& cfg) {
  if (!scene.cloth || !scene.target) throw std::runtime_error("co_optimize: incomplete scene");
  if (cfg.opt_pattern && cfg.pattern_mode == PatternMode::Cage && !scene.cage)
    throw std::runtime_error("co_optimize: cage mode without a cage");
  if ((cfg.opt_nu || cfg.opt_psi) && !scene.body)
    throw std::runtime_error("co_optimize: body groups without a body");

  Cloth& cloth = *scene.cloth;
  OptimizationReport rep;
  rep.initial_quality = mesh_quality(cloth.mesh.uv, cloth.mesh.faces);

  ParameterVector p;
  p.use_pattern = cfg.opt_pattern;
  p.use_material = cfg.opt_material;
  p.use_nu = cfg.opt_nu;
  p.use_psi = cfg.opt_psi;
  if (cfg.pattern_mode == PatternMode::Cage && scene.cage) {
    p.zeta = cage_pack(*scene.cage);
  } else {
    p.zeta.resize(2 * cloth.mesh.uv.size());
    for (size_t i = 0; i < cloth.mesh.uv.size(); ++i)
      p.zeta.segment<2>(2 * i) = cloth.mesh.uv[i];
  }
  p.log_material.resize(cfg.material_stretch ? 4 : 1);
  p.log_material[0] = std::log(cloth.material.bending_compliance);
  if (cfg.material_stretch) {
    p.log_material[1] = std::log(cloth.material.compliance_weft);
    p.log_material[2] = std::log(cloth.material.compliance_warp);
    p.log_material[3] = std::log(cloth.material.compliance_shear);
  }
  p.nu = scene.nu;
  p.psi = scene.psi;

  KdTree3 tree(scene.target->interior);

  double rate_pattern = cfg.rate_pattern, rate_material = cfg.rate_material;
  double rate_nu = cfg.rate_nu, rate_psi = cfg.rate_psi;

  EvalResult cur;
  try {
    cur = evaluate(scene, cfg, p, tree, nullptr);
  } catch (const std::runtime_error&) {
    // One retry with halved rates is meaningless before the first step;
    // a diverging initial drape is a scene error.
    throw;
  }
  if (cur.inverted) throw std::runtime_error("co_optimize: initial rest pattern invalid");
  rep.initial_phi = cur.phi;
  rep.final_phi = cur.phi;
  rep.final_x = cur.traj.states.back().x;

  bool enabled = cfg.opt_pattern || cfg.opt_material || cfg.opt_nu || cfg.opt_psi;
  if (!enabled) {
    rep.stop_reason = "no parameter groups enabled";
    rep.final_quality = mesh_quality(cloth.mesh.uv, cloth.mesh.faces);
    return {p, rep};
  }

  for (int iter = 0; iter < cfg.max_iterations; ++iter) {
    IterationLog log;
    log.phi = cur.phi;
    log.boundary = cur.loss.boundary;
    log.interior = cur.loss.interior;
    log.seam = cur.loss.seam;
    log.curvature = cur.loss.curvature;

    Grads g = gradients(scene, cfg, p, cur);
    log.gnorm_pattern = g.norm(g.pattern);
    log.gnorm_material = g.norm(g.material);
    log.gnorm_nu = g.norm(g.nu);
    log.gnorm_psi = g.norm(g.psi);

    double gmax = std::max({log.gnorm_pattern, log.gnorm_material, log.gnorm_nu,
                            log.gnorm_psi});
    if (gmax < cfg.grad_tol) {
      rep.iterations.push_back(log);
      rep.stop_reason = "gradient tolerance";
      break;
    }

    VecX dir_pattern = direction(g.pattern);
    VecX dir_material = direction(g.material);
    VecX dir_nu = direction(g.nu);
    VecX dir_psi = direction(g.psi);

    double t = 1.0;
    bool accepted = false;
    SimState warm = warm_start(cur.traj, cloth.nv());
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      ParameterVector trial = p;
      if (p.use_pattern) trial.zeta += t * rate_pattern * dir_pattern;
      if (p.use_material) trial.log_material += t * rate_material * dir_material;
      if (p.use_nu) trial.nu += t * rate_nu * dir_nu;
      if (p.use_psi) trial.psi += t * rate_psi * dir_psi;

      EvalResult ev;
      try {
        ev = evaluate(scene, cfg, trial, tree, cfg.warm_start ? &warm : nullptr);
      } catch (const std::runtime_error&) {
        // Forward divergence: halve and retry within the same budget.
        log.backtracks++;
        t *= 0.5;
        continue;
      }
      if (ev.inverted) {
        log.inversion_rejections++;
        rep.total_inversion_rejections++;
        t *= 0.5;
        continue;
      }
      if (ev.phi < cur.phi) {
        p = trial;
        cur = std::move(ev);
        accepted = true;
        break;
      }
      log.backtracks++;
      t *= 0.5;
    }

    log.accepted = accepted;
    rep.iterations.push_back(log);
    if (!accepted) {
      // Restore the scene to the accepted parameters (trials mutated it).
      rep.stop_reason = "no accepted step at minimum step size";
      break;
    }
  }
  if (rep.stop_reason.empty()) rep.stop_reason = "max iterations";

  // Re-apply the accepted parameters (the last trial may have been rejected).
  if (p.use_pattern) {
    std::vector<Vec2> uv;
    if (cfg.pattern_mode == PatternMode::Cage) {
      uv = cage_deform(*scene.cage, cloth.mesh, p.zeta);
    } else {
      uv.resize(p.zeta.size() / 2);
      for (size_t i = 0; i < uv.size(); ++i) uv[i] = p.zeta.segment<2>(2 * i);
    }
    cloth.set_rest_uv(uv);
  }
  apply_material(cloth, p, cfg.material_stretch);
  scene.nu = p.nu;
  scene.psi = p.psi;

  rep.final_phi = cur.phi;
  rep.final_x = cur.traj.states.back().x;
  rep.final_quality = mesh_quality(cloth.mesh.uv, cloth.mesh.faces);
  return {p, rep};
}

}  // namespace dg
