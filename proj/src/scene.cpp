#include "dg/scene.hpp"

#include <random>
#include <stdexcept>

namespace dg {

SimState rest_state(const Cloth& cloth) {
  SimState s;
  s.x.resize(3 * cloth.nv());
  for (int i = 0; i < cloth.nv(); ++i)
    s.x.segment<3>(3 * i) = cloth.mesh.rest_embedding[i];
  s.v = VecX::Zero(3 * cloth.nv());
  return s;
}

SceneBundle build_scene(const Config& cfg) {
  SceneBundle s;

  std::string pattern_path = cfg.require_str("paths.pattern");
  std::string seam_path = cfg.get_str("paths.seams", "");
  PatternMesh mesh = load_pattern(pattern_path, seam_path);

  // Optional uniform rest-pattern scaling (synthetic-target ground truth).
  double scale_uv = cfg.get_double("scene.scale_uv", 1.0);
  if (scale_uv != 1.0)
    for (auto& p : mesh.uv) p *= scale_uv;

  MaterialParams mat;
  mat.compliance_weft = cfg.get_double("material.weft", mat.compliance_weft);
  mat.compliance_warp = cfg.get_double("material.warp", mat.compliance_warp);
  mat.compliance_shear = cfg.get_double("material.shear", mat.compliance_shear);
  mat.bending_compliance = cfg.get_double("material.bend", mat.bending_compliance);
  mat.density = cfg.get_double("material.density", mat.density);
  mat.thickness = cfg.get_double("material.thickness", mat.thickness);

  std::vector<int> pins = cfg.get_int_list("scene.pins", {});
  s.cloth = build_cloth(mesh, mat, pins);

  std::vector<double> grav = cfg.get_list("scene.gravity", {0.0, 0.0, -9.81});
  if (grav.size() != 3) throw std::runtime_error("scene.gravity needs 3 entries");
  s.cloth.gravity = Vec3(grav[0], grav[1], grav[2]);

  s.uv_template.assign(mesh.uv.begin(), mesh.uv.end());

  s.cage = build_cage(s.cloth.mesh, cfg.get_double("cage.angle_threshold_deg", 10.0));

  std::string body_obj = cfg.get_str("paths.body_obj", "");
  if (!body_obj.empty()) {
    s.body = load_body(body_obj, cfg.require_str("paths.body_rig"));
    std::vector<double> nu = cfg.get_list("body.nu", {});
    std::vector<double> psi = cfg.get_list("body.psi", {});
    s.nu = VecX::Zero(s.body->num_shape());
    s.psi = VecX::Zero(s.body->pose_dim());
    for (size_t i = 0; i < nu.size() && i < static_cast<size_t>(s.nu.size()); ++i)
      s.nu[i] = nu[i];
    for (size_t i = 0; i < psi.size() && i < static_cast<size_t>(s.psi.size()); ++i)
      s.psi[i] = psi[i];
  }

  s.sim.dt = cfg.get_double("sim.dt", s.sim.dt);
  s.sim.iterations = cfg.get_int("sim.iterations", s.sim.iterations);
  s.sim.damping = cfg.get_double("sim.damping", s.sim.damping);
  s.sim.v_tol = cfg.get_double("sim.v_tol", s.sim.v_tol);
  s.sim.max_steps = cfg.get_int("sim.max_steps", s.sim.max_steps);
  s.sim.collision_margin = cfg.get_double("sim.margin", s.sim.collision_margin);
  s.sim.resync_relax = cfg.get_double("sim.resync_relax", s.sim.resync_relax);
  if (s.sim.dt <= 0) throw std::runtime_error("sim.dt must be positive");

  s.loss_cfg.w_boundary = cfg.get_double("loss.boundary", s.loss_cfg.w_boundary);
  s.loss_cfg.w_interior = cfg.get_double("loss.interior", s.loss_cfg.w_interior);
  s.loss_cfg.alpha_seam = cfg.get_double("loss.seam", s.loss_cfg.alpha_seam);
  s.loss_cfg.beta_curvature = cfg.get_double("loss.curvature", s.loss_cfg.beta_curvature);
  s.loss_cfg.seam_signed = cfg.get_bool("loss.seam_signed", s.loss_cfg.seam_signed);
  if (s.loss_cfg.w_boundary < 0 || s.loss_cfg.w_interior < 0 || s.loss_cfg.alpha_seam < 0 ||
      s.loss_cfg.beta_curvature < 0)
    throw std::runtime_error("loss weights must be non-negative");

  std::string mode = cfg.get_str("opt.mode", "cage");
  if (mode == "cage")
    s.opt.pattern_mode = PatternMode::Cage;
  else if (mode == "direct")
    s.opt.pattern_mode = PatternMode::Direct;
  else
    throw std::runtime_error("opt.mode must be cage or direct");
  s.opt.opt_pattern = cfg.get_bool("opt.pattern", false);
  s.opt.opt_material = cfg.get_bool("opt.material", false);
  s.opt.opt_nu = cfg.get_bool("opt.nu", false);
  s.opt.opt_psi = cfg.get_bool("opt.psi", false);
  s.opt.material_stretch = cfg.get_bool("opt.material_stretch", false);
  s.opt.rate_pattern = cfg.get_double("opt.rate_pattern", s.opt.rate_pattern);
  s.opt.rate_material = cfg.get_double("opt.rate_material", s.opt.rate_material);
  s.opt.rate_nu = cfg.get_double("opt.rate_nu", s.opt.rate_nu);
  s.opt.rate_psi = cfg.get_double("opt.rate_psi", s.opt.rate_psi);
  s.opt.max_iterations = cfg.get_int("opt.max_iterations", s.opt.max_iterations);
  s.opt.grad_tol = cfg.get_double("opt.grad_tol", s.opt.grad_tol);
  s.opt.max_backtracks = cfg.get_int("opt.max_backtracks", s.opt.max_backtracks);
  s.opt.warm_start = cfg.get_bool("opt.warm_start", s.opt.warm_start);
  s.opt.mass_term = cfg.get_bool("opt.mass_term", s.opt.mass_term);

  std::string target_path = cfg.get_str("paths.target", "");
  if (!target_path.empty()) s.target = load_target(target_path);

  s.out_dir = cfg.get_str("paths.out", "out");
  return s;
}

TargetGarment synth_target(const SceneBundle& scene, double noise, double dropout,
                           unsigned seed) {
  std::optional<PosedBody> body;
  if (scene.body) body.emplace(pose_body(*scene.body, scene.nu, scene.psi));

  Trajectory traj = drape_to_equilibrium(scene.cloth, body ? &*body : nullptr,
                                         rest_state(scene.cloth), scene.sim);
  const VecX& x = traj.states.back().x;

  std::mt19937 rng(seed);
  std::normal_distribution<double> gauss(0.0, noise);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  TargetGarment t;
  for (int i = 0; i < scene.cloth.nv(); ++i) {
    if (dropout > 0.0 && uni(rng) < dropout) continue;
    Vec3 p = x.segment<3>(3 * i);
    if (noise > 0.0) p += Vec3(gauss(rng), gauss(rng), gauss(rng));
    t.interior.push_back(p);
  }
  if (t.interior.empty()) throw std::runtime_error("synth_target: every point dropped");

  for (const auto& loop : garment_boundary_loops(scene.cloth.mesh)) {
    std::vector<Vec3> poly;
    for (int vi : loop) poly.push_back(x.segment<3>(3 * vi));
    t.boundaries.push_back(std::move(poly));
  }
  return t;
}

}  // namespace dg
