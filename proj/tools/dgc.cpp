// Pattern drape / inverse-design command line driver.
//
//   dgc drape        --config scene.cfg [--section.key value ...]
//   dgc optimize     --config scene.cfg ...
//   dgc gradcheck    --config scene.cfg ...
//   dgc synth-target --config scene.cfg ...
//
// Exit codes: 0 success, 1 numerical failure, 2 usage/config error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dg/gradcheck.hpp"
#include "dg/scene.hpp"

namespace {

using namespace dg;

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    size_t a = tok.find_first_not_of(" \t");
    size_t b = tok.find_last_not_of(" \t");
    if (a != std::string::npos) out.push_back(tok.substr(a, b - a + 1));
  }
  return out;
}

int cmd_drape(const Config& cfg, SceneBundle& scene) {
  std::filesystem::create_directories(scene.out_dir);

  std::optional<PosedBody> body;
  if (scene.body) body.emplace(pose_body(*scene.body, scene.nu, scene.psi));

  int fixed_steps = cfg.get_int("drape.steps", 0);
  Trajectory traj;
  if (fixed_steps > 0) {
    traj = fixed_step_trajectory(scene.cloth, body ? &*body : nullptr, rest_state(scene.cloth),
                                 scene.sim, fixed_steps, nullptr);
    export_obj_sequence(scene.cloth, traj, scene.out_dir + "/step");
  } else {
    traj = drape_to_equilibrium(scene.cloth, body ? &*body : nullptr, rest_state(scene.cloth),
                                scene.sim);
  }
  export_obj(scene.cloth, traj.states.back().x, scene.out_dir + "/drape.obj");

  {
    std::ofstream log(scene.out_dir + "/steps.log");
    log << "# step max_speed max_strain\n";
    for (int n = 1; n < static_cast<int>(traj.states.size()); ++n) {
      double vmax = 0.0;
      const VecX& v = traj.states[n].v;
      for (int i = 0; i < scene.cloth.nv(); ++i)
        vmax = std::max(vmax, v.segment<3>(3 * i).norm());
      log << n << " " << vmax << " " << max_strain(scene.cloth, traj.states[n].x) << "\n";
    }
  }
  {
    QualityStats q = mesh_quality(scene.cloth.mesh.uv, scene.cloth.mesh.faces);
    std::ofstream rep(scene.out_dir + "/quality.txt");
    rep << "min_quality " << q.min << "\nmean_quality " << q.mean << "\nmax_strain "
        << max_strain(scene.cloth, traj.states.back().x) << "\nsteps " << traj.steps() << "\n";
  }
  cfg.echo(scene.out_dir + "/effective.cfg");
  std::printf("drape: %d steps, wrote %s/drape.obj\n", traj.steps(), scene.out_dir.c_str());
  return 0;
}

int cmd_optimize(const Config& cfg, SceneBundle& scene) {
  if (!scene.target) {
    std::fprintf(stderr, "optimize: missing config key 'paths.target'\n");
    return 2;
  }
  std::filesystem::create_directories(scene.out_dir);

  OptimizeScene os;
  os.cloth = &scene.cloth;
  os.cage = scene.cage ? &*scene.cage : nullptr;
  os.body = scene.body ? &*scene.body : nullptr;
  os.nu = scene.nu;
  os.psi = scene.psi;
  os.target = &*scene.target;
  os.uv_template = scene.uv_template;
  os.sim = scene.sim;
  os.loss_cfg = scene.loss_cfg;

  auto [params, report] = co_optimize(os, scene.opt);
  scene.nu = os.nu;
  scene.psi = os.psi;

  save_pattern(scene.cloth.mesh, scene.out_dir + "/optimized.obj",
               scene.out_dir + "/optimized.seams");
  export_obj(scene.cloth, report.final_x, scene.out_dir + "/final_drape.obj");

  std::ofstream rep(scene.out_dir + "/report.txt");
  rep << "initial_phi " << report.initial_phi << "\nfinal_phi " << report.final_phi
      << "\nstop_reason " << report.stop_reason << "\ninversion_rejections "
      << report.total_inversion_rejections << "\ninitial_min_quality "
      << report.initial_quality.min << "\nfinal_min_quality " << report.final_quality.min
      << "\nbend " << scene.cloth.material.bending_compliance << "\nweft "
      << scene.cloth.material.compliance_weft << "\nwarp "
      << scene.cloth.material.compliance_warp << "\nshear "
      << scene.cloth.material.compliance_shear << "\n";
  rep << "nu";
  for (int i = 0; i < scene.nu.size(); ++i) rep << " " << scene.nu[i];
  rep << "\npsi";
  for (int i = 0; i < scene.psi.size(); ++i) rep << " " << scene.psi[i];
  rep << "\n";
  rep << "# iter phi boundary interior seam curvature accepted backtracks\n";
  for (size_t i = 0; i < report.iterations.size(); ++i) {
    const auto& it = report.iterations[i];
    rep << i << " " << it.phi << " " << it.boundary << " " << it.interior << " " << it.seam
        << " " << it.curvature << " " << (it.accepted ? 1 : 0) << " " << it.backtracks << "\n";
  }
  cfg.echo(scene.out_dir + "/effective.cfg");
  std::printf("optimize: phi %.6e -> %.6e (%s)\n", report.initial_phi, report.final_phi,
              report.stop_reason.c_str());
  return 0;
}

int cmd_gradcheck(const Config& cfg, SceneBundle& scene) {
  GradCheckOptions opts;
  opts.steps = cfg.get_int("gradcheck.steps", opts.steps);
  opts.tolerance = cfg.get_double("gradcheck.tolerance", opts.tolerance);
  opts.mass_term = cfg.get_bool("opt.mass_term", true);
  opts.corrupt_analytic = cfg.get_bool("gradcheck.corrupt_analytic", false);
  std::vector<double> hs = cfg.get_list("gradcheck.hs", opts.hs);
  if (!hs.empty()) opts.hs = hs;

  std::string def = scene.body ? "xbar,zeta,bend,stretch,nu,psi" : "xbar,zeta,bend,stretch";
  std::vector<std::string> groups = split_csv(cfg.get_str("gradcheck.groups", def));

  GradCheckResult res = run_gradcheck(scene, groups, opts);
  for (const auto& [name, rep] : res.groups) print_fd_report(rep, name);
  return res.passed ? 0 : 1;
}

int cmd_synth_target(const Config& cfg, SceneBundle& scene) {
  double noise = cfg.get_double("synth.noise", 0.0);
  double dropout = cfg.get_double("synth.dropout", 0.0);
  unsigned seed = static_cast<unsigned>(cfg.get_int("synth.seed", 1));
  std::string out = cfg.get_str("synth.out", scene.out_dir + "/target.txt");

  TargetGarment t = synth_target(scene, noise, dropout, seed);
  std::filesystem::create_directories(std::filesystem::path(out).parent_path().string().empty()
                                          ? "."
                                          : std::filesystem::path(out).parent_path().string());
  save_target(t, out);
  std::printf("synth-target: %zu interior points, %zu boundary loops -> %s\n",
              t.interior.size(), t.boundaries.size(), out.c_str());
  return 0;
}

int usage() {
  std::fprintf(stderr,
               "usage: dgc <drape|optimize|gradcheck|synth-target> --config FILE "
               "[--section.key value ...]\n");
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) return usage();
  std::string cmd = argv[1];
  if (cmd != "drape" && cmd != "optimize" && cmd != "gradcheck" && cmd != "synth-target")
    return usage();

  dg::Config cfg;
  std::vector<std::string> overrides;
  try {
    std::string config_path;
    for (int i = 2; i < argc; ++i) {
      std::string a = argv[i];
      if (a == "--config") {
        if (i + 1 >= argc) return usage();
        config_path = argv[++i];
      } else {
        overrides.push_back(a);
      }
    }
    if (!config_path.empty()) cfg.load(config_path);
    cfg.apply_overrides(overrides);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  }

  std::optional<dg::SceneBundle> scene;
  try {
    scene.emplace(dg::build_scene(cfg));
  } catch (const std::exception& e) {
    std::fprintf(stderr, "scene error: %s\n", e.what());
    return 2;
  }

  try {
    if (cmd == "drape") return cmd_drape(cfg, *scene);
    if (cmd == "optimize") return cmd_optimize(cfg, *scene);
    if (cmd == "gradcheck") return cmd_gradcheck(cfg, *scene);
    return cmd_synth_target(cfg, *scene);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
