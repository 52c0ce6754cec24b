#pragma once

#include <optional>
#include <string>

#include "dg/config.hpp"
#include "dg/optimizer.hpp"

namespace dg {

// Everything a run needs, assembled from a config file.
struct SceneBundle {
  Cloth cloth;
  std::optional<ControlCage> cage;
  std::optional<BodyModel> body;
  VecX nu, psi;
  SimOptions sim;
  LossConfig loss_cfg;
  OptimizerConfig opt;
  std::vector<Vec2> uv_template;  // curvature reference = pattern as loaded
  std::optional<TargetGarment> target;
  std::string out_dir;
};

SceneBundle build_scene(const Config& cfg);

// Drapes the scene as configured and samples a target from the equilibrium:
// interior points from vertex positions with Gaussian noise and dropout,
// boundary polylines from the garment boundary loops (noise-free).
TargetGarment synth_target(const SceneBundle& scene, double noise, double dropout,
                           unsigned seed);

SimState rest_state(const Cloth& cloth);

}  // namespace dg
