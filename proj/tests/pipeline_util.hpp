// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdlib>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "oracles.hpp"
#include "pillarstat/ingest.hpp"

namespace pillarstat::testing {

/// Camera-frame label for a sensor-frame box, with its projected image box.
inline LabeledObject label_for(const Box3D& box, const Calibration& calib, std::optional<double> score = {}) {
  LabeledObject o;
  o.class_name = "Car";
  o.box2d = project_box_to_image(box, calib).value_or(Rect2D{0, 0, 0, 0});
  o.score = score;
  box_to_camera_label(box, calib, o);
  o.box3d = box;
  return o;
}

/// A few well separated cars in front of the camera.
inline std::vector<Box3D> random_scene(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> lateral(-1.0, 1.0), yaw(-3.0, 3.0), dim(0.9, 1.1);
  std::vector<Box3D> out;
  for (int i = 0; i < n; ++i) {
    const double x = 8.0 + 9.0 * i;
    out.push_back(axis_box(x, 0.35 * x * lateral(rng), -0.8, 3.9 * dim(rng), 1.6 * dim(rng), 1.56 * dim(rng),
                           yaw(rng)));
  }
  return out;
}

/// Exit status of a shell command, -1 if it did not exit normally.
inline int run_shell(const std::string& cmd) {
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace pillarstat::testing
