#pragma once

// One multi-modal sample: rectified image pair, point cloud in the left
// camera frame, calibration and labeled 3D boxes.

#include <vector>

#include "dsv/geom.hpp"
#include "dsv/grid.hpp"

namespace dsv {

/// Images are (rows, cols, channels) floats in [0, 1].
using Image = FeatureMap2D;

struct PointXYZI {
  double x = 0.0, y = 0.0, z = 0.0;
  double intensity = 0.0;
};

struct Scene {
  Image left_image;
  Image right_image;
  StereoRig rig;
  std::vector<PointXYZI> points;  // left camera frame
  std::vector<Box3D> boxes;
};

}  // namespace dsv
