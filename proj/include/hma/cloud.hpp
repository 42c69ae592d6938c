#pragma once

#include <cstdint>
#include <vector>

#include "hma/geometry.hpp"

namespace hma {

// 3D points stored on the camera's pixel grid, registered to an RGB image.
// Camera frame: x right, y down, z forward.
struct OrganizedCloud {
  int width = 0;
  int height = 0;
  std::vector<Vec3> points;       // width*height, row-major
  std::vector<uint8_t> valid;     // width*height, 0 or 1
  std::vector<uint8_t> rgb;       // 3 * width*height, row-major

  int size() const { return width * height; }
  int index(int row, int col) const { return row * width + col; }

  static OrganizedCloud make(int width, int height) {
    OrganizedCloud c;
    c.width = width;
    c.height = height;
    c.points.resize(static_cast<size_t>(width) * height);
    c.valid.assign(static_cast<size_t>(width) * height, 0);
    c.rgb.assign(static_cast<size_t>(width) * height * 3, 0);
    return c;
  }

  int valid_count() const {
    int n = 0;
    for (uint8_t v : valid) n += v;
    return n;
  }
};

enum class Axis { X, Y, Z };

struct PassThroughLimits {
  Axis axis = Axis::Z;
  double min = 0.0;
  double max = 0.0;
};

struct RansacParams {
  int iterations = 500;
  double inlier_threshold = 0.008;     // meters
  double min_inlier_fraction = 0.15;
  uint64_t seed = 0;
};

struct ClusterParams {
  double tolerance = 0.02;  // meters
  int min_points = 30;
  int max_points = 50000;
};

}  // namespace hma
