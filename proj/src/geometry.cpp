#include "hma/geometry.hpp"

#include <algorithm>

namespace hma {

Mat3 Mat3::rotation_x(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Mat3 r;
  r.m = {1, 0, 0, 0, c, -s, 0, s, c};
  return r;
}

Mat3 Mat3::rotation_y(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Mat3 r;
  r.m = {c, 0, s, 0, 1, 0, -s, 0, c};
  return r;
}

Mat3 Mat3::rotation_z(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  Mat3 r;
  r.m = {c, -s, 0, s, c, 0, 0, 0, 1};
  return r;
}

double orthonormality_defect(const Mat3& r) {
  Mat3 g = r.transposed() * r;
  double worst = 0.0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double target = (i == j) ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(g(i, j) - target));
    }
  return worst;
}

bool is_valid_rotation(const Mat3& r, double tol) {
  if (orthonormality_defect(r) >= tol) return false;
  const double det =
      r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
      r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
      r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
  return det > 0.0;
}

Vec3 transform_point(const RigidTransform& t, const Vec3& p) {
  return t.rotation * p + t.translation;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

RigidTransform invert(const RigidTransform& t) {
  Mat3 rt = t.rotation.transposed();
  return {rt, -(rt * t.translation)};
}

Pixel project_point(const CameraIntrinsics& k, const Vec3& p) {
  if (p.z <= 0.0) throw NonPositiveDepth("point depth must be > 0");
  return {k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy};
}

Vec3 back_project(const CameraIntrinsics& k, const Pixel& px, double z) {
  return {(px.u - k.cx) / k.fx * z, (px.v - k.cy) / k.fy * z, z};
}

}  // namespace hma
