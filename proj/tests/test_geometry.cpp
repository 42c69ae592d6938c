#include <doctest.h>

#include <array>
#include <cmath>

#include "hma/geometry.hpp"
#include "hma/rng.hpp"

using namespace hma;

namespace {

// 4x4 homogeneous-matrix oracle, independent of RigidTransform.
using Mat4 = std::array<std::array<double, 4>, 4>;

Mat4 to_homogeneous(const RigidTransform& t) {
  Mat4 h{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) h[i][j] = t.rotation(i, j);
    h[i][3] = (i == 0) ? t.translation.x : (i == 1) ? t.translation.y : t.translation.z;
  }
  h[3][3] = 1.0;
  return h;
}

Mat4 mat4_mul(const Mat4& a, const Mat4& b) {
  Mat4 r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) r[i][j] += a[i][k] * b[k][j];
  return r;
}

Vec3 mat4_apply(const Mat4& m, const Vec3& p) {
  const double v[4] = {p.x, p.y, p.z, 1.0};
  double out[3];
  for (int i = 0; i < 3; ++i) {
    out[i] = 0.0;
    for (int k = 0; k < 4; ++k) out[i] += m[i][k] * v[k];
  }
  return {out[0], out[1], out[2]};
}

// Gauss-Jordan 4x4 inverse.
Mat4 mat4_inverse(Mat4 a) {
  Mat4 inv{};
  for (int i = 0; i < 4; ++i) inv[i][i] = 1.0;
  for (int col = 0; col < 4; ++col) {
    int pivot = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    std::swap(a[col], a[pivot]);
    std::swap(inv[col], inv[pivot]);
    const double diag = a[col][col];
    for (int j = 0; j < 4; ++j) {
      a[col][j] /= diag;
      inv[col][j] /= diag;
    }
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = a[r][col];
      for (int j = 0; j < 4; ++j) {
        a[r][j] -= f * a[col][j];
        inv[r][j] -= f * inv[col][j];
      }
    }
  }
  return inv;
}

RigidTransform random_transform(Rng& rng) {
  RigidTransform t;
  t.rotation = Mat3::rotation_z(rng.uniform(0, 6.28)) *
               Mat3::rotation_y(rng.uniform(0, 6.28)) *
               Mat3::rotation_x(rng.uniform(0, 6.28));
  t.translation = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
  return t;
}

Vec3 random_point(Rng& rng) {
  return {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
}

void check_close(const Vec3& a, const Vec3& b, double tol) {
  CHECK(std::abs(a.x - b.x) <= tol);
  CHECK(std::abs(a.y - b.y) <= tol);
  CHECK(std::abs(a.z - b.z) <= tol);
}

}  // namespace

TEST_CASE("transform_point basics") {
  check_close(transform_point(RigidTransform::identity(), {1, 2, 3}), {1, 2, 3}, 0);

  RigidTransform shift;
  shift.translation = {0.1, 0, 0};
  check_close(transform_point(shift, {0, 0, 0}), {0.1, 0, 0}, 0);

  RigidTransform rot90{Mat3::rotation_z(M_PI / 2), {}};
  check_close(transform_point(rot90, {1, 0, 0}), {0, 1, 0}, 1e-9);
}

TEST_CASE("transform_point matches homogeneous oracle") {
  Rng rng(42);
  for (int trial = 0; trial < 50; ++trial) {
    const RigidTransform t = random_transform(rng);
    const Vec3 p = random_point(rng);
    check_close(transform_point(t, p), mat4_apply(to_homogeneous(t), p), 1e-9);
  }
}

TEST_CASE("compose laws and oracle") {
  Rng rng(7);
  const RigidTransform t = random_transform(rng);

  const RigidTransform id_t = compose(RigidTransform::identity(), t);
  check_close(id_t.translation, t.translation, 1e-12);
  CHECK(orthonormality_defect(id_t.rotation) < 1e-9);

  const RigidTransform round_trip = compose(t, invert(t));
  CHECK(orthonormality_defect(round_trip.rotation) < 1e-9);
  check_close(round_trip.translation, {0, 0, 0}, 1e-9);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      CHECK(std::abs(round_trip.rotation(i, j) - (i == j ? 1.0 : 0.0)) < 1e-9);

  for (int trial = 0; trial < 20; ++trial) {
    const RigidTransform a = random_transform(rng);
    const RigidTransform b = random_transform(rng);
    const Mat4 oracle = mat4_mul(to_homogeneous(a), to_homogeneous(b));
    const RigidTransform c = compose(a, b);
    const Vec3 p = random_point(rng);
    check_close(transform_point(c, p), mat4_apply(oracle, p), 1e-9);
    check_close(transform_point(c, p), transform_point(a, transform_point(b, p)),
                1e-9);
  }
}

TEST_CASE("invert against 4x4 inverse oracle") {
  const RigidTransform inv_id = invert(RigidTransform::identity());
  check_close(inv_id.translation, {0, 0, 0}, 0);

  RigidTransform shift;
  shift.translation = {1, -2, 3};
  check_close(invert(shift).translation, {-1, 2, -3}, 1e-12);

  Rng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    const RigidTransform t = random_transform(rng);
    const Mat4 oracle = mat4_inverse(to_homogeneous(t));
    const RigidTransform inv = invert(t);
    const Vec3 p = random_point(rng);
    check_close(transform_point(inv, p), mat4_apply(oracle, p), 1e-8);
  }
}

TEST_CASE("rotation closure and isometry properties") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const RigidTransform a = random_transform(rng);
    const RigidTransform b = random_transform(rng);
    CHECK(orthonormality_defect(compose(a, b).rotation) < 1e-8);

    const Vec3 p = random_point(rng);
    const Vec3 q = random_point(rng);
    const double before = norm(p - q);
    const double after = norm(transform_point(a, p) - transform_point(a, q));
    CHECK(std::abs(before - after) < 1e-9);
  }
}

TEST_CASE("project_point") {
  const CameraIntrinsics k{500, 500, 320, 240, 640, 480};
  const Pixel on_axis = project_point(k, {0, 0, 1});
  CHECK(on_axis.u == doctest::Approx(320));
  CHECK(on_axis.v == doctest::Approx(240));

  const Pixel px = project_point(k, {0.1, 0, 1});
  CHECK(px.u == doctest::Approx(370));
  CHECK(px.v == doctest::Approx(240));

  CHECK_THROWS_AS(project_point(k, {0, 0, 0}), NonPositiveDepth);
  CHECK_THROWS_AS(project_point(k, {0, 0, -1}), NonPositiveDepth);
}

TEST_CASE("projection round trip") {
  const CameraIntrinsics k{525, 525, 319.5, 239.5, 640, 480};
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Vec3 p{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5), rng.uniform(0.3, 3)};
    const Pixel px = project_point(k, p);
    check_close(back_project(k, px, p.z), p, 1e-9);
  }
}

TEST_CASE("signed_plane_distance") {
  const PlaneModel ground{{0, 0, 1}, 0};
  CHECK(signed_plane_distance(ground, {5, 5, 0.02}) == doctest::Approx(0.02));
  CHECK(std::abs(signed_plane_distance(ground, {1, 2, 0})) < 1e-12);

  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec3 n = normalized(random_point(rng) + Vec3{0.01, 0.01, 1.5});
    const double d = rng.uniform(-2, 2);
    const Vec3 p = random_point(rng);
    const double oracle = n.x * p.x + n.y * p.y + n.z * p.z + d;
    CHECK(signed_plane_distance({n, d}, p) == doctest::Approx(oracle).epsilon(1e-12));
  }
}
