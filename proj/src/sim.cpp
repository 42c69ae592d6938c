#include "hma/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hma/error.hpp"
#include "hma/fft.hpp"
#include "hma/rng.hpp"

namespace hma {
namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kNoHit = std::numeric_limits<double>::infinity();

struct Ray {
  Vec3 origin;
  Vec3 dir;  // not normalized; t measured along dir
};

Ray to_frame(const Ray& ray, const RigidTransform& frame_from_world) {
  return {transform_point(frame_from_world, ray.origin),
          frame_from_world.rotation * ray.dir};
}

// Finite rectangle z=0, |x|<=hx, |y|<=hy in its own frame.
double hit_rectangle(const Ray& ray, double hx, double hy) {
  if (std::abs(ray.dir.z) < 1e-15) return kNoHit;
  const double t = -ray.origin.z / ray.dir.z;
  if (t <= 1e-9) return kNoHit;
  const double x = ray.origin.x + t * ray.dir.x;
  const double y = ray.origin.y + t * ray.dir.y;
  if (std::abs(x) > hx || std::abs(y) > hy) return kNoHit;
  return t;
}

// Box |x|<=sx/2, |y|<=sy/2, 0<=z<=sz in the object frame (slab test).
double hit_box(const Ray& ray, const Vec3& size) {
  const double lo[3] = {-size.x / 2, -size.y / 2, 0.0};
  const double hi[3] = {size.x / 2, size.y / 2, size.z};
  const double o[3] = {ray.origin.x, ray.origin.y, ray.origin.z};
  const double d[3] = {ray.dir.x, ray.dir.y, ray.dir.z};
  double t_enter = 0.0, t_exit = kNoHit;
  for (int i = 0; i < 3; ++i) {
    if (std::abs(d[i]) < 1e-15) {
      if (o[i] < lo[i] || o[i] > hi[i]) return kNoHit;
      continue;
    }
    double t0 = (lo[i] - o[i]) / d[i];
    double t1 = (hi[i] - o[i]) / d[i];
    if (t0 > t1) std::swap(t0, t1);
    t_enter = std::max(t_enter, t0);
    t_exit = std::min(t_exit, t1);
    if (t_enter > t_exit) return kNoHit;
  }
  return (t_enter > 1e-9) ? t_enter : kNoHit;
}

// Upright cylinder: radius size.x, 0<=z<=size.z in the object frame.
double hit_cylinder(const Ray& ray, const Vec3& size) {
  const double r = size.x, h = size.z;
  double best = kNoHit;

  const double a = ray.dir.x * ray.dir.x + ray.dir.y * ray.dir.y;
  if (a > 1e-15) {
    const double b = 2.0 * (ray.origin.x * ray.dir.x + ray.origin.y * ray.dir.y);
    const double c = ray.origin.x * ray.origin.x + ray.origin.y * ray.origin.y - r * r;
    const double disc = b * b - 4.0 * a * c;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-b - sq) / (2 * a), (-b + sq) / (2 * a)}) {
        if (t <= 1e-9) continue;
        const double z = ray.origin.z + t * ray.dir.z;
        if (z >= 0.0 && z <= h) best = std::min(best, t);
      }
    }
  }
  // End caps.
  if (std::abs(ray.dir.z) > 1e-15) {
    for (double plane_z : {0.0, h}) {
      const double t = (plane_z - ray.origin.z) / ray.dir.z;
      if (t <= 1e-9) continue;
      const double x = ray.origin.x + t * ray.dir.x;
      const double y = ray.origin.y + t * ray.dir.y;
      if (x * x + y * y <= r * r) best = std::min(best, t);
    }
  }
  return best;
}

void validate_scene(const SceneSpec& spec) {
  if (spec.table_x < 0.0 || spec.table_y < 0.0)
    throw InvalidSpec("table extents must be non-negative");
  if (spec.outlier_fraction < 0.0 || spec.outlier_fraction >= 1.0)
    throw InvalidSpec("outlier_fraction must lie in [0, 1)");
  if (spec.depth_noise_sigma < 0.0)
    throw InvalidSpec("depth_noise_sigma must be non-negative");
  if (!spec.intrinsics.valid()) throw InvalidSpec("camera intrinsics invalid");
  for (const auto& obj : spec.objects) {
    if (obj.size.x <= 0.0 || obj.size.z <= 0.0 ||
        (obj.shape == Shape::Box && obj.size.y <= 0.0))
      throw InvalidSpec("object dimensions must be positive");
  }
}

RenderResult render_scene_impl(const SceneSpec& spec, bool parallel) {
  validate_scene(spec);
  const CameraIntrinsics& k = spec.intrinsics;
  const RigidTransform world_from_cam = invert(spec.camera_from_world);
  const RigidTransform table_from_world = invert(spec.table_pose);
  const int n_objects = static_cast<int>(spec.objects.size());
  std::vector<RigidTransform> obj_from_world(n_objects);
  for (int i = 0; i < n_objects; ++i)
    obj_from_world[i] = invert(spec.objects[i].pose);

  RenderResult result;
  result.cloud = OrganizedCloud::make(k.width, k.height);
  result.pixel_ids.assign(static_cast<size_t>(k.width) * k.height, 0);
  result.object_centroids_camera.assign(n_objects, Vec3{});
  result.object_pixel_counts.assign(n_objects, 0);

  // Ground-truth tabletop plane in the camera frame, oriented so the
  // camera origin sits on the positive side.
  {
    const Vec3 n_world = spec.table_pose.rotation * Vec3{0, 0, 1};
    const Vec3 n_cam = spec.camera_from_world.rotation * n_world;
    const Vec3 p_cam = transform_point(spec.camera_from_world,
                                       spec.table_pose.translation);
    double d = -dot(n_cam, p_cam);
    result.plane_camera = (d >= 0.0) ? PlaneModel{n_cam, d}
                                     : PlaneModel{-n_cam, -d};
  }

  std::vector<double> true_depth(result.pixel_ids.size(), 0.0);
  const int n_pixels = k.width * k.height;

#pragma omp parallel for schedule(static) if (parallel)
  for (int pix = 0; pix < n_pixels; ++pix) {
    const int col = pix % k.width;
    const int row = pix / k.width;
    const Vec3 dir_cam{(col - k.cx) / k.fx, (row - k.cy) / k.fy, 1.0};
    const Ray world_ray{world_from_cam.translation,
                        world_from_cam.rotation * dir_cam};

    double best_t = kNoHit;
    int hit_id = 0;
    if (spec.table_x > 0.0 && spec.table_y > 0.0) {
      const double t = hit_rectangle(to_frame(world_ray, table_from_world),
                                     spec.table_x / 2, spec.table_y / 2);
      if (t < best_t) {
        best_t = t;
        hit_id = 1;
      }
    }
    for (int i = 0; i < n_objects; ++i) {
      const Ray local = to_frame(world_ray, obj_from_world[i]);
      const double t = (spec.objects[i].shape == Shape::Box)
                           ? hit_box(local, spec.objects[i].size)
                           : hit_cylinder(local, spec.objects[i].size);
      if (t < best_t) {
        best_t = t;
        hit_id = 2 + i;
      }
    }

    Rng rng(hash_combine(spec.seed, static_cast<uint64_t>(pix)));
    const double gauss = rng.gaussian();
    const double u_outlier = rng.next_double();
    const double outlier_depth = rng.uniform(0.3, 5.0);
    const int jitter[3] = {static_cast<int>(rng.next_below(21)) - 10,
                           static_cast<int>(rng.next_below(21)) - 10,
                           static_cast<int>(rng.next_below(21)) - 10};

    const uint8_t background[3] = {30, 30, 30};
    const uint8_t* base = background;
    if (hit_id == 1) base = spec.table_color;
    else if (hit_id >= 2) base = spec.objects[hit_id - 2].color;
    for (int ch = 0; ch < 3; ++ch)
      result.cloud.rgb[3 * static_cast<size_t>(pix) + ch] = static_cast<uint8_t>(
          std::clamp(static_cast<int>(base[ch]) + jitter[ch], 0, 255));

    result.pixel_ids[pix] = static_cast<uint16_t>(hit_id);
    if (hit_id == 0) continue;
    true_depth[pix] = best_t;

    double depth = best_t + spec.depth_noise_sigma * gauss;
    if (u_outlier < spec.outlier_fraction) depth = outlier_depth;
    if (depth <= 0.0) continue;  // point stays invalid
    result.cloud.points[pix] = dir_cam * depth;
    result.cloud.valid[pix] = 1;
  }

  // Unperturbed visible-surface centroids per object.
  for (int pix = 0; pix < n_pixels; ++pix) {
    const int id = result.pixel_ids[pix];
    if (id < 2) continue;
    const int col = pix % k.width;
    const int row = pix / k.width;
    const Vec3 dir_cam{(col - k.cx) / k.fx, (row - k.cy) / k.fy, 1.0};
    result.object_centroids_camera[id - 2] =
        result.object_centroids_camera[id - 2] + dir_cam * true_depth[pix];
    ++result.object_pixel_counts[id - 2];
  }
  for (int i = 0; i < n_objects; ++i)
    if (result.object_pixel_counts[i] > 0)
      result.object_centroids_camera[i] =
          result.object_centroids_camera[i] / result.object_pixel_counts[i];

  return result;
}

RigidTransform look_at_camera(const Vec3& eye, const Vec3& target) {
  // Optical frame: x right, y down, z forward.
  const Vec3 fwd = normalized(target - eye);
  Vec3 right = cross(fwd, Vec3{0, 0, 1});
  if (norm(right) < 1e-9) right = Vec3{1, 0, 0};  // looking straight up/down
  right = normalized(right);
  const Vec3 down = cross(fwd, right);
  Mat3 r_world_from_cam;
  r_world_from_cam.m = {right.x, down.x, fwd.x,
                        right.y, down.y, fwd.y,
                        right.z, down.z, fwd.z};
  return invert({r_world_from_cam, eye});
}

}  // namespace

RenderResult render_scene(const SceneSpec& spec) {
  return render_scene_impl(spec, true);
}

RenderResult render_scene_serial(const SceneSpec& spec) {
  return render_scene_impl(spec, false);
}

Dataset render_object_views(const SceneObject& object,
                            const std::vector<double>& angles_deg, int image_size,
                            uint64_t seed) {
  if (angles_deg.empty()) throw InvalidSpec("view protocol must be nonempty");
  if (image_size < 8) throw InvalidSpec("view image size too small");

  SceneSpec spec;
  spec.table_x = spec.table_y = 0.0;  // object only, plain background
  SceneObject centered = object;
  centered.pose = RigidTransform::identity();
  spec.objects = {centered};
  spec.intrinsics = {static_cast<double>(image_size), static_cast<double>(image_size),
                     image_size / 2.0 - 0.5, image_size / 2.0 - 0.5,
                     image_size, image_size};

  const double extent = std::max({object.size.x, object.size.y, object.size.z});
  const double dist = std::max(0.3, 3.0 * extent);
  const Vec3 center{0, 0, object.size.z / 2};
  const double elevation = 20.0 * kPi / 180.0;

  Dataset ds;
  for (int c = 0; c <= object.class_id; ++c)
    ds.classes.push_back("class_" + std::to_string(c));

  for (size_t i = 0; i < angles_deg.size(); ++i) {
    const double az = angles_deg[i] * kPi / 180.0;
    const Vec3 eye{dist * std::cos(az) * std::cos(elevation),
                   dist * std::sin(az) * std::cos(elevation),
                   center.z + dist * std::sin(elevation)};
    spec.camera_from_world = look_at_camera(eye, center);
    spec.seed = hash_combine(seed, i);
    const RenderResult render = render_scene(spec);

    LabeledImage li;
    li.image.width = image_size;
    li.image.height = image_size;
    li.image.rgb = render.cloud.rgb;
    li.label = object.class_id;
    li.view_angle = angles_deg[i];
    ds.images.push_back(std::move(li));
  }
  return ds;
}

namespace {

std::vector<double> source_waveform(const AudioSource& src, size_t n, double rate,
                                    uint64_t seed) {
  std::vector<double> s(n, 0.0);
  Rng rng(seed);
  switch (src.waveform) {
    case Waveform::Sine: {
      const double phase = rng.uniform(0.0, 2.0 * kPi);
      const double amp = src.level * std::sqrt(2.0);  // RMS == level
      for (size_t i = 0; i < n; ++i)
        s[i] = amp * std::sin(2.0 * kPi * src.freq_hz * i / rate + phase);
      return s;
    }
    case Waveform::BandNoise: {
      size_t m = 1;
      while (m < n) m <<= 1;
      std::vector<Complex> buf(m);
      for (auto& x : buf) x = Complex(rng.gaussian(), 0.0);
      fft_radix2(buf);
      for (size_t kk = 0; kk <= m / 2; ++kk) {
        const double f = kk * rate / static_cast<double>(m);
        if (f < src.band_lo_hz || f > src.band_hi_hz) {
          buf[kk] = 0.0;
          if (kk > 0 && kk < m) buf[m - kk] = 0.0;
        }
      }
      fft_radix2(buf, true);
      for (size_t i = 0; i < n; ++i) s[i] = buf[i].real();
      break;
    }
    case Waveform::File: {
      for (size_t i = 0; i < n && i < src.samples.size(); ++i) s[i] = src.samples[i];
      break;
    }
  }
  double power = 0.0;
  for (double v : s) power += v * v;
  power /= static_cast<double>(n);
  if (power > 0.0) {
    const double scale = src.level / std::sqrt(power);
    for (double& v : s) v *= scale;
  }
  return s;
}

// 32-tap Hann-windowed sinc fractional delay: y[i] = x[i - delay].
double delayed_sample(const std::vector<double>& x, double index) {
  constexpr int kHalf = 16;
  const double floor_idx = std::floor(index);
  const int i0 = static_cast<int>(floor_idx);
  const double frac = index - floor_idx;
  double acc = 0.0;
  for (int k = -kHalf + 1; k <= kHalf; ++k) {
    const int j = i0 + k;
    if (j < 0 || j >= static_cast<int>(x.size())) continue;
    const double arg = k - frac;
    double w;
    if (std::abs(arg) < 1e-12) {
      w = 1.0;
    } else {
      w = std::sin(kPi * arg) / (kPi * arg) *
          0.5 * (1.0 + std::cos(kPi * arg / kHalf));
    }
    acc += x[j] * w;
  }
  return acc;
}

}  // namespace

MultichannelSignal synth_array_signal(const MicArray& array,
                                      const AudioSceneSpec& spec) {
  if (!array.valid()) throw InvalidSpec("microphone array invalid");
  if (spec.duration_s <= 0.0) throw InvalidSpec("duration must be positive");
  for (const auto& src : spec.sources)
    if (src.azimuth_deg < 0.0 || src.azimuth_deg >= 360.0)
      throw InvalidSpec("source azimuth must lie in [0, 360)");

  const double rate = array.sample_rate;
  const size_t n = static_cast<size_t>(std::llround(spec.duration_s * rate));
  const int c = array.size();
  constexpr size_t kPad = 64;  // margin for inter-mic delays and sinc taps

  MultichannelSignal out;
  out.sample_rate = rate;
  out.channels.assign(c, std::vector<double>(n, 0.0));

  for (size_t si = 0; si < spec.sources.size(); ++si) {
    const AudioSource& src = spec.sources[si];
    const std::vector<double> base =
        source_waveform(src, n + 2 * kPad, rate, hash_combine(spec.seed, 0x100 + si));
    const double az = src.azimuth_deg * kPi / 180.0;
    const Vec3 u{std::cos(az), std::sin(az), 0.0};
    for (int m = 0; m < c; ++m) {
      const double tau = -dot(u, array.positions[m]) / array.speed_of_sound;
      const double delay_samples = tau * rate;
      auto& ch = out.channels[m];
      for (size_t i = 0; i < n; ++i)
        ch[i] += delayed_sample(base, static_cast<double>(i + kPad) - delay_samples);
    }
  }

  const bool noiseless = !std::isfinite(spec.snr_db) || spec.snr_db > 300.0;
  if (!noiseless && !spec.sources.empty()) {
    double power = 0.0;
    for (const auto& ch : out.channels)
      for (double v : ch) power += v * v;
    power /= static_cast<double>(n) * c;
    const double noise_std = std::sqrt(power / std::pow(10.0, spec.snr_db / 10.0));
    for (int m = 0; m < c; ++m) {
      Rng rng(hash_combine(spec.seed, 0x9000 + static_cast<uint64_t>(m)));
      for (size_t i = 0; i < n; ++i) out.channels[m][i] += noise_std * rng.gaussian();
    }
  }
  return out;
}

}  // namespace hma
