#pragma once

#include <string>
#include <vector>

#include "hma/classifier.hpp"
#include "hma/cloud.hpp"
#include "hma/geometry.hpp"
#include "hma/sound.hpp"

namespace hma {

enum class Shape { Box, Cylinder };

struct SceneObject {
  Shape shape = Shape::Box;
  // Box: full extents along x/y/z of the object frame, origin at the
  // bottom-face center. Cylinder: size.x = radius, size.z = height,
  // axis along object z, origin at the bottom-cap center.
  Vec3 size{0.06, 0.06, 0.12};
  RigidTransform pose;  // world-from-object
  uint8_t color[3] = {200, 40, 40};
  int class_id = 0;
};

struct SceneSpec {
  RigidTransform table_pose;  // world-from-table; surface is z=0 in table frame
  double table_x = 1.0;       // extents, meters
  double table_y = 1.0;
  uint8_t table_color[3] = {150, 110, 70};
  std::vector<SceneObject> objects;
  CameraIntrinsics intrinsics{525.0, 525.0, 319.5, 239.5, 640, 480};
  RigidTransform camera_from_world;
  double depth_noise_sigma = 0.0;  // meters, along the ray
  double outlier_fraction = 0.0;
  uint64_t seed = 0;
};

// Pixel ids: 0 = background, 1 = table, 2 + k = objects[k].
struct RenderResult {
  OrganizedCloud cloud;
  PlaneModel plane_camera;                  // ground-truth tabletop, camera frame
  std::vector<uint16_t> pixel_ids;          // width*height, row-major
  std::vector<Vec3> object_centroids_camera;  // unperturbed visible-surface mean
  std::vector<int> object_pixel_counts;
};

// Deterministic per-pixel ray cast against the analytic scene; noise is
// counter-seeded per pixel so parallel and serial renders are identical.
RenderResult render_scene(const SceneSpec& spec);
RenderResult render_scene_serial(const SceneSpec& spec);

// One image per angle, camera orbiting the object against a plain
// background; labels carry the object's class id.
Dataset render_object_views(const SceneObject& object,
                            const std::vector<double>& angles_deg, int image_size,
                            uint64_t seed);

enum class Waveform { Sine, BandNoise, File };

struct AudioSource {
  Waveform waveform = Waveform::BandNoise;
  double azimuth_deg = 0.0;
  double level = 1.0;          // target RMS
  double freq_hz = 1000.0;     // sine only
  double band_lo_hz = 500.0;   // band-noise only
  double band_hi_hz = 3000.0;
  std::vector<double> samples;  // file waveform, used when waveform == File
};

struct AudioSceneSpec {
  std::vector<AudioSource> sources;
  double snr_db = 20.0;  // infinity = noiseless
  double duration_s = 1.0;
  uint64_t seed = 0;
};

// Far-field plane-wave synthesis: per-mic fractional delays via a 32-tap
// windowed-sinc interpolator plus channel-independent Gaussian noise.
MultichannelSignal synth_array_signal(const MicArray& array,
                                      const AudioSceneSpec& spec);

}  // namespace hma
