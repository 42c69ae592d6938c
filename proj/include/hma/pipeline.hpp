#pragma once

#include <optional>
#include <vector>

#include "hma/classifier.hpp"
#include "hma/cloud.hpp"
#include "hma/geometry.hpp"
#include "hma/image.hpp"

namespace hma {

struct PlaneFit {
  PlaneModel plane;
  std::vector<int> inliers;  // ascending indices into the source cloud
};

struct RoiRect {
  int u_min = 0, v_min = 0, u_max = 0, v_max = 0;
};

struct ObjectCandidate {
  std::vector<int> point_indices;  // ascending
  Vec3 centroid_camera;
  RoiRect roi;
  Image crop;
  std::optional<int> label;
  std::optional<double> score;
};

struct GraspTarget {
  Vec3 position_robot;
  Vec3 approach_axis;  // unit, oriented toward +z in the robot frame
};

struct PipelineConfig {
  std::vector<PassThroughLimits> pass_through{{Axis::Z, 0.3, 1.5}};
  RansacParams ransac;
  double extract_min_height = 0.01;
  double extract_max_height = 0.40;
  ClusterParams cluster;
  int roi_padding = 5;
  CameraIntrinsics intrinsics;
  RigidTransform camera_to_robot;
};

// Invalidates every point with a component outside any limit interval.
OrganizedCloud pass_through(const OrganizedCloud& cloud,
                            const std::vector<PassThroughLimits>& limits);

// Tabletop detection: best-consensus plane from seeded 3-point samples,
// refined by least squares over its inliers. Deterministic per seed;
// hypothesis scoring runs in parallel.
PlaneFit ransac_plane(const OrganizedCloud& cloud, const RansacParams& params);
// Serial reference, same result bit for bit.
PlaneFit ransac_plane_serial(const OrganizedCloud& cloud, const RansacParams& params);

// Valid points with signed plane distance in [min_height, max_height].
std::vector<int> extract_above_plane(const OrganizedCloud& cloud,
                                     const PlaneModel& plane, double min_height,
                                     double max_height);

// Connected components of the "distance <= tolerance" graph, grid-hash
// accelerated. Components outside [min_points, max_points] are dropped;
// output sorted by decreasing size, ties by smallest member index.
std::vector<std::vector<int>> euclidean_cluster(const OrganizedCloud& cloud,
                                                const std::vector<int>& candidates,
                                                const ClusterParams& params);

ObjectCandidate make_candidate(const OrganizedCloud& cloud,
                               const std::vector<int>& cluster,
                               const CameraIntrinsics& k, int roi_padding);

GraspTarget to_robot_frame(const ObjectCandidate& candidate,
                           const PlaneModel& table,
                           const RigidTransform& camera_to_robot);

struct PipelineResult {
  PlaneFit table;
  std::vector<ObjectCandidate> candidates;
  std::vector<GraspTarget> targets;
};

// Full flow: pass-through, plane fit, extraction, clustering, candidate
// construction, optional classification, robot-frame targets.
// Stage failures rethrow as StageError naming the stage.
PipelineResult run_pipeline(const OrganizedCloud& cloud, const PipelineConfig& config,
                            const ClassifierModel* classifier = nullptr);

}  // namespace hma
