#include "hma/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "hma/error.hpp"
#include "hma/rng.hpp"

namespace hma {
namespace {

double component(const Vec3& p, Axis axis) {
  switch (axis) {
    case Axis::X: return p.x;
    case Axis::Y: return p.y;
    default: return p.z;
  }
}

// Smallest eigenvector of a symmetric 3x3 via cyclic Jacobi.
Vec3 smallest_eigenvector(double a[3][3]) {
  double v[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  for (int sweep = 0; sweep < 50; ++sweep) {
    double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
    if (off < 1e-15) break;
    for (int p = 0; p < 2; ++p)
      for (int q = p + 1; q < 3; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
  }
  int min_i = 0;
  for (int i = 1; i < 3; ++i)
    if (a[i][i] < a[min_i][min_i]) min_i = i;
  return {v[0][min_i], v[1][min_i], v[2][min_i]};
}

// Orient so that the camera origin has non-negative signed distance.
PlaneModel oriented(Vec3 normal, double d) {
  if (d < 0.0) {
    normal = -normal;
    d = -d;
  }
  return {normal, d};
}

PlaneModel fit_plane_least_squares(const OrganizedCloud& cloud,
                                   const std::vector<int>& indices) {
  Vec3 centroid{0, 0, 0};
  for (int i : indices) centroid = centroid + cloud.points[i];
  centroid = centroid / static_cast<double>(indices.size());
  double cov[3][3] = {};
  for (int i : indices) {
    const Vec3 q = cloud.points[i] - centroid;
    cov[0][0] += q.x * q.x;
    cov[0][1] += q.x * q.y;
    cov[0][2] += q.x * q.z;
    cov[1][1] += q.y * q.y;
    cov[1][2] += q.y * q.z;
    cov[2][2] += q.z * q.z;
  }
  cov[1][0] = cov[0][1];
  cov[2][0] = cov[0][2];
  cov[2][1] = cov[1][2];
  const Vec3 n = normalized(smallest_eigenvector(cov));
  return oriented(n, -dot(n, centroid));
}

bool all_collinear(const OrganizedCloud& cloud, const std::vector<int>& valid_idx) {
  const Vec3 p0 = cloud.points[valid_idx[0]];
  Vec3 dir{0, 0, 0};
  size_t k = 1;
  for (; k < valid_idx.size(); ++k) {
    dir = cloud.points[valid_idx[k]] - p0;
    if (norm(dir) > 1e-12) break;
  }
  if (k == valid_idx.size()) return true;  // all coincident
  dir = normalized(dir);
  for (size_t i = k + 1; i < valid_idx.size(); ++i) {
    const Vec3 q = cloud.points[valid_idx[i]] - p0;
    if (norm(cross(dir, q)) > 1e-9 * std::max(1.0, norm(q))) return false;
  }
  return true;
}

PlaneFit ransac_plane_impl(const OrganizedCloud& cloud, const RansacParams& params,
                           bool parallel) {
  std::vector<int> valid_idx;
  valid_idx.reserve(cloud.size());
  for (int i = 0; i < cloud.size(); ++i)
    if (cloud.valid[i]) valid_idx.push_back(i);
  if (valid_idx.size() < 3)
    throw DegenerateInput("need at least 3 valid points for a plane");
  if (all_collinear(cloud, valid_idx))
    throw DegenerateInput("valid points are collinear");

  // Samples are drawn serially so the parallel scan stays deterministic.
  Rng rng(params.seed);
  const int n = static_cast<int>(valid_idx.size());
  std::vector<std::array<int, 3>> samples(params.iterations);
  for (auto& s : samples) {
    s[0] = static_cast<int>(rng.next_below(n));
    do {
      s[1] = static_cast<int>(rng.next_below(n));
    } while (s[1] == s[0]);
    do {
      s[2] = static_cast<int>(rng.next_below(n));
    } while (s[2] == s[0] || s[2] == s[1]);
  }

  std::vector<int> counts(params.iterations, -1);
  std::vector<PlaneModel> hypotheses(params.iterations);

#pragma omp parallel for schedule(static) if (parallel)
  for (int it = 0; it < params.iterations; ++it) {
    const Vec3 a = cloud.points[valid_idx[samples[it][0]]];
    const Vec3 b = cloud.points[valid_idx[samples[it][1]]];
    const Vec3 c = cloud.points[valid_idx[samples[it][2]]];
    const Vec3 nr = cross(b - a, c - a);
    const double len = norm(nr);
    if (len < 1e-12) continue;  // degenerate sample
    const Vec3 normal = nr / len;
    const PlaneModel plane = oriented(normal, -dot(normal, a));
    int count = 0;
    for (int idx : valid_idx)
      if (std::abs(signed_plane_distance(plane, cloud.points[idx])) <=
          params.inlier_threshold)
        ++count;
    counts[it] = count;
    hypotheses[it] = plane;
  }

  int best_it = -1, best_count = -1;
  for (int it = 0; it < params.iterations; ++it)
    if (counts[it] > best_count) {
      best_count = counts[it];
      best_it = it;
    }
  if (best_it < 0 || best_count < 3 ||
      best_count < params.min_inlier_fraction * n)
    throw NoConsensus("best inlier fraction below minimum");

  auto collect_inliers = [&](const PlaneModel& plane) {
    std::vector<int> inliers;
    for (int idx : valid_idx)
      if (std::abs(signed_plane_distance(plane, cloud.points[idx])) <=
          params.inlier_threshold)
        inliers.push_back(idx);
    return inliers;
  };

  std::vector<int> inliers = collect_inliers(hypotheses[best_it]);
  PlaneModel refined = fit_plane_least_squares(cloud, inliers);
  inliers = collect_inliers(refined);
  if (static_cast<int>(inliers.size()) < params.min_inlier_fraction * n)
    throw NoConsensus("refined plane lost consensus");
  return {refined, std::move(inliers)};
}

}  // namespace

OrganizedCloud pass_through(const OrganizedCloud& cloud,
                            const std::vector<PassThroughLimits>& limits) {
  for (const auto& lim : limits)
    if (!(lim.min < lim.max))
      throw InvalidLimits("pass-through interval requires min < max");
  OrganizedCloud out = cloud;
  for (int i = 0; i < out.size(); ++i) {
    if (!out.valid[i]) continue;
    for (const auto& lim : limits) {
      const double v = component(out.points[i], lim.axis);
      if (v < lim.min || v > lim.max) {
        out.valid[i] = 0;
        break;
      }
    }
  }
  return out;
}

PlaneFit ransac_plane(const OrganizedCloud& cloud, const RansacParams& params) {
  return ransac_plane_impl(cloud, params, true);
}

PlaneFit ransac_plane_serial(const OrganizedCloud& cloud, const RansacParams& params) {
  return ransac_plane_impl(cloud, params, false);
}

std::vector<int> extract_above_plane(const OrganizedCloud& cloud,
                                     const PlaneModel& plane, double min_height,
                                     double max_height) {
  std::vector<int> out;
  for (int i = 0; i < cloud.size(); ++i) {
    if (!cloud.valid[i]) continue;
    const double h = signed_plane_distance(plane, cloud.points[i]);
    if (h >= min_height && h <= max_height) out.push_back(i);
  }
  return out;
}

namespace {

struct UnionFind {
  std::vector<int> parent;
  explicit UnionFind(int n) : parent(n) {
    for (int i = 0; i < n; ++i) parent[i] = i;
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent[std::max(a, b)] = std::min(a, b);
  }
};

struct CellKey {
  int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash {
  size_t operator()(const CellKey& k) const {
    uint64_t h = static_cast<uint64_t>(k.x) * 0x9e3779b97f4a7c15ULL;
    h ^= static_cast<uint64_t>(k.y) * 0xbf58476d1ce4e5b9ULL;
    h ^= static_cast<uint64_t>(k.z) * 0x94d049bb133111ebULL;
    return static_cast<size_t>(h ^ (h >> 31));
  }
};

}  // namespace

std::vector<std::vector<int>> euclidean_cluster(const OrganizedCloud& cloud,
                                                const std::vector<int>& candidates,
                                                const ClusterParams& params) {
  const int n = static_cast<int>(candidates.size());
  const double tol = params.tolerance;
  const double tol2 = tol * tol;

  // Cell edge = tolerance, so every pair within tolerance sits in
  // adjacent cells; linkage then matches the O(n^2) graph exactly.
  std::unordered_map<CellKey, std::vector<int>, CellHash> grid;
  auto cell_of = [&](const Vec3& p) {
    return CellKey{static_cast<int64_t>(std::floor(p.x / tol)),
                   static_cast<int64_t>(std::floor(p.y / tol)),
                   static_cast<int64_t>(std::floor(p.z / tol))};
  };
  for (int i = 0; i < n; ++i) grid[cell_of(cloud.points[candidates[i]])].push_back(i);

  UnionFind uf(n);
  for (int i = 0; i < n; ++i) {
    const Vec3& p = cloud.points[candidates[i]];
    const CellKey c = cell_of(p);
    for (int64_t dx = -1; dx <= 1; ++dx)
      for (int64_t dy = -1; dy <= 1; ++dy)
        for (int64_t dz = -1; dz <= 1; ++dz) {
          auto it = grid.find({c.x + dx, c.y + dy, c.z + dz});
          if (it == grid.end()) continue;
          for (int j : it->second) {
            if (j <= i) continue;
            const Vec3 q = cloud.points[candidates[j]] - p;
            if (dot(q, q) <= tol2) uf.unite(i, j);
          }
        }
  }

  std::unordered_map<int, std::vector<int>> comps;
  for (int i = 0; i < n; ++i) comps[uf.find(i)].push_back(candidates[i]);

  std::vector<std::vector<int>> clusters;
  for (auto& [root, members] : comps) {
    const int size = static_cast<int>(members.size());
    if (size < params.min_points || size > params.max_points) continue;
    std::sort(members.begin(), members.end());
    clusters.push_back(std::move(members));
  }
  std::sort(clusters.begin(), clusters.end(), [](const auto& a, const auto& b) {
    if (a.size() != b.size()) return a.size() > b.size();
    return a.front() < b.front();
  });
  return clusters;
}

ObjectCandidate make_candidate(const OrganizedCloud& cloud,
                               const std::vector<int>& cluster,
                               const CameraIntrinsics& k, int roi_padding) {
  if (cluster.empty()) throw EmptyCluster("candidate needs at least one point");
  ObjectCandidate cand;
  cand.point_indices = cluster;
  std::sort(cand.point_indices.begin(), cand.point_indices.end());

  Vec3 sum{0, 0, 0};
  int u_min = cloud.width, u_max = -1, v_min = cloud.height, v_max = -1;
  for (int idx : cand.point_indices) {
    sum = sum + cloud.points[idx];
    const int col = idx % cloud.width;
    const int row = idx / cloud.width;
    u_min = std::min(u_min, col);
    u_max = std::max(u_max, col);
    v_min = std::min(v_min, row);
    v_max = std::max(v_max, row);
  }
  cand.centroid_camera = sum / static_cast<double>(cand.point_indices.size());
  cand.roi = {std::max(0, u_min - roi_padding), std::max(0, v_min - roi_padding),
              std::min(k.width - 1, u_max + roi_padding),
              std::min(k.height - 1, v_max + roi_padding)};

  Image full;
  full.width = cloud.width;
  full.height = cloud.height;
  full.rgb = cloud.rgb;
  cand.crop = crop_image(full, cand.roi.u_min, cand.roi.v_min, cand.roi.u_max,
                         cand.roi.v_max);
  return cand;
}

GraspTarget to_robot_frame(const ObjectCandidate& candidate,
                           const PlaneModel& table,
                           const RigidTransform& camera_to_robot) {
  GraspTarget target;
  target.position_robot = transform_point(camera_to_robot, candidate.centroid_camera);
  Vec3 axis = camera_to_robot.rotation * table.normal;
  if (axis.z < 0.0) axis = -axis;
  target.approach_axis = normalized(axis);
  return target;
}

PipelineResult run_pipeline(const OrganizedCloud& cloud, const PipelineConfig& config,
                            const ClassifierModel* classifier) {
  auto stage = [](const char* name, auto&& fn) {
    try {
      return fn();
    } catch (const Error& e) {
      throw StageError(name, e.what());
    }
  };

  OrganizedCloud filtered = stage("pass_through", [&] {
    return pass_through(cloud, config.pass_through);
  });
  PipelineResult result;
  result.table = stage("ransac_plane", [&] {
    return ransac_plane(filtered, config.ransac);
  });
  std::vector<int> above = stage("extract_above_plane", [&] {
    return extract_above_plane(filtered, result.table.plane,
                               config.extract_min_height, config.extract_max_height);
  });
  std::vector<std::vector<int>> clusters = stage("euclidean_cluster", [&] {
    return euclidean_cluster(filtered, above, config.cluster);
  });
  for (const auto& cluster : clusters) {
    ObjectCandidate cand = stage("make_candidate", [&] {
      return make_candidate(filtered, cluster, config.intrinsics, config.roi_padding);
    });
    if (classifier != nullptr) {
      const Prediction pred = stage("classify", [&] {
        return classifier->classify(preprocess(cand.crop));
      });
      cand.label = pred.label;
      cand.score = pred.score;
    }
    result.targets.push_back(stage("to_robot_frame", [&] {
      return to_robot_frame(cand, result.table.plane, config.camera_to_robot);
    }));
    result.candidates.push_back(std::move(cand));
  }
  return result;
}

}  // namespace hma
