// Compares the OpenMP kernels against their serial reference
// implementations: RANSAC plane scoring, MUSIC azimuth scan, scene render.

#include <chrono>
#include <cstdio>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "hma/pipeline.hpp"
#include "hma/sim.hpp"
#include "hma/sound.hpp"

using namespace hma;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

SceneSpec bench_scene() {
  SceneSpec spec;
  spec.table_pose.translation = {0, 0, 0};
  spec.objects.push_back({Shape::Box, {0.06, 0.06, 0.12},
                          {Mat3::identity(), {0.1, 0.0, 0.0}},
                          {200, 40, 40}, 0});
  spec.objects.push_back({Shape::Cylinder, {0.035, 0.0, 0.10},
                          {Mat3::identity(), {-0.15, 0.1, 0.0}},
                          {40, 200, 40}, 1});
  spec.camera_from_world = invert(
      {Mat3::rotation_x(-2.0) * Mat3::rotation_z(-1.5707963267948966),
       Vec3{0.0, -0.7, 0.8}});
  spec.depth_noise_sigma = 0.003;
  spec.seed = 7;
  return spec;
}

}  // namespace

int main() {
#ifdef _OPENMP
  std::printf("threads: %d\n", omp_get_max_threads());
#else
  std::printf("threads: 1 (no OpenMP)\n");
#endif

  {
    const SceneSpec spec = bench_scene();
    auto t0 = Clock::now();
    const RenderResult serial = render_scene_serial(spec);
    const double ts = seconds_since(t0);
    t0 = Clock::now();
    const RenderResult parallel = render_scene(spec);
    const double tp = seconds_since(t0);
    const bool same = serial.cloud.points == parallel.cloud.points &&
                      serial.cloud.rgb == parallel.cloud.rgb;
    std::printf("render_scene   serial %.3fs  parallel %.3fs  speedup %.2fx  %s\n",
                ts, tp, ts / tp, same ? "identical" : "MISMATCH");
  }

  {
    const RenderResult render = render_scene(bench_scene());
    RansacParams params;
    params.iterations = 2000;
    params.seed = 11;
    auto t0 = Clock::now();
    const PlaneFit serial = ransac_plane_serial(render.cloud, params);
    const double ts = seconds_since(t0);
    t0 = Clock::now();
    const PlaneFit parallel = ransac_plane(render.cloud, params);
    const double tp = seconds_since(t0);
    const bool same = serial.inliers == parallel.inliers;
    std::printf("ransac_plane   serial %.3fs  parallel %.3fs  speedup %.2fx  %s\n",
                ts, tp, ts / tp, same ? "identical" : "MISMATCH");
  }

  {
    const MicArray array = MicArray::circular(8, 0.0365);
    AudioSceneSpec audio;
    audio.sources.push_back({Waveform::BandNoise, 120.0, 1.0});
    audio.snr_db = 20.0;
    audio.duration_s = 1.0;
    audio.seed = 3;
    const MultichannelSignal signal = synth_array_signal(array, audio);
    const SpectralFrames frames = stft(signal, 512, 256, Window::Hann);
    std::vector<ComplexMatrix> covs;
    std::vector<double> freqs;
    for (int b = 0; b < frames.n_bins(); ++b) {
      const double f = frames.bin_frequency(b);
      if (f < 500.0 || f > 3000.0) continue;
      covs.push_back(spatial_covariance(frames, b));
      freqs.push_back(f);
    }
    auto t0 = Clock::now();
    const SpatialSpectrum serial = music_spectrum_serial(covs, freqs, array, 1, 0.5);
    const double ts = seconds_since(t0);
    t0 = Clock::now();
    const SpatialSpectrum parallel = music_spectrum(covs, freqs, array, 1, 0.5);
    const double tp = seconds_since(t0);
    const bool same = serial.power == parallel.power;
    std::printf("music_spectrum serial %.3fs  parallel %.3fs  speedup %.2fx  %s\n",
                ts, tp, ts / tp, same ? "identical" : "MISMATCH");
  }
  return 0;
}
