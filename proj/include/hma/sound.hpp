#pragma once

#include <complex>
#include <string>
#include <vector>

#include "hma/geometry.hpp"

namespace hma {

using Complex = std::complex<double>;

// Square complex matrix, row-major.
struct ComplexMatrix {
  int n = 0;
  std::vector<Complex> data;

  explicit ComplexMatrix(int size = 0) : n(size), data(static_cast<size_t>(size) * size) {}
  Complex& operator()(int r, int c) { return data[static_cast<size_t>(r) * n + c]; }
  const Complex& operator()(int r, int c) const {
    return data[static_cast<size_t>(r) * n + c];
  }
};

struct MicArray {
  std::vector<Vec3> positions;   // meters, array-centered
  double sample_rate = 16000.0;  // Hz
  double speed_of_sound = 343.0; // m/s

  int size() const { return static_cast<int>(positions.size()); }
  bool valid() const;

  // n mics uniformly spaced on a horizontal circle, mic 0 at +x.
  static MicArray circular(int n_mics, double radius, double sample_rate = 16000.0);
};

struct MultichannelSignal {
  std::vector<std::vector<double>> channels;
  double sample_rate = 16000.0;

  int n_channels() const { return static_cast<int>(channels.size()); }
  size_t n_samples() const { return channels.empty() ? 0 : channels[0].size(); }
};

enum class Window { Rectangular, Hann };
Window window_from_name(const std::string& name);

struct SpectralFrames {
  int frame_size = 0;
  int hop = 0;
  int n_channels = 0;
  int n_frames = 0;
  double sample_rate = 0.0;
  // spectra[channel][frame] has frame_size/2 + 1 bins.
  std::vector<std::vector<std::vector<Complex>>> spectra;

  int n_bins() const { return frame_size / 2 + 1; }
  double bin_frequency(int bin) const { return bin * sample_rate / frame_size; }
};

struct SpatialSpectrum {
  double grid_step_deg = 1.0;
  std::vector<double> power;     // one per azimuth 0, step, 2*step, ...
  double band_lo_hz = 0.0;
  double band_hi_hz = 0.0;

  double azimuth_deg(int i) const { return i * grid_step_deg; }
};

SpectralFrames stft(const MultichannelSignal& signal, int frame_size, int hop,
                    Window window);

// R = (1/T) sum_t x_t x_t^H at one bin, symmetrized.
ComplexMatrix spatial_covariance(const SpectralFrames& frames, int bin);

struct EigResult {
  std::vector<double> values;  // descending
  ComplexMatrix vectors;       // column i pairs with values[i]; orthonormal
};

// Hermitian eigendecomposition via cyclic Jacobi on the real-symmetric
// 2Cx2C embedding.
EigResult hermitian_eig(const ComplexMatrix& r);

// Far-field plane-wave response, unit norm.
std::vector<Complex> steering_vector(const MicArray& array, double azimuth_deg,
                                     double freq_hz);

// MUSIC pseudospectrum averaged over the given bins.
SpatialSpectrum music_spectrum(const std::vector<ComplexMatrix>& covariances,
                               const std::vector<double>& bin_freqs_hz,
                               const MicArray& array, int n_sources,
                               double grid_step_deg);
// Serial reference, same result.
SpatialSpectrum music_spectrum_serial(const std::vector<ComplexMatrix>& covariances,
                                      const std::vector<double>& bin_freqs_hz,
                                      const MicArray& array, int n_sources,
                                      double grid_step_deg);

// Circular local maxima (plateau reports its leftmost index), strongest first.
std::vector<double> find_peaks(const SpatialSpectrum& spec, int k);

struct LocalizeParams {
  int frame_size = 512;
  int hop = 256;
  Window window = Window::Hann;
  double band_lo_hz = 500.0;
  double band_hi_hz = 3000.0;
  int n_sources = 1;
  double grid_step_deg = 1.0;
};

struct LocalizeResult {
  std::vector<double> azimuths_deg;  // strongest first
  SpatialSpectrum spectrum;
};

LocalizeResult localize(const MultichannelSignal& signal, const MicArray& array,
                        const LocalizeParams& params);

}  // namespace hma
