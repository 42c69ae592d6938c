#include "hma/sound.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hma/error.hpp"
#include "hma/fft.hpp"

namespace hma {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

bool MicArray::valid() const {
  if (positions.size() < 2 || sample_rate <= 0.0) return false;
  for (size_t i = 1; i < positions.size(); ++i)
    if (norm(positions[i] - positions[0]) > 1e-12) return true;
  return false;  // all coincident
}

MicArray MicArray::circular(int n_mics, double radius, double sample_rate) {
  MicArray array;
  array.sample_rate = sample_rate;
  array.positions.reserve(n_mics);
  for (int m = 0; m < n_mics; ++m) {
    const double phi = 2.0 * kPi * m / n_mics;
    array.positions.push_back({radius * std::cos(phi), radius * std::sin(phi), 0.0});
  }
  return array;
}

Window window_from_name(const std::string& name) {
  if (name == "hann") return Window::Hann;
  if (name == "rectangular") return Window::Rectangular;
  throw ParseError("unknown window '" + name + "' (expected hann|rectangular)");
}

SpectralFrames stft(const MultichannelSignal& signal, int frame_size, int hop,
                    Window window) {
  if (frame_size < 64 || !is_power_of_two(static_cast<size_t>(frame_size)))
    throw BadFrameSize("frame size must be a power of two >= 64");
  if (hop < 1) throw BadFrameSize("hop must be >= 1");
  if (signal.n_samples() < static_cast<size_t>(frame_size))
    throw SignalTooShort("signal shorter than one frame");

  std::vector<double> win(frame_size, 1.0);
  if (window == Window::Hann)
    for (int i = 0; i < frame_size; ++i)
      win[i] = 0.5 * (1.0 - std::cos(2.0 * kPi * i / frame_size));

  SpectralFrames out;
  out.frame_size = frame_size;
  out.hop = hop;
  out.n_channels = signal.n_channels();
  out.n_frames =
      1 + static_cast<int>((signal.n_samples() - frame_size) / static_cast<size_t>(hop));
  out.sample_rate = signal.sample_rate;
  out.spectra.resize(out.n_channels);

  const int n_bins = out.n_bins();
  for (int ch = 0; ch < out.n_channels; ++ch) {
    out.spectra[ch].resize(out.n_frames);
    for (int t = 0; t < out.n_frames; ++t) {
      std::vector<Complex> buf(frame_size);
      const size_t start = static_cast<size_t>(t) * hop;
      for (int i = 0; i < frame_size; ++i)
        buf[i] = signal.channels[ch][start + i] * win[i];
      fft_radix2(buf);
      out.spectra[ch][t].assign(buf.begin(), buf.begin() + n_bins);
    }
  }
  return out;
}

ComplexMatrix spatial_covariance(const SpectralFrames& frames, int bin) {
  if (frames.n_frames < 1) throw NoFrames("covariance needs at least one frame");
  const int c = frames.n_channels;
  ComplexMatrix r(c);
  std::vector<Complex> x(c);
  for (int t = 0; t < frames.n_frames; ++t) {
    for (int ch = 0; ch < c; ++ch) x[ch] = frames.spectra[ch][t][bin];
    for (int i = 0; i < c; ++i)
      for (int j = 0; j < c; ++j) r(i, j) += x[i] * std::conj(x[j]);
  }
  const double inv_t = 1.0 / frames.n_frames;
  for (auto& v : r.data) v *= inv_t;
  // Enforce exact Hermitian symmetry.
  for (int i = 0; i < c; ++i) {
    r(i, i) = Complex(r(i, i).real(), 0.0);
    for (int j = i + 1; j < c; ++j) {
      const Complex avg = 0.5 * (r(i, j) + std::conj(r(j, i)));
      r(i, j) = avg;
      r(j, i) = std::conj(avg);
    }
  }
  return r;
}

namespace {

double hermitian_defect(const ComplexMatrix& r) {
  double worst = 0.0;
  for (int i = 0; i < r.n; ++i)
    for (int j = 0; j < r.n; ++j)
      worst = std::max(worst, std::abs(r(i, j) - std::conj(r(j, i))));
  return worst;
}

// Cyclic Jacobi for a real symmetric matrix (row-major, size n).
void jacobi_real_symmetric(std::vector<double>& a, std::vector<double>& v, int n) {
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) v[static_cast<size_t>(i) * n + j] = (i == j) ? 1.0 : 0.0;

  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) scale = std::max(scale, std::abs(a[static_cast<size_t>(i) * n + j]));
  const double stop = 1e-12 * std::max(1.0, scale);

  auto at = [&](std::vector<double>& m, int r, int c) -> double& {
    return m[static_cast<size_t>(r) * n + c];
  };

  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < n; ++p)
      for (int q = p + 1; q < n; ++q) off += at(a, p, q) * at(a, p, q);
    if (std::sqrt(off) < stop) break;

    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) {
        const double apq = at(a, p, q);
        if (std::abs(apq) < 1e-300) continue;
        const double theta = (at(a, q, q) - at(a, p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = at(a, k, p), akq = at(a, k, q);
          at(a, k, p) = c * akp - s * akq;
          at(a, k, q) = s * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = at(a, p, k), aqk = at(a, q, k);
          at(a, p, k) = c * apk - s * aqk;
          at(a, q, k) = s * apk + c * aqk;
          const double vkp = at(v, k, p), vkq = at(v, k, q);
          at(v, k, p) = c * vkp - s * vkq;
          at(v, k, q) = s * vkp + c * vkq;
        }
      }
  }
}

}  // namespace

EigResult hermitian_eig(const ComplexMatrix& r) {
  const int c = r.n;
  double norm_scale = 0.0;
  for (const auto& v : r.data) norm_scale = std::max(norm_scale, std::abs(v));
  if (hermitian_defect(r) > 1e-9 * std::max(1.0, norm_scale))
    throw NotHermitian("matrix is not Hermitian");

  // Real-symmetric embedding M = [[A, -B], [B, A]] for R = A + iB;
  // every eigenpair of R shows up twice in M.
  const int n = 2 * c;
  std::vector<double> m(static_cast<size_t>(n) * n, 0.0);
  for (int i = 0; i < c; ++i)
    for (int j = 0; j < c; ++j) {
      const double a = r(i, j).real();
      const double b = r(i, j).imag();
      m[static_cast<size_t>(i) * n + j] = a;
      m[static_cast<size_t>(i + c) * n + (j + c)] = a;
      m[static_cast<size_t>(i) * n + (j + c)] = -b;
      m[static_cast<size_t>(i + c) * n + j] = b;
    }

  std::vector<double> vecs(static_cast<size_t>(n) * n);
  jacobi_real_symmetric(m, vecs, n);

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return m[static_cast<size_t>(a) * n + a] > m[static_cast<size_t>(b) * n + b];
  });

  // Each complex eigenvector appears as (u; v) and (-v; u). Greedy
  // Gram-Schmidt keeps one representative per pair.
  EigResult result;
  result.vectors = ComplexMatrix(c);
  std::vector<std::vector<Complex>> accepted;
  for (int idx : order) {
    if (static_cast<int>(accepted.size()) == c) break;
    std::vector<Complex> x(c);
    for (int i = 0; i < c; ++i)
      x[i] = Complex(vecs[static_cast<size_t>(i) * n + idx],
                     vecs[static_cast<size_t>(i + c) * n + idx]);
    for (const auto& u : accepted) {
      Complex proj(0, 0);
      for (int i = 0; i < c; ++i) proj += std::conj(u[i]) * x[i];
      for (int i = 0; i < c; ++i) x[i] -= proj * u[i];
    }
    double nrm = 0.0;
    for (const auto& xi : x) nrm += std::norm(xi);
    nrm = std::sqrt(nrm);
    if (nrm < 0.5) continue;  // duplicate of an accepted pair member
    for (auto& xi : x) xi /= nrm;
    result.values.push_back(m[static_cast<size_t>(idx) * n + idx]);
    accepted.push_back(std::move(x));
  }

  for (int col = 0; col < c; ++col)
    for (int row = 0; row < c; ++row) result.vectors(row, col) = accepted[col][row];
  return result;
}

std::vector<Complex> steering_vector(const MicArray& array, double azimuth_deg,
                                     double freq_hz) {
  const int c = array.size();
  const double az = azimuth_deg * kPi / 180.0;
  const Vec3 u{std::cos(az), std::sin(az), 0.0};
  std::vector<Complex> a(c);
  const double amp = 1.0 / std::sqrt(static_cast<double>(c));
  for (int m = 0; m < c; ++m) {
    const double tau = -dot(u, array.positions[m]) / array.speed_of_sound;
    const double phase = -2.0 * kPi * freq_hz * tau;
    a[m] = amp * Complex(std::cos(phase), std::sin(phase));
  }
  return a;
}

namespace {

SpatialSpectrum music_spectrum_impl(const std::vector<ComplexMatrix>& covariances,
                                    const std::vector<double>& bin_freqs_hz,
                                    const MicArray& array, int n_sources,
                                    double grid_step_deg, bool parallel) {
  if (covariances.empty()) throw EmptyBand("no frequency bins given");
  if (covariances.size() != bin_freqs_hz.size())
    throw WrongShape("covariance / frequency list size mismatch");
  const int c = array.size();
  if (n_sources >= c) throw TooManySources("need n_sources < channel count");
  if (n_sources < 1) throw InvalidSpec("n_sources must be >= 1");
  const double cells = 360.0 / grid_step_deg;
  if (grid_step_deg <= 0.0 || std::abs(cells - std::round(cells)) > 1e-9)
    throw InvalidSpec("grid step must evenly divide 360 degrees");

  const int n_bins = static_cast<int>(covariances.size());
  const int n_noise = c - n_sources;

  // Noise-subspace projectors P = E_n E_n^H, one per bin.
  std::vector<ComplexMatrix> projectors;
  projectors.reserve(n_bins);
  for (const auto& r : covariances) {
    const EigResult eig = hermitian_eig(r);
    ComplexMatrix p(c);
    for (int k = c - n_noise; k < c; ++k)  // smallest n_noise eigenvalues
      for (int i = 0; i < c; ++i)
        for (int j = 0; j < c; ++j)
          p(i, j) += eig.vectors(i, k) * std::conj(eig.vectors(j, k));
    projectors.push_back(std::move(p));
  }

  SpatialSpectrum spec;
  spec.grid_step_deg = grid_step_deg;
  const int n_grid = static_cast<int>(std::lround(cells));
  spec.power.assign(n_grid, 0.0);
  if (!bin_freqs_hz.empty()) {
    spec.band_lo_hz = *std::min_element(bin_freqs_hz.begin(), bin_freqs_hz.end());
    spec.band_hi_hz = *std::max_element(bin_freqs_hz.begin(), bin_freqs_hz.end());
  }

#pragma omp parallel for schedule(static) if (parallel)
  for (int g = 0; g < n_grid; ++g) {
    const double az = g * grid_step_deg;
    double acc = 0.0;
    std::vector<Complex> pa(c);
    for (int b = 0; b < n_bins; ++b) {
      const std::vector<Complex> a = steering_vector(array, az, bin_freqs_hz[b]);
      const ComplexMatrix& p = projectors[b];
      for (int i = 0; i < c; ++i) {
        Complex s(0, 0);
        for (int j = 0; j < c; ++j) s += p(i, j) * a[j];
        pa[i] = s;
      }
      double denom = 0.0;
      for (int i = 0; i < c; ++i) denom += (std::conj(a[i]) * pa[i]).real();
      acc += 1.0 / std::max(denom, 1e-12);
    }
    spec.power[g] = acc / n_bins;
  }
  return spec;
}

}  // namespace

SpatialSpectrum music_spectrum(const std::vector<ComplexMatrix>& covariances,
                               const std::vector<double>& bin_freqs_hz,
                               const MicArray& array, int n_sources,
                               double grid_step_deg) {
  return music_spectrum_impl(covariances, bin_freqs_hz, array, n_sources,
                             grid_step_deg, true);
}

SpatialSpectrum music_spectrum_serial(const std::vector<ComplexMatrix>& covariances,
                                      const std::vector<double>& bin_freqs_hz,
                                      const MicArray& array, int n_sources,
                                      double grid_step_deg) {
  return music_spectrum_impl(covariances, bin_freqs_hz, array, n_sources,
                             grid_step_deg, false);
}

std::vector<double> find_peaks(const SpatialSpectrum& spec, int k) {
  const int n = static_cast<int>(spec.power.size());
  struct Peak {
    int index;
    double power;
  };
  std::vector<Peak> peaks;
  for (int i = 0; i < n; ++i) {
    const double v = spec.power[i];
    const int prev = (i + n - 1) % n;
    if (spec.power[prev] >= v) continue;  // plateau keeps its leftmost index
    // Walk right across any plateau of equal values.
    int j = i;
    while (spec.power[(j + 1) % n] == v && j < i + n) ++j;
    if (j >= i + n) break;  // fully constant spectrum: no peaks
    if (spec.power[(j + 1) % n] < v) peaks.push_back({i, v});
  }
  std::stable_sort(peaks.begin(), peaks.end(),
                   [](const Peak& a, const Peak& b) { return a.power > b.power; });
  std::vector<double> out;
  for (int i = 0; i < std::min<int>(k, static_cast<int>(peaks.size())); ++i)
    out.push_back(spec.azimuth_deg(peaks[i].index));
  return out;
}

LocalizeResult localize(const MultichannelSignal& signal, const MicArray& array,
                        const LocalizeParams& params) {
  if (signal.n_channels() != array.size())
    throw WrongShape("channel count does not match microphone count");
  double energy = 0.0;
  for (const auto& ch : signal.channels)
    for (double s : ch) energy += s * s;
  if (energy == 0.0) throw SilentInput("all-zero input signal");

  const SpectralFrames frames =
      stft(signal, params.frame_size, params.hop, params.window);

  std::vector<ComplexMatrix> covs;
  std::vector<double> freqs;
  for (int b = 0; b < frames.n_bins(); ++b) {
    const double f = frames.bin_frequency(b);
    if (f < params.band_lo_hz || f > params.band_hi_hz) continue;
    covs.push_back(spatial_covariance(frames, b));
    freqs.push_back(f);
  }
  if (covs.empty()) throw EmptyBand("no FFT bins inside the frequency band");

  LocalizeResult result;
  result.spectrum = music_spectrum(covs, freqs, array, params.n_sources,
                                   params.grid_step_deg);
  result.azimuths_deg = find_peaks(result.spectrum, params.n_sources);
  return result;
}

}  // namespace hma
