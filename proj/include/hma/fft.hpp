#pragma once

#include <complex>
#include <vector>

namespace hma {

bool is_power_of_two(size_t n);

// In-place iterative radix-2 FFT; size must be a power of two.
void fft_radix2(std::vector<std::complex<double>>& data, bool inverse = false);

}  // namespace hma
