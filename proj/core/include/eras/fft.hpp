// Copyright 2026 The eras Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace eras {

// Iterative radix-2 FFT. Sizes are powers of two; desk workloads only need
// 16..65536 so no fancier kernel is warranted.
void fft_inplace(std::vector<std::complex<double>>& x, bool inverse);

std::size_t next_pow2(std::size_t n);

// Real-input forward transform returning the n/2+1 non-redundant bins.
std::vector<std::complex<double>> rfft(const std::vector<double>& x,
                                       std::size_t n);

// Inverse of rfft for a Hermitian half-spectrum of size n/2+1.
std::vector<double> irfft(const std::vector<std::complex<double>>& half,
                          std::size_t n);

// Full linear convolution (length a+b-1) via FFT.
std::vector<double> fft_convolve(const std::vector<double>& a,
                                 const std::vector<double>& b);

}  // namespace eras
