// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <vector>

namespace skybeam::fft {

// Unscaled forward DFT / (1/n)-scaled inverse DFT of arbitrary length.
// Powers of two run the iterative radix-2 kernel; other lengths go through
// Bluestein's chirp-z reduction to a power-of-two convolution.
void transform(std::vector<std::complex<double>>& a, bool inverse);

// 2-D transform over an h-by-w plane pair stored row-major (re/im separate).
// Forward is unscaled; inverse carries the full 1/(h*w) factor so that
// inverse(forward(x)) == x.
void transform2d(double* re, double* im, int h, int w, bool inverse);

}  // namespace skybeam::fft
