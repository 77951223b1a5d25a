// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace sargcp::detail {

enum class FftDirection { Forward, Backward };

/// Unnormalised in-place 2D DFT of a row-major buffer. Plan creation is
/// serialised; execution is thread-safe.
void fft2d(std::vector<std::complex<double>>& buf, std::size_t rows, std::size_t cols, FftDirection dir);

}  // namespace sargcp::detail
