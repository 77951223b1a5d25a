// SPDX-License-Identifier: Apache-2.0
#include "detail/fft.hpp"

#include "sargcp/error.hpp"

#include <fftw3.h>

#include <mutex>

namespace sargcp::detail {

namespace {

std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

}  // namespace

void fft2d(std::vector<std::complex<double>>& buf, std::size_t rows, std::size_t cols, FftDirection dir) {
    if (buf.size() != rows * cols) throw DomainError("FFT buffer size does not match its shape");
    auto* data = reinterpret_cast<fftw_complex*>(buf.data());
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_2d(static_cast<int>(rows), static_cast<int>(cols), data, data,
                                dir == FftDirection::Forward ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
    }
    if (!plan) throw Error("FFTW plan creation failed");
    fftw_execute(plan);
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(plan);
}

}  // namespace sargcp::detail
