#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <memory>
#include <mutex>
#include <vector>

#include "frd/error.hpp"

namespace frd {

namespace detail {
// FFTW's planner is not reentrant; execution with the new-array interface is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
}  // namespace detail

/// fftw_malloc-aligned complex array.
class ComplexBuffer {
 public:
  explicit ComplexBuffer(std::size_t n)
      : size_(n), data_(static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * n))) {
    if (!data_) throw std::bad_alloc();
  }

  std::size_t size() const noexcept { return size_; }
  fftw_complex* raw() noexcept { return data_.get(); }
  std::complex<double>* data() noexcept {
    return reinterpret_cast<std::complex<double>*>(data_.get());
  }
  std::complex<double>& operator[](std::size_t i) noexcept { return data()[i]; }

 private:
  std::size_t size_;
  std::unique_ptr<fftw_complex, detail::FftwFree> data_;
};

/// Unnormalized d-dimensional complex transform on an N^d grid, row-major.
/// sign = FFTW_FORWARD computes sum_x f(x) e^{-i xi x}; FFTW_BACKWARD uses e^{+i xi x}.
class FftPlan {
 public:
  FftPlan(int d, int N, int sign) : d_(d), N_(N) {
    detail::require(d >= 1 && d <= 3 && N >= 1, "fft", "FftPlan", "need 1 <= d <= 3, N >= 1");
    std::size_t total = 1;
    for (int i = 0; i < d; ++i) total *= static_cast<std::size_t>(N);
    total_ = total;
    ComplexBuffer scratch(total);
    std::vector<int> dims(d, N);
    std::lock_guard lock(detail::fftw_planner_mutex());
    plan_ = fftw_plan_dft(d, dims.data(), scratch.raw(), scratch.raw(), sign, FFTW_ESTIMATE);
    if (!plan_) throw Error("fft", "FftPlan", "fftw_plan_dft failed");
  }
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;
  ~FftPlan() {
    std::lock_guard lock(detail::fftw_planner_mutex());
    fftw_destroy_plan(plan_);
  }

  /// In-place transform of a buffer holding N^d values.
  void execute(ComplexBuffer& buf) const {
    detail::require(buf.size() == total_, "fft", "execute", "buffer size mismatch");
    fftw_execute_dft(plan_, buf.raw(), buf.raw());
  }

 private:
  int d_, N_;
  std::size_t total_ = 0;
  fftw_plan plan_ = nullptr;
};

}  // namespace frd
