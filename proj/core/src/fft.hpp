#pragma once

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace ser::dsp::detail {

/// Iterative radix-2 decimation-in-time FFT for one fixed power-of-two size.
/// Immutable after construction; forward() may be called concurrently.
class FftPlan {
 public:
  explicit FftPlan(std::size_t n);

  std::size_t size() const noexcept { return n_; }

  /// In-place forward transform, X[k] = sum_n x[n] e^{-2 pi i k n / N}.
  void forward(std::span<std::complex<double>> data) const;

 private:
  std::size_t n_;
  std::vector<std::size_t> bit_reverse_;
  std::vector<std::complex<double>> twiddles_;  // e^{-2 pi i k / N}, k < N/2
};

}  // namespace ser::dsp::detail
