#pragma once

// Thin RAII wrapper over an in-place FFTW transform. Plan creation and
// destruction are serialized (the FFTW planner is not thread-safe);
// execution on distinct plans may run concurrently.

#include <complex>
#include <memory>
#include <vector>

namespace qml {

class FftPlan {
 public:
  /// In-place d-dimensional transform of the given row-major shape.
  /// sign = -1 is e^{-2 pi i jk/N} (forward), +1 the unnormalized inverse.
  FftPlan(const std::vector<int>& shape, int sign);
  ~FftPlan();
  FftPlan(const FftPlan&) = delete;
  FftPlan& operator=(const FftPlan&) = delete;

  std::complex<double>* data();
  std::size_t size() const { return size_; }
  void execute();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::size_t size_ = 0;
};

}  // namespace qml
