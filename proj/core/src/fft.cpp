#include "qml/fft.hpp"

#include <fftw3.h>

#include <mutex>

#include "qml/error.hpp"

namespace qml {

namespace {

std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

struct FftPlan::Impl {
  fftw_complex* buf = nullptr;
  fftw_plan plan = nullptr;
};

FftPlan::FftPlan(const std::vector<int>& shape, int sign) : impl_(std::make_unique<Impl>()) {
  if (shape.empty()) throw InvalidArgument("fft: empty shape");
  size_ = 1;
  for (int s : shape) {
    if (s < 1) throw InvalidArgument("fft: axis length must be positive");
    size_ *= static_cast<std::size_t>(s);
  }
  std::lock_guard lock(planner_mutex());
  impl_->buf = fftw_alloc_complex(size_);
  if (!impl_->buf) throw Error("fft: allocation failed");
  impl_->plan = fftw_plan_dft(static_cast<int>(shape.size()), shape.data(), impl_->buf, impl_->buf,
                              sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD, FFTW_ESTIMATE);
  if (!impl_->plan) {
    fftw_free(impl_->buf);
    throw Error("fft: planning failed");
  }
}

FftPlan::~FftPlan() {
  std::lock_guard lock(planner_mutex());
  if (impl_->plan) fftw_destroy_plan(impl_->plan);
  if (impl_->buf) fftw_free(impl_->buf);
}

std::complex<double>* FftPlan::data() { return reinterpret_cast<std::complex<double>*>(impl_->buf); }

void FftPlan::execute() { fftw_execute(impl_->plan); }

}  // namespace qml
