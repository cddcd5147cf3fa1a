#include "atomguide/fft.hpp"

#include <fftw3.h>

#include <mutex>
#include <utility>

#include "atomguide/errors.hpp"

namespace atomguide {

namespace {
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_complex* as_fftw(std::span<Complex> data) { return reinterpret_cast<fftw_complex*>(data.data()); }
}  // namespace

FourierTransform::FourierTransform(const Mesh& mesh) : size_(mesh.size()) {
  ComplexBuffer scratch(size_);
  auto* buf = reinterpret_cast<fftw_complex*>(scratch.data());
  std::lock_guard lock(planner_mutex());
  if (mesh.rank() == 1) {
    const int n = static_cast<int>(mesh.x().size());
    forward_ = fftw_plan_dft_1d(n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_1d(n, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  } else {
    const int nx = static_cast<int>(mesh.x().size());
    const int nz = static_cast<int>(mesh.z().size());
    forward_ = fftw_plan_dft_2d(nx, nz, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    backward_ = fftw_plan_dft_2d(nx, nz, buf, buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  if (forward_ == nullptr || backward_ == nullptr) throw SetupError("FFTW planning failed");
}

FourierTransform::~FourierTransform() {
  if (forward_ == nullptr && backward_ == nullptr) return;
  std::lock_guard lock(planner_mutex());
  if (forward_) fftw_destroy_plan(static_cast<fftw_plan>(forward_));
  if (backward_) fftw_destroy_plan(static_cast<fftw_plan>(backward_));
}

FourierTransform::FourierTransform(FourierTransform&& other) noexcept
    : forward_(std::exchange(other.forward_, nullptr)),
      backward_(std::exchange(other.backward_, nullptr)),
      size_(other.size_) {}

FourierTransform& FourierTransform::operator=(FourierTransform&& other) noexcept {
  if (this != &other) {
    std::swap(forward_, other.forward_);
    std::swap(backward_, other.backward_);
    std::swap(size_, other.size_);
  }
  return *this;
}

void FourierTransform::forward(std::span<Complex> data) const {
  if (data.size() != size_) throw ContractError("FourierTransform: size mismatch");
  fftw_execute_dft(static_cast<fftw_plan>(forward_), as_fftw(data), as_fftw(data));
}

void FourierTransform::backward(std::span<Complex> data) const {
  if (data.size() != size_) throw ContractError("FourierTransform: size mismatch");
  fftw_execute_dft(static_cast<fftw_plan>(backward_), as_fftw(data), as_fftw(data));
}

}  // namespace atomguide
