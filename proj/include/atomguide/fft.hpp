#pragma once

#include <span>

#include "atomguide/grid.hpp"
#include "atomguide/wavefield.hpp"

namespace atomguide {

/// In-place FFTW transforms over a Mesh (1D or 2D).
///
/// Plans are created with FFTW_ESTIMATE so results do not depend on timing
/// measurements; planning is serialized internally, execution is thread-safe.
/// The backward transform is unnormalized (forward then backward scales by size()).
/// Buffers must come from FftwAllocator.
class FourierTransform {
 public:
  explicit FourierTransform(const Mesh& mesh);
  ~FourierTransform();
  FourierTransform(const FourierTransform&) = delete;
  FourierTransform& operator=(const FourierTransform&) = delete;
  FourierTransform(FourierTransform&& other) noexcept;
  FourierTransform& operator=(FourierTransform&& other) noexcept;

  void forward(std::span<Complex> data) const;
  void backward(std::span<Complex> data) const;
  std::size_t size() const noexcept { return size_; }

 private:
  void* forward_ = nullptr;
  void* backward_ = nullptr;
  std::size_t size_ = 0;
};

}  // namespace atomguide
