#pragma once

#include <complex>
#include <cstddef>
#include <functional>
#include <new>
#include <span>
#include <vector>

#include "atomguide/grid.hpp"

namespace atomguide {

using Complex = std::complex<double>;

namespace detail {
void* fftw_aligned_alloc(std::size_t bytes);
void fftw_aligned_free(void* p) noexcept;
}  // namespace detail

/// Allocator handing out FFTW-aligned storage so every buffer can be fed to
/// the same precomputed plan.
template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() noexcept = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(detail::fftw_aligned_alloc(n * sizeof(T))); }
  void deallocate(T* p, std::size_t) noexcept { detail::fftw_aligned_free(p); }
  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept {
    return true;
  }
};

using ComplexBuffer = std::vector<Complex, FftwAllocator<Complex>>;

enum class Axis { X = 0, Z = 1 };

/// Complex amplitudes on a Mesh. Normalization convention: sum |psi|^2 * cellVolume = 1.
class WaveField {
 public:
  explicit WaveField(MeshPtr mesh);
  WaveField(MeshPtr mesh, ComplexBuffer amplitudes);

  /// Samples f at every node (1D: f(x, 0); 2D: f(x, z)).
  static WaveField sample(MeshPtr mesh, const std::function<Complex(double x, double z)>& f);

  const Mesh& mesh() const noexcept { return *mesh_; }
  const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
  std::size_t size() const noexcept { return psi_.size(); }

  std::span<Complex> amplitudes() noexcept { return psi_; }
  std::span<const Complex> amplitudes() const noexcept { return psi_; }
  Complex& operator[](std::size_t i) noexcept { return psi_[i]; }
  const Complex& operator[](std::size_t i) const noexcept { return psi_[i]; }

  /// Rescales to unit norm; throws NumericFault for non-finite or zero fields.
  void normalize();
  void scale(Complex factor) noexcept;

 private:
  MeshPtr mesh_;
  ComplexBuffer psi_;
};

/// sum |psi|^2 * cellVolume. Throws NumericFault on non-finite amplitudes.
double norm(const WaveField& field);

/// <coord> along `axis`; throws ContractError if |norm - 1| > 1e-6.
double expectation_position(const WaveField& field, Axis axis);

/// sum conj(a) b * cellVolume; ContractError on grid mismatch.
Complex overlap(const WaveField& a, const WaveField& b);

/// |psi|^2 per node.
std::vector<double> density(const WaveField& field);

/// Band-limited (trigonometric) interpolation of a 1D field onto a finer mesh
/// whose spacing divides the source spacing by a power of two and whose nodes
/// contain the source nodes. Nodes outside the source domain are set to zero.
/// Throws ContractError when the grids are not aligned this way.
WaveField spectral_embed(const WaveField& coarse, const MeshPtr& fine);

}  // namespace atomguide
