#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace atomguide {

/// Uniform periodic axis [xMin, xMax) with its conjugate FFT wavenumbers.
///
/// Sample i sits at xMin + i*dx with dx = (xMax - xMin)/n. The wavenumber
/// array uses the standard DFT ordering: 0, dk, ..., (n/2-1)dk, -n/2 dk, ..., -dk
/// with dk = 2*pi/(xMax - xMin).
class Grid1D {
 public:
  Grid1D(double xMin, double xMax, std::size_t nPoints);

  double x_min() const noexcept { return xMin_; }
  double x_max() const noexcept { return xMax_; }
  double length() const noexcept { return xMax_ - xMin_; }
  double dx() const noexcept { return dx_; }
  double dk() const noexcept;
  /// Nyquist wavenumber pi/dx.
  double k_max() const noexcept;
  std::size_t size() const noexcept { return x_.size(); }

  double x(std::size_t i) const noexcept { return x_[i]; }
  std::span<const double> positions() const noexcept { return x_; }
  std::span<const double> wavenumbers() const noexcept { return k_; }

  /// Index of the sample mirrored through x = 0, valid when xMin = -xMax.
  std::size_t mirror_index(std::size_t i) const noexcept { return (size() - i) % size(); }

  bool operator==(const Grid1D& other) const noexcept;

 private:
  double xMin_;
  double xMax_;
  double dx_;
  std::vector<double> x_;
  std::vector<double> k_;
};

/// Plane (x, z) grid; storage is row-major with z fastest.
struct Grid2D {
  Grid1D x;
  Grid1D z;
};

/// Rank-erased grid used by fields and propagators (one or two axes).
class Mesh {
 public:
  explicit Mesh(Grid1D x);
  explicit Mesh(Grid2D plane);

  static std::shared_ptr<const Mesh> line(Grid1D x);
  static std::shared_ptr<const Mesh> plane(Grid1D x, Grid1D z);

  int rank() const noexcept { return static_cast<int>(axes_.size()); }
  const Grid1D& axis(int i) const { return axes_.at(static_cast<std::size_t>(i)); }
  const Grid1D& x() const { return axes_.front(); }
  const Grid1D& z() const { return axes_.at(1); }
  std::size_t size() const noexcept { return size_; }
  double cell_volume() const noexcept { return cell_; }

  bool operator==(const Mesh& other) const noexcept { return axes_ == other.axes_; }

 private:
  std::vector<Grid1D> axes_;
  std::size_t size_ = 0;
  double cell_ = 0.0;
};

using MeshPtr = std::shared_ptr<const Mesh>;

bool is_power_of_two(std::size_t n) noexcept;
std::size_t next_power_of_two(std::size_t n) noexcept;

}  // namespace atomguide
