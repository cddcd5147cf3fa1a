#include "atomguide/grid.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "atomguide/errors.hpp"

namespace atomguide {

bool is_power_of_two(std::size_t n) noexcept { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) noexcept {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

Grid1D::Grid1D(double xMin, double xMax, std::size_t nPoints) : xMin_(xMin), xMax_(xMax) {
  if (!std::isfinite(xMin) || !std::isfinite(xMax) || !(xMax > xMin)) {
    throw ContractError("Grid1D: need finite xMin < xMax");
  }
  if (nPoints < 16 || !is_power_of_two(nPoints)) {
    throw ContractError("Grid1D: nPoints must be a power of two >= 16, got " + std::to_string(nPoints));
  }
  dx_ = (xMax - xMin) / static_cast<double>(nPoints);
  x_.resize(nPoints);
  k_.resize(nPoints);
  const double dk = 2.0 * std::numbers::pi / (xMax - xMin);
  const auto n = static_cast<long>(nPoints);
  for (long i = 0; i < n; ++i) {
    x_[static_cast<std::size_t>(i)] = xMin + static_cast<double>(i) * dx_;
    const long m = i < n / 2 ? i : i - n;
    k_[static_cast<std::size_t>(i)] = dk * static_cast<double>(m);
  }
}

double Grid1D::dk() const noexcept { return 2.0 * std::numbers::pi / length(); }

double Grid1D::k_max() const noexcept { return std::numbers::pi / dx_; }

bool Grid1D::operator==(const Grid1D& other) const noexcept {
  return xMin_ == other.xMin_ && xMax_ == other.xMax_ && size() == other.size();
}

Mesh::Mesh(Grid1D x) : size_(x.size()), cell_(x.dx()) { axes_.push_back(std::move(x)); }

Mesh::Mesh(Grid2D plane)
    : size_(plane.x.size() * plane.z.size()), cell_(plane.x.dx() * plane.z.dx()) {
  axes_.push_back(std::move(plane.x));
  axes_.push_back(std::move(plane.z));
}

std::shared_ptr<const Mesh> Mesh::line(Grid1D x) { return std::make_shared<const Mesh>(std::move(x)); }

std::shared_ptr<const Mesh> Mesh::plane(Grid1D x, Grid1D z) {
  return std::make_shared<const Mesh>(Grid2D{std::move(x), std::move(z)});
}

}  // namespace atomguide
