#include "atomguide/wavefield.hpp"

#include <fftw3.h>

#include <cmath>
#include <string>

#include "atomguide/errors.hpp"
#include "atomguide/fft.hpp"

namespace atomguide {

namespace detail {
void* fftw_aligned_alloc(std::size_t bytes) {
  void* p = fftw_malloc(bytes == 0 ? 1 : bytes);
  if (p == nullptr) throw std::bad_alloc();
  return p;
}
void fftw_aligned_free(void* p) noexcept { fftw_free(p); }
}  // namespace detail

WaveField::WaveField(MeshPtr mesh) : mesh_(std::move(mesh)) {
  if (!mesh_) throw ContractError("WaveField: null mesh");
  psi_.assign(mesh_->size(), Complex{0.0, 0.0});
}

WaveField::WaveField(MeshPtr mesh, ComplexBuffer amplitudes) : mesh_(std::move(mesh)), psi_(std::move(amplitudes)) {
  if (!mesh_) throw ContractError("WaveField: null mesh");
  if (psi_.size() != mesh_->size()) throw ContractError("WaveField: amplitude count does not match mesh");
}

WaveField WaveField::sample(MeshPtr mesh, const std::function<Complex(double, double)>& f) {
  WaveField field(mesh);
  const Mesh& m = *mesh;
  if (m.rank() == 1) {
    for (std::size_t i = 0; i < m.size(); ++i) field.psi_[i] = f(m.x().x(i), 0.0);
  } else {
    const std::size_t nz = m.z().size();
    for (std::size_t i = 0; i < m.x().size(); ++i)
      for (std::size_t j = 0; j < nz; ++j) field.psi_[i * nz + j] = f(m.x().x(i), m.z().x(j));
  }
  return field;
}

void WaveField::normalize() {
  const double n = norm(*this);
  if (!(n > 0.0)) throw NumericFault("cannot normalize a zero field");
  scale(1.0 / std::sqrt(n));
}

void WaveField::scale(Complex factor) noexcept {
  for (auto& v : psi_) v *= factor;
}

double norm(const WaveField& field) {
  double sum = 0.0;
  for (const Complex& v : field.amplitudes()) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw NumericFault("non-finite amplitude in field");
    sum += std::norm(v);
  }
  return sum * field.mesh().cell_volume();
}

double expectation_position(const WaveField& field, Axis axis) {
  const double n = norm(field);
  if (std::abs(n - 1.0) > 1e-6) {
    throw ContractError("expectation_position: field not normalized (norm = " + std::to_string(n) + ")");
  }
  const Mesh& m = field.mesh();
  const auto a = static_cast<int>(axis);
  if (a >= m.rank()) throw ContractError("expectation_position: axis not present on mesh");
  double sum = 0.0;
  if (m.rank() == 1) {
    for (std::size_t i = 0; i < m.size(); ++i) sum += m.x().x(i) * std::norm(field[i]);
  } else {
    const std::size_t nz = m.z().size();
    for (std::size_t i = 0; i < m.x().size(); ++i) {
      for (std::size_t j = 0; j < nz; ++j) {
        const double coord = a == 0 ? m.x().x(i) : m.z().x(j);
        sum += coord * std::norm(field[i * nz + j]);
      }
    }
  }
  return sum * m.cell_volume();
}

Complex overlap(const WaveField& a, const WaveField& b) {
  if (!(a.mesh() == b.mesh())) throw ContractError("overlap: fields live on different grids");
  Complex sum{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) sum += std::conj(a[i]) * b[i];
  return sum * a.mesh().cell_volume();
}

std::vector<double> density(const WaveField& field) {
  std::vector<double> d(field.size());
  for (std::size_t i = 0; i < field.size(); ++i) d[i] = std::norm(field[i]);
  return d;
}

WaveField spectral_embed(const WaveField& coarse, const MeshPtr& fine) {
  if (coarse.mesh().rank() != 1 || fine->rank() != 1) throw ContractError("spectral_embed: 1D meshes only");
  const Grid1D& gc = coarse.mesh().x();
  const Grid1D& gf = fine->x();
  const double ratio = gc.dx() / gf.dx();
  const auto r = static_cast<std::size_t>(std::llround(ratio));
  if (r == 0 || !is_power_of_two(r) || std::abs(ratio - static_cast<double>(r)) > 1e-9 * ratio) {
    throw ContractError("spectral_embed: spacing ratio must be a power of two");
  }
  const double offset = (gc.x_min() - gf.x_min()) / gf.dx();
  const auto m = std::llround(offset);
  if (std::abs(offset - static_cast<double>(m)) > 1e-6 || m < 0 ||
      static_cast<std::size_t>(m) + gc.size() * r > gf.size()) {
    throw ContractError("spectral_embed: source grid is not aligned inside the target grid");
  }
  const std::size_t nc = gc.size();
  const std::size_t nu = nc * r;
  ComplexBuffer spectrum(coarse.amplitudes().begin(), coarse.amplitudes().end());
  FourierTransform(coarse.mesh()).forward(spectrum);
  ComplexBuffer padded(nu, Complex{0.0, 0.0});
  const std::size_t half = nc / 2;
  for (std::size_t j = 0; j < half; ++j) padded[j] = spectrum[j];
  for (std::size_t j = half + 1; j < nc; ++j) padded[nu - (nc - j)] = spectrum[j];
  if (r > 1) {
    padded[half] = 0.5 * spectrum[half];
    padded[nu - half] = 0.5 * spectrum[half];
  } else {
    padded[half] = spectrum[half];
  }
  const auto upsampled_mesh = Mesh::line(Grid1D(gc.x_min(), gc.x_max(), nu));
  FourierTransform(*upsampled_mesh).backward(padded);
  WaveField out(fine);
  const double inv = 1.0 / static_cast<double>(nc);
  for (std::size_t j = 0; j < nu; ++j) out[static_cast<std::size_t>(m) + j] = padded[j] * inv;
  return out;
}

}  // namespace atomguide
