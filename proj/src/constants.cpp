#include "atomguide/constants.hpp"

#include <cmath>

#include "atomguide/errors.hpp"

namespace atomguide {

namespace {
void require_positive(double v, const char* name) {
  if (!(v > 0.0) || !std::isfinite(v)) throw ContractError(std::string(name) + " must be finite and > 0");
}
}  // namespace

void PhysicalConstants::validate() const {
  require_positive(hbar, "hbar");
  require_positive(kB, "kB");
  require_positive(grav, "grav");
  require_positive(massRb87, "massRb87");
  require_positive(scatteringLength, "scatteringLength");
}

void TransitionParams::validate() const {
  require_positive(linewidth, "linewidth");
  require_positive(saturationIntensity, "saturationIntensity");
  if (detuning == 0.0 || !std::isfinite(detuning)) throw ContractError("detuning must be finite and nonzero");
}

}  // namespace atomguide
