#pragma once

#include <cmath>
#include <functional>

namespace oracle {

// Bound-state energies of -hbar^2/2m psi'' + V psi = E psi on [-L, L] with
// psi(+-L) = 0, by Numerov integration and node counting.
class NumerovShooter {
 public:
  NumerovShooter(std::function<double(double)> v, double halfWidth, int steps, double mass, double hbar)
      : v_(std::move(v)), l_(halfWidth), n_(steps), mass_(mass), hbar_(hbar) {}

  // Nodes of the solution launched from -L, plus one if psi(L) crosses zero at the end.
  int nodes(double e) const {
    const double h = 2.0 * l_ / n_;
    const double f = 2.0 * mass_ / (hbar_ * hbar_) * h * h / 12.0;
    auto q = [&](double x) { return f * (e - v_(x)); };
    double y0 = 0.0;
    double y1 = 1e-12;
    double q0 = q(-l_);
    double q1 = q(-l_ + h);
    int count = 0;
    for (int i = 1; i < n_; ++i) {
      const double x2 = -l_ + (i + 1) * h;
      const double q2 = q(x2);
      const double y2 = (2.0 * y1 * (1.0 - 5.0 * q1) - y0 * (1.0 + q0)) / (1.0 + q2);
      if ((y2 < 0.0) != (y1 < 0.0) && y2 != 0.0) ++count;
      y0 = y1;
      y1 = y2;
      q0 = q1;
      q1 = q2;
      if (std::abs(y1) > 1e200) {
        y0 *= 1e-200;
        y1 *= 1e-200;
      }
    }
    return count;
  }

  // Energy of the level with `level` nodes, bracketed in (lo, hi).
  double level(int level, double lo, double hi) const {
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (nodes(mid) > level) {
        hi = mid;
      } else {
        lo = mid;
      }
      if (hi - lo <= 1e-15 * std::abs(mid)) break;
    }
    return 0.5 * (lo + hi);
  }

 private:
  std::function<double(double)> v_;
  double l_;
  int n_;
  double mass_;
  double hbar_;
};

}  // namespace oracle
