#pragma once

#include <complex>
#include <numbers>

#include <Eigen/Core>

namespace mfeit {

using Complex = std::complex<double>;
using Vec2 = Eigen::Vector2d;

/// Angular frequency in rad/s. The nominal measurement band is
/// omega / 2pi <= 1 MHz; `in_band()` reports it, but the contrast
/// functions accept any positive value so asymptotic limits can be probed.
struct Frequency {
  double omega = 0.0;

  static Frequency from_hz(double hz) { return {2.0 * std::numbers::pi * hz}; }
  double hz() const { return omega / (2.0 * std::numbers::pi); }
  bool in_band() const { return omega > 0.0 && hz() <= 1e6 * (1.0 + 1e-12); }
};

/// Conductivities (S/m) and permittivities (F/m) of background (b),
/// thin insulators (c) and small conductors (d).
struct MaterialSpec {
  double sigma_b = 1.0;
  double eps_b = 1e-9;
  double sigma_c = 1e-6;
  double eps_c = 1e-7;
  double sigma_d = 10.0;
  double eps_d = 1e-9;

  /// Throws InvalidInput unless every entry is finite and nonnegative
  /// and sigma_b > 0.
  void validate() const;

  /// sigma_c / sigma_b <= 1e-3 and sigma_d > sigma_b.
  bool in_insulating_conductive_regime() const;
};

Complex gamma_background(Frequency f, const MaterialSpec& m);
Complex gamma_insulator(Frequency f, const MaterialSpec& m);
Complex gamma_conductor(Frequency f, const MaterialSpec& m);

/// (sigma_c + i w eps_c) / (sigma_b + i w eps_b)
Complex lambda_c(Frequency f, const MaterialSpec& m);

/// ((sigma_d + sigma_b) + i w (eps_d + eps_b)) /
///   (2 ((sigma_d - sigma_b) - i w (eps_d - eps_b)))
///
/// The minus sign in the denominator is kept exactly as in the published
/// expansion. Throws DegenerateContrast when the denominator vanishes.
Complex lambda_d(Frequency f, const MaterialSpec& m);

struct Phantom;

/// Piecewise-constant admittivity: gamma_c inside an insulating strip,
/// gamma_d inside a disk, gamma_b elsewhere. Throws OutOfDomain outside.
Complex admittivity_at(const Vec2& x, Frequency f, const Phantom& phantom);

}  // namespace mfeit
