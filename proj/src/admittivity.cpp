#include "mfeit/admittivity.hpp"

#include <cmath>

#include "mfeit/errors.hpp"
#include "mfeit/geometry.hpp"

namespace mfeit {

void MaterialSpec::validate() const {
  for (double v : {sigma_b, eps_b, sigma_c, eps_c, sigma_d, eps_d}) {
    if (!std::isfinite(v) || v < 0.0) {
      throw Error(ErrorCode::kInvalidInput,
                  "material parameters must be finite and nonnegative");
    }
  }
  if (sigma_b <= 0.0) {
    throw Error(ErrorCode::kInvalidInput, "sigma_b must be positive");
  }
}

bool MaterialSpec::in_insulating_conductive_regime() const {
  return sigma_c / sigma_b <= 1e-3 && sigma_d > sigma_b;
}

Complex gamma_background(Frequency f, const MaterialSpec& m) {
  return {m.sigma_b, f.omega * m.eps_b};
}

Complex gamma_insulator(Frequency f, const MaterialSpec& m) {
  return {m.sigma_c, f.omega * m.eps_c};
}

Complex gamma_conductor(Frequency f, const MaterialSpec& m) {
  return {m.sigma_d, f.omega * m.eps_d};
}

Complex lambda_c(Frequency f, const MaterialSpec& m) {
  return gamma_insulator(f, m) / gamma_background(f, m);
}

Complex lambda_d(Frequency f, const MaterialSpec& m) {
  const Complex num{m.sigma_d + m.sigma_b, f.omega * (m.eps_d + m.eps_b)};
  const Complex den{2.0 * (m.sigma_d - m.sigma_b),
                    -2.0 * f.omega * (m.eps_d - m.eps_b)};
  if (den == Complex{0.0, 0.0}) {
    throw Error(ErrorCode::kDegenerateContrast,
                "conductor and background admittivities coincide");
  }
  return num / den;
}

Complex admittivity_at(const Vec2& x, Frequency f, const Phantom& phantom) {
  if (x.norm() >= phantom.domain_radius) {
    throw Error(ErrorCode::kOutOfDomain, "point outside the domain");
  }
  for (const auto& c : phantom.insulators) {
    const Vec2 st = c.local(x);
    if (st.x() >= 0.0 && st.x() <= c.length() &&
        std::abs(st.y()) < c.half_thickness) {
      return gamma_insulator(f, phantom.materials);
    }
  }
  for (const auto& d : phantom.disks) {
    if ((x - d.center).norm() < d.radius) {
      return gamma_conductor(f, phantom.materials);
    }
  }
  return gamma_background(f, phantom.materials);
}

}  // namespace mfeit
