#pragma once

// Sign-exact orientation and in-circle tests. A floating-point filter with
// Shewchuk's static error bounds answers almost every query; the remaining
// near-degenerate ones are recomputed in exact rational arithmetic.

#include <cmath>
#include <limits>

#include <gmpxx.h>

#include "mfeit/admittivity.hpp"

namespace mfeit::detail {

inline int sign_of(double v) { return (v > 0) - (v < 0); }

inline int orient2d(const Vec2& a, const Vec2& b, const Vec2& c) {
  constexpr double eps = std::numeric_limits<double>::epsilon() * 0.5;
  constexpr double err_bound = (3.0 + 16.0 * eps) * eps;
  const double left = (a.x() - c.x()) * (b.y() - c.y());
  const double right = (a.y() - c.y()) * (b.x() - c.x());
  const double det = left - right;
  const double bound = err_bound * (std::abs(left) + std::abs(right));
  if (det > bound || -det > bound) return sign_of(det);

  const mpq_class ax(a.x()), ay(a.y()), bx(b.x()), by(b.y()), cx(c.x()), cy(c.y());
  const mpq_class d = (ax - cx) * (by - cy) - (ay - cy) * (bx - cx);
  return sgn(d);
}

/// Positive when d lies strictly inside the circle through a, b, c (given
/// counterclockwise), negative outside, zero when cocircular.
inline int incircle(const Vec2& a, const Vec2& b, const Vec2& c, const Vec2& d) {
  constexpr double eps = std::numeric_limits<double>::epsilon() * 0.5;
  constexpr double err_bound = (10.0 + 96.0 * eps) * eps;
  const double adx = a.x() - d.x(), ady = a.y() - d.y();
  const double bdx = b.x() - d.x(), bdy = b.y() - d.y();
  const double cdx = c.x() - d.x(), cdy = c.y() - d.y();

  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double alift = adx * adx + ady * ady;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double blift = bdx * bdx + bdy * bdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double clift = cdx * cdx + cdy * cdy;

  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) +
                     clift * (adxbdy - bdxady);
  const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                           (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                           (std::abs(adxbdy) + std::abs(bdxady)) * clift;
  const double bound = err_bound * permanent;
  if (det > bound || -det > bound) return sign_of(det);

  const mpq_class qdx(d.x()), qdy(d.y());
  const mpq_class qadx = mpq_class(a.x()) - qdx, qady = mpq_class(a.y()) - qdy;
  const mpq_class qbdx = mpq_class(b.x()) - qdx, qbdy = mpq_class(b.y()) - qdy;
  const mpq_class qcdx = mpq_class(c.x()) - qdx, qcdy = mpq_class(c.y()) - qdy;
  const mpq_class qal = qadx * qadx + qady * qady;
  const mpq_class qbl = qbdx * qbdx + qbdy * qbdy;
  const mpq_class qcl = qcdx * qcdx + qcdy * qcdy;
  const mpq_class qdet = qal * (qbdx * qcdy - qcdx * qbdy) +
                         qbl * (qcdx * qady - qadx * qcdy) +
                         qcl * (qadx * qbdy - qbdx * qady);
  return sgn(qdet);
}

}  // namespace mfeit::detail
