#include "mfeit/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Eigenvalues>

#include "mfeit/errors.hpp"
#include "mfeit/protocol.hpp"

namespace mfeit {

namespace {

constexpr double kPi = std::numbers::pi;

Complex to_c(const Vec2& v) { return {v.x(), v.y()}; }

// Gauss-Legendre nodes and weights on [0, 1].
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[i] = 0.5 * (1.0 - z);
    w[i] = 1.0 / ((1.0 - z * z) * dp * dp);
  }
}

}  // namespace

SignConvention parse_sign(const std::string& s) {
  if (s == "minus") return SignConvention::kMinus;
  if (s == "plus") return SignConvention::kPlus;
  throw Error(ErrorCode::kInvalidInput, "sign flag must be plus or minus, got " + s);
}

const char* to_string(SignConvention s) { return s == SignConvention::kMinus ? "minus" : "plus"; }

BoundaryCurve BoundaryCurve::circle(const Vec2& center, double radius, int n) {
  return ellipse(center, radius, radius, n);
}

BoundaryCurve BoundaryCurve::ellipse(const Vec2& center, double a, double b, int n) {
  if (n < 3 || !(a > 0.0) || !(b > 0.0)) {
    throw Error(ErrorCode::kInvalidInput, "curve needs positive axes and >= 3 samples");
  }
  BoundaryCurve c;
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * kPi * i / n;
    const double speed = std::hypot(a * std::sin(t), b * std::cos(t));
    c.points.push_back(center + Vec2(a * std::cos(t), b * std::sin(t)));
    c.normals.push_back(Vec2(b * std::cos(t), a * std::sin(t)) / speed);
    c.weights.push_back(2.0 * kPi / n * speed);
    c.curvature.push_back(a * b / (speed * speed * speed));
  }
  return c;
}

std::vector<Complex> boundary_operator(const std::vector<Complex>& trace, SignConvention sign) {
  if (trace.empty()) return {};
  Complex mean = 0.0;
  for (const auto& v : trace) mean += v;
  mean /= static_cast<double>(trace.size());
  const double s = sign == SignConvention::kMinus ? -0.5 : 0.5;
  std::vector<Complex> out(trace.size());
  for (std::size_t i = 0; i < trace.size(); ++i) out[i] = s * trace[i] + 0.5 * mean;
  return out;
}

std::vector<Complex> boundary_operator_quadrature(const BoundaryCurve& curve,
                                                  const std::vector<Complex>& trace,
                                                  SignConvention sign, bool parallel) {
  const int n = static_cast<int>(curve.points.size());
  if (static_cast<int>(trace.size()) != n) {
    throw Error(ErrorCode::kDimensionMismatch, "trace and curve sizes differ");
  }
  const double s = sign == SignConvention::kMinus ? -0.5 : 0.5;
  std::vector<Complex> out(n);
  auto row = [&](int i) {
    const Vec2& x = curve.points[i];
    Complex acc = curve.weights[i] * curve.curvature[i] / (4.0 * kPi) * trace[i];
    for (int j = 0; j < n; ++j) {
      if (j == i) continue;
      const Vec2 d = curve.points[j] - x;
      acc += curve.weights[j] * d.dot(curve.normals[j]) / (2.0 * kPi * d.squaredNorm()) * trace[j];
    }
    out[i] = s * trace[i] + acc;
  };
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) row(i);
  } else {
    for (int i = 0; i < n; ++i) row(i);
  }
  return out;
}

PolarizationTensor polarization_disk(Complex lambda_d, double area) {
  if (lambda_d == Complex(0.0)) throw Error(ErrorCode::kDegenerateContrast, "lambda_d = 0");
  return (area / lambda_d) * PolarizationTensor::Identity();
}

PolarizationTensor polarization_quadrature(Complex lambda_d, const BoundaryCurve& curve) {
  const int n = static_cast<int>(curve.points.size());
  Eigen::MatrixXcd A = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    const Vec2& x = curve.points[i];
    for (int j = 0; j < n; ++j) {
      double k;
      if (i == j) {
        k = curve.curvature[i] / (4.0 * kPi);
      } else {
        const Vec2 d = x - curve.points[j];
        k = d.dot(curve.normals[i]) / (2.0 * kPi * d.squaredNorm());
      }
      A(i, j) = -curve.weights[j] * k;
    }
    A(i, i) += lambda_d;
  }
  Eigen::BDCSVD<Eigen::MatrixXcd> svd(A);
  const auto& sv = svd.singularValues();
  if (sv(n - 1) < 1e-12 * sv(0)) {
    throw Error(ErrorCode::kIllConditioned, "lambda_d is too close to the spectrum of K*");
  }
  Eigen::MatrixXcd rhs(n, 2), y(n, 2);
  for (int i = 0; i < n; ++i) {
    rhs(i, 0) = curve.normals[i].x();
    rhs(i, 1) = curve.normals[i].y();
    y(i, 0) = curve.weights[i] * curve.points[i].x();
    y(i, 1) = curve.weights[i] * curve.points[i].y();
  }
  const Eigen::MatrixXcd psi = A.partialPivLu().solve(rhs);
  return psi.transpose() * y;
}

ExpansionCoefficients expansion_coefficients(const Phantom& phantom, Frequency omega,
                                             const Vec2& a) {
  ExpansionCoefficients c;
  c.a = a;
  if (!phantom.insulators.empty()) {
    const Complex lc = lambda_c(omega, phantom.materials);
    if (lc == Complex(0.0)) throw Error(ErrorCode::kDegenerateContrast, "lambda_c = 0");
    const Complex t = lc - 1.0;
    const Complex nrm = 1.0 - 1.0 / lc;
    for (const auto& seg : phantom.insulators) {
      const double at = a.dot(seg.tangent());
      const double an = a.dot(seg.normal());
      const double f = seg.half_thickness / kPi;
      c.a_tau.push_back(at);
      c.a_nu.push_back(an);
      c.c_re.push_back(f * Complex(t.real() * at, nrm.real() * an));
      c.c_im.push_back(f * Complex(t.imag() * at, nrm.imag() * an));
    }
  }
  if (!phantom.disks.empty()) {
    const Complex ld = lambda_d(omega, phantom.materials);
    if (ld == Complex(0.0)) throw Error(ErrorCode::kDegenerateContrast, "lambda_d = 0");
    for (const auto& d : phantom.disks) {
      const Complex f = d.area() / (2.0 * kPi * ld);
      c.d_re.push_back(-f.real() * to_c(a));
      c.d_im.push_back(-f.imag() * to_c(a));
    }
  }
  return c;
}

std::vector<Complex> high_freq_prediction(const Phantom& phantom, Frequency omega, const Vec2& a,
                                          const std::vector<Vec2>& points, bool parallel) {
  const auto c = expansion_coefficients(phantom, omega, a);
  for (const auto& x : points) {
    for (const auto& seg : phantom.insulators) {
      if ((x - seg.p).norm() < 1e-9 || (x - seg.q).norm() < 1e-9) {
        throw Error(ErrorCode::kPoleEvaluation, "evaluation point at a segment endpoint");
      }
    }
    for (const auto& d : phantom.disks) {
      if ((x - d.center).norm() < 1e-9) {
        throw Error(ErrorCode::kPoleEvaluation, "evaluation point at a disk centre");
      }
    }
  }
  const int n = static_cast<int>(points.size());
  std::vector<Complex> out(n);
  auto eval = [&](int i) {
    const Complex x = to_c(points[i]);
    Complex g_re = 0.0, g_im = 0.0;
    for (std::size_t k = 0; k < phantom.insulators.size(); ++k) {
      const auto& seg = phantom.insulators[k];
      const Complex l = std::log((x - to_c(seg.q)) / (x - to_c(seg.p)));
      g_re += c.c_re[k] * l;
      g_im += c.c_im[k] * l;
    }
    for (std::size_t k = 0; k < phantom.disks.size(); ++k) {
      const Complex r = 1.0 / (x - to_c(phantom.disks[k].center));
      g_re += c.d_re[k] * r;
      g_im += c.d_im[k] * r;
    }
    out[i] = Complex(g_re.real(), g_im.real());
  };
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) eval(i);
  } else {
    for (int i = 0; i < n; ++i) eval(i);
  }
  return out;
}

std::vector<Complex> low_freq_prediction(const Phantom& phantom, Frequency omega, const Vec2& a,
                                         const std::vector<SegmentJump>& jumps,
                                         const std::vector<Vec2>& points) {
  std::vector<double> gx, gw;
  gauss_legendre(8, gx, gw);
  std::vector<Complex> out(points.size(), 0.0);
  for (const auto& jd : jumps) {
    if (jd.segment_id < 0 || jd.segment_id >= static_cast<int>(phantom.insulators.size())) {
      throw Error(ErrorCode::kBadIndex, "jump data for unknown segment");
    }
    if (jd.s.size() != jd.jump_u.size()) {
      throw Error(ErrorCode::kDimensionMismatch, "jump samples and positions differ in length");
    }
    const auto& seg = phantom.insulators[jd.segment_id];
    const Vec2 tau = seg.tangent();
    const Vec2 nu = seg.normal();
    for (std::size_t i = 0; i < points.size(); ++i) {
      Complex acc = 0.0;
      for (std::size_t m = 0; m + 1 < jd.s.size(); ++m) {
        const double h = jd.s[m + 1] - jd.s[m];
        if (!(h > 0.0)) throw Error(ErrorCode::kInvalidInput, "jump positions must increase");
        for (std::size_t q = 0; q < gx.size(); ++q) {
          const Vec2 y = seg.p + (jd.s[m] + gx[q] * h) * tau;
          const Vec2 d = points[i] - y;
          const double kernel = -d.dot(nu) / (2.0 * kPi * d.squaredNorm());
          const Complex j = (1.0 - gx[q]) * jd.jump_u[m] + gx[q] * jd.jump_u[m + 1];
          acc += gw[q] * h * kernel * j;
        }
      }
      out[i] += acc;
    }
  }
  if (!phantom.disks.empty()) {
    const Complex ld = lambda_d(omega, phantom.materials);
    for (const auto& disk : phantom.disks) {
      const auto M = polarization_disk(ld, disk.area());
      for (std::size_t i = 0; i < points.size(); ++i) {
        const Vec2 d = points[i] - disk.center;
        const Eigen::Vector2cd grad = d.cast<Complex>() / (2.0 * kPi * d.squaredNorm());
        out[i] -= grad.dot(M * a.cast<Complex>());
      }
    }
  }
  return out;
}

MeromorphicModel meromorphic_model(const Phantom& phantom, const ExpansionCoefficients& coeffs,
                                   CoefficientPart part) {
  auto pick = [&](const std::vector<Complex>& re, const std::vector<Complex>& im, std::size_t k) {
    switch (part) {
      case CoefficientPart::kReal: return re[k];
      case CoefficientPart::kImag: return im[k];
      default: return re[k] + Complex(0.0, 1.0) * im[k];
    }
  };
  MeromorphicModel m;
  for (std::size_t k = 0; k < phantom.insulators.size(); ++k) {
    const Complex c = pick(coeffs.c_re, coeffs.c_im, k);
    const int ip = static_cast<int>(m.simple_poles.size());
    m.simple_poles.push_back({to_c(phantom.insulators[k].p), -c});
    m.simple_poles.push_back({to_c(phantom.insulators[k].q), c});
    m.segments.push_back({ip, ip + 1});
  }
  for (std::size_t k = 0; k < phantom.disks.size(); ++k) {
    m.double_poles.push_back({to_c(phantom.disks[k].center), pick(coeffs.d_re, coeffs.d_im, k)});
  }
  return m;
}

Complex meromorphic_derivative(const MeromorphicModel& model, Complex x) {
  Complex f = 0.0;
  for (const auto& p : model.simple_poles) {
    if (std::abs(x - p.location) < 1e-9) {
      throw Error(ErrorCode::kPoleEvaluation, "evaluation within 1e-9 of a simple pole");
    }
    f += p.residue / (x - p.location);
  }
  for (const auto& p : model.double_poles) {
    if (std::abs(x - p.location) < 1e-9) {
      throw Error(ErrorCode::kPoleEvaluation, "evaluation within 1e-9 of a double pole");
    }
    const Complex r = 1.0 / (x - p.location);
    f -= p.strength * r * r;
  }
  return f;
}

namespace {

// Rational fit with fixed pole positions (in contour units) and the
// coefficients from linear least squares.
struct RationalFit {
  int n_simple = 0;
  std::vector<Complex> poles;  // simple poles first, then double poles
  Eigen::VectorXcd coef;
  double residual = 0.0;
};

double fit_coefficients(RationalFit& fit, const std::vector<Complex>& zeta,
                        const Eigen::VectorXcd& f, Eigen::VectorXcd* res = nullptr) {
  const int n = static_cast<int>(zeta.size());
  const int m = static_cast<int>(fit.poles.size());
  Eigen::MatrixXcd A(n, m);
  for (int k = 0; k < n; ++k) {
    for (int j = 0; j < m; ++j) {
      const Complex r = 1.0 / (zeta[k] - fit.poles[j]);
      A(k, j) = j < fit.n_simple ? r : -r * r;
    }
  }
  fit.coef = A.colPivHouseholderQr().solve(f);
  const Eigen::VectorXcd r = A * fit.coef - f;
  if (res) *res = r;
  fit.residual = r.norm() / f.norm();
  return fit.residual;
}

// Levenberg-Marquardt on the pole positions of a variable-projection fit.
void refine(RationalFit& fit, const std::vector<Complex>& zeta, const Eigen::VectorXcd& f) {
  const int m = static_cast<int>(fit.poles.size());
  const int n = static_cast<int>(zeta.size());
  auto stacked = [&](RationalFit& trial) {
    Eigen::VectorXcd r;
    fit_coefficients(trial, zeta, f, &r);
    Eigen::VectorXd out(2 * n);
    out << r.real(), r.imag();
    return out;
  };
  Eigen::VectorXd r = stacked(fit);
  double cost = r.squaredNorm();
  double mu = 1e-3;
  for (int it = 0; it < 200 && cost > 0.0; ++it) {
    Eigen::MatrixXd J(2 * n, 2 * m);
    const double h = 1e-7;
    for (int j = 0; j < 2 * m; ++j) {
      RationalFit plus = fit, minus = fit;
      const Complex step = j % 2 == 0 ? Complex(h, 0.0) : Complex(0.0, h);
      plus.poles[j / 2] += step;
      minus.poles[j / 2] -= step;
      J.col(j) = (stacked(plus) - stacked(minus)) / (2.0 * h);
    }
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    const Eigen::VectorXd g = J.transpose() * r;
    bool improved = false;
    for (int tries = 0; tries < 20 && !improved; ++tries) {
      Eigen::MatrixXd S = JtJ;
      S.diagonal() += mu * JtJ.diagonal().cwiseMax(1e-300);
      const Eigen::VectorXd delta = S.ldlt().solve(-g);
      RationalFit trial = fit;
      for (int j = 0; j < m; ++j) trial.poles[j] += Complex(delta(2 * j), delta(2 * j + 1));
      const Eigen::VectorXd rt = stacked(trial);
      const double ct = rt.squaredNorm();
      if (std::isfinite(ct) && ct < cost) {
        const double gain = (cost - ct) / cost;
        fit = trial;
        r = rt;
        cost = ct;
        mu = std::max(mu / 3.0, 1e-12);
        improved = true;
        if (gain < 1e-14 || delta.norm() < 1e-15) it = 1 << 30;
      } else {
        mu *= 4.0;
      }
    }
    if (!improved) break;
  }
  fit_coefficients(fit, zeta, f);
}

}  // namespace

PoleRecovery recover_poles(Complex center, double radius, const std::vector<Complex>& samples,
                           const PoleRecoveryConfig& config) {
  const int n = static_cast<int>(samples.size());
  if (n < 64) throw Error(ErrorCode::kInvalidInput, "pole recovery needs >= 64 samples");
  if (!(radius > 0.0)) throw Error(ErrorCode::kInvalidInput, "contour radius must be positive");
  std::vector<Complex> zeta(n);
  Eigen::VectorXcd f(n);
  for (int k = 0; k < n; ++k) {
    zeta[k] = std::polar(1.0, 2.0 * kPi * k / n);
    // f in contour units: residues scale by 1/radius, strengths by 1/radius^2.
    f(k) = samples[k] * radius;
  }
  PoleRecovery out;
  if (f.norm() == 0.0) return out;

  const int max_order = config.max_order;
  std::vector<Complex> mu(2 * max_order + 1, 0.0);
  for (int m = 0; m <= 2 * max_order; ++m) {
    for (int k = 0; k < n; ++k) mu[m] += std::pow(zeta[k], m + 1) * f(k);
    mu[m] /= static_cast<double>(n);
  }

  for (int order = 1; order <= max_order; ++order) {
    Eigen::MatrixXcd H0(order, order), H1(order, order);
    for (int i = 0; i < order; ++i) {
      for (int j = 0; j < order; ++j) {
        H0(i, j) = mu[i + j];
        H1(i, j) = mu[i + j + 1];
      }
    }
    Eigen::FullPivLU<Eigen::MatrixXcd> lu(H0);
    if (!lu.isInvertible()) continue;
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(lu.solve(H1), false);
    if (es.info() != Eigen::Success) continue;
    std::vector<Complex> eig(es.eigenvalues().data(), es.eigenvalues().data() + order);

    for (int nd = std::min(config.max_double, order / 2); nd >= 0; --nd) {
      // Merge the closest eigenvalue pairs into double poles.
      std::vector<Complex> rest = eig, doubles;
      for (int d = 0; d < nd; ++d) {
        std::size_t bi = 0, bj = 1;
        double best = INFINITY;
        for (std::size_t i = 0; i < rest.size(); ++i) {
          for (std::size_t j = i + 1; j < rest.size(); ++j) {
            if (std::abs(rest[i] - rest[j]) < best) {
              best = std::abs(rest[i] - rest[j]);
              bi = i;
              bj = j;
            }
          }
        }
        doubles.push_back(0.5 * (rest[bi] + rest[bj]));
        rest.erase(rest.begin() + static_cast<long>(bj));
        rest.erase(rest.begin() + static_cast<long>(bi));
      }
      RationalFit fit;
      fit.n_simple = static_cast<int>(rest.size());
      fit.poles = rest;
      fit.poles.insert(fit.poles.end(), doubles.begin(), doubles.end());
      refine(fit, zeta, f);
      if (!(fit.residual <= config.fit_tol)) continue;

      for (std::size_t i = 0; i < fit.poles.size(); ++i) {
        for (std::size_t j = i + 1; j < fit.poles.size(); ++j) {
          if (std::abs(fit.poles[i] - fit.poles[j]) < config.resolution) {
            throw Error(ErrorCode::kPoleCollision, "recovered poles closer than the resolution");
          }
        }
      }
      MeromorphicModel& model = out.model;
      for (int j = 0; j < static_cast<int>(fit.poles.size()); ++j) {
        const Complex loc = center + radius * fit.poles[j];
        if (j < fit.n_simple) {
          model.simple_poles.push_back({loc, fit.coef(j) / radius});
        } else {
          model.double_poles.push_back({loc, fit.coef(j) * radius});
        }
      }
      // Pair simple poles whose residues cancel, best matches first.
      const int ns = fit.n_simple;
      std::vector<bool> used(ns, false);
      for (;;) {
        int bi = -1, bj = -1;
        double best = 0.5;
        for (int i = 0; i < ns; ++i) {
          for (int j = i + 1; j < ns; ++j) {
            if (used[i] || used[j]) continue;
            const Complex ri = model.simple_poles[i].residue;
            const Complex rj = model.simple_poles[j].residue;
            const double mis = std::abs(ri + rj) / std::max(std::abs(ri), std::abs(rj));
            if (mis < best) {
              best = mis;
              bi = i;
              bj = j;
            }
          }
        }
        if (bi < 0) break;
        used[bi] = used[bj] = true;
        // Q carries the residue with non-negative real part.
        if (model.simple_poles[bi].residue.real() >= 0.0) std::swap(bi, bj);
        model.segments.push_back({bi, bj});
      }
      out.fit_residual = fit.residual;
      return out;
    }
  }
  throw Error(ErrorCode::kModelOrderFailure, "no pole model within tolerance up to max order");
}

std::vector<Complex> electrode_perturbation(const BoundaryDataset& data,
                                            const BoundaryDataset& reference, const Vec2& a,
                                            double domain_radius) {
  const int ne = data.n_electrodes;
  if (reference.n_electrodes != ne || data.V.rows() != ne || reference.V.rows() != ne) {
    throw Error(ErrorCode::kDimensionMismatch, "dataset and reference sizes differ");
  }
  // Injection k drives unit current into electrode k and out of k+1, so the
  // weights c_e = c_{e-1} + I_e give net current I_e at electrode e.
  std::vector<double> c(ne);
  double acc = 0.0;
  for (int e = 0; e < ne; ++e) {
    const double th = 2.0 * kPi * e / ne;
    acc += (a.x() * std::cos(th) + a.y() * std::sin(th)) * 2.0 * kPi * domain_radius / ne;
    c[e] = acc;
  }
  auto voltages = [&](const Eigen::MatrixXcd& V) {
    std::vector<Complex> u(ne, 0.0);
    for (int k = 0; k < ne; ++k) {
      // V(k, j) = U_k(j) - U_k(j+1).
      Complex uk = 0.0;
      std::vector<Complex> col(ne);
      for (int j = 0; j < ne; ++j) {
        col[j] = uk;
        uk -= V(k, j);
      }
      for (int j = 0; j < ne; ++j) u[j] += c[k] * col[j];
    }
    Complex mean = 0.0;
    for (const auto& v : u) mean += v;
    mean /= static_cast<double>(ne);
    for (auto& v : u) v -= mean;
    return u;
  };
  const auto u = voltages(data.V);
  const auto u0 = voltages(reference.V);
  std::vector<Complex> out(ne);
  for (int e = 0; e < ne; ++e) out[e] = u[e] - u0[e];
  return out;
}

std::vector<Complex> identification_samples(const std::vector<Complex>& phi, double R,
                                            double contour_radius, int n, double electrode_width) {
  const int ne = static_cast<int>(phi.size());
  if (ne < 4) throw Error(ErrorCode::kInvalidInput, "need at least 4 boundary samples");
  const int order = (ne - 1) / 2;
  std::vector<Complex> c(order + 1, 0.0);
  for (int m = 1; m <= order; ++m) {
    Complex hat = 0.0;
    for (int e = 0; e < ne; ++e) hat += phi[e] * std::polar(1.0, 2.0 * kPi * m * e / ne);
    hat /= static_cast<double>(ne);
    double avg = 1.0;
    if (electrode_width > 0.0) {
      const double h = 0.5 * m * electrode_width;
      avg = std::sin(h) / h;
    }
    c[m] = 2.0 * std::pow(R, m) * hat / avg;
  }
  std::vector<Complex> out(n, 0.0);
  for (int k = 0; k < n; ++k) {
    const Complex x = std::polar(contour_radius, 2.0 * kPi * k / n);
    for (int m = 1; m <= order; ++m) out[k] -= static_cast<double>(m) * c[m] * std::pow(x, -m - 1);
  }
  return out;
}

}  // namespace mfeit
