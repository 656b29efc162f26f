#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "mfeit/admittivity.hpp"
#include "mfeit/geometry.hpp"

namespace mfeit {

struct BoundaryDataset;

/// Which half of the jump relation is applied: (-1/2 I + K) or (+1/2 I + K).
enum class SignConvention { kMinus, kPlus };

SignConvention parse_sign(const std::string& s);
const char* to_string(SignConvention s);

/// Closed smooth curve sampled for the trapezoid rule.
struct BoundaryCurve {
  std::vector<Vec2> points;
  std::vector<Vec2> normals;      // outward unit normals
  std::vector<double> weights;    // arclength weights
  std::vector<double> curvature;  // signed, positive for convex

  static BoundaryCurve circle(const Vec2& center, double radius, int n);
  static BoundaryCurve ellipse(const Vec2& center, double a, double b, int n);
};

/// (-+1/2 I + K) on the circle, for samples at equally spaced angles. On a
/// circle K reduces to half the boundary mean.
std::vector<Complex> boundary_operator(const std::vector<Complex>& trace,
                                       SignConvention sign = SignConvention::kMinus);

/// Same operator by Nystrom quadrature of the double-layer kernel on any
/// smooth curve. Target points are evaluated in parallel when requested.
std::vector<Complex> boundary_operator_quadrature(const BoundaryCurve& curve,
                                                  const std::vector<Complex>& trace,
                                                  SignConvention sign = SignConvention::kMinus,
                                                  bool parallel = true);

using PolarizationTensor = Eigen::Matrix2cd;

/// (area / lambda_d) I.
PolarizationTensor polarization_disk(Complex lambda_d, double area);

/// Nystrom solution of (lambda I - K*) psi_i = nu_i on the curve and
/// M_ij = int y_j psi_i. Throws IllConditioned near the spectrum.
PolarizationTensor polarization_quadrature(Complex lambda_d, const BoundaryCurve& curve);

struct ExpansionCoefficients {
  std::vector<Complex> c_re, c_im;  // per segment
  std::vector<Complex> d_re, d_im;  // per disk (complex form of a vector)
  Vec2 a{1.0, 0.0};
  std::vector<double> a_nu, a_tau;
};

/// Segment and disk coefficients of the identification function for the
/// uniform current direction a. Throws DegenerateContrast when lambda_c = 0.
ExpansionCoefficients expansion_coefficients(const Phantom& phantom, Frequency omega,
                                             const Vec2& a);

/// Phi(x) = Re G_re(x) + i Re G_im(x) at the given points.
std::vector<Complex> high_freq_prediction(const Phantom& phantom, Frequency omega,
                                          const Vec2& a, const std::vector<Vec2>& points,
                                          bool parallel = true);

struct SegmentJump {
  int segment_id = 0;
  std::vector<double> s;        // increasing, within [0, L]
  std::vector<Complex> jump_u;  // [u] at s
};

/// Disk polarization term plus the double-layer integral of the supplied jump
/// along each segment (piecewise linear in s, zero outside the samples'
/// span), by composite Gauss quadrature.
std::vector<Complex> low_freq_prediction(const Phantom& phantom, Frequency omega, const Vec2& a,
                                         const std::vector<SegmentJump>& jumps,
                                         const std::vector<Vec2>& points);

struct SimplePole {
  Complex location;
  Complex residue;
};

struct DoublePole {
  Complex location;
  Complex strength;
};

/// d G / dx = sum residue / (x - p) - sum strength / (x - z)^2.
struct MeromorphicModel {
  std::vector<SimplePole> simple_poles;
  std::vector<DoublePole> double_poles;
  /// Indices (P, Q) into simple_poles, residue at Q = C = -residue at P.
  std::vector<std::array<int, 2>> segments;
};

enum class CoefficientPart { kReal, kImag, kCombined };

/// Model whose derivative is the identification function of the phantom:
/// residues C at Q and -C at P, strengths D at disk centres. kCombined uses
/// C_re + i C_im (and likewise for D).
MeromorphicModel meromorphic_model(const Phantom& phantom, const ExpansionCoefficients& coeffs,
                                   CoefficientPart part = CoefficientPart::kReal);

/// Throws PoleEvaluation within 1e-9 of a pole.
Complex meromorphic_derivative(const MeromorphicModel& model, Complex x);

struct PoleRecoveryConfig {
  int max_order = 10;       // simple poles plus twice the double poles
  int max_double = 4;
  double fit_tol = 1e-8;    // relative L2 misfit accepted
  double resolution = 1e-6; // minimum pole separation relative to contour radius
};

struct PoleRecovery {
  MeromorphicModel model;
  double fit_residual = 0.0;
};

/// Poles and residues of f from samples f(c + r e^{i theta_k}) at
/// theta_k = 2 pi k / N, via contour moments, a Hankel pencil and a
/// variable-projection least squares refinement.
PoleRecovery recover_poles(Complex center, double radius, const std::vector<Complex>& samples,
                           const PoleRecoveryConfig& config = {});

/// Mean-zero electrode voltages of the perturbation (data minus reference)
/// for the current pattern a . nu synthesized from the adjacent injections.
std::vector<Complex> electrode_perturbation(const BoundaryDataset& data,
                                            const BoundaryDataset& reference, const Vec2& a,
                                            double domain_radius);

/// dG/dx on the circle of radius contour_radius (n samples) from Phi sampled
/// at equally spaced angles on the boundary circle of radius R. Laurent
/// coefficients are divided by the electrode averaging factor when
/// electrode_width > 0.
std::vector<Complex> identification_samples(const std::vector<Complex>& phi, double R,
                                            double contour_radius, int n,
                                            double electrode_width = 0.0);

}  // namespace mfeit
