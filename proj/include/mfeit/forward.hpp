#pragma once

#include <memory>
#include <vector>

#include <Eigen/SparseCore>

#include "mfeit/admittivity.hpp"
#include "mfeit/geometry.hpp"
#include "mfeit/mesh.hpp"

namespace mfeit {

using SparseMatrixC = Eigen::SparseMatrix<Complex>;
using VectorC = Eigen::VectorXcd;

/// Boundary current density sampled at mesh.boundary_nodes (same order).
struct NeumannCurrent {
  std::vector<Complex> g;
};

/// Which admittivity the forward problem uses.
enum class Medium {
  kPhantom,      // inclusions as represented by the mesh's interface model
  kHomogeneous,  // gamma_b everywhere; slit copies are tied to their originals
};

struct PotentialField {
  std::vector<Complex> u;  // per mesh node
  Frequency omega{};
  InterfaceModel model = InterfaceModel::kZeroThickness;
  Medium medium = Medium::kPhantom;
};

struct JumpProfile {
  int segment_id = 0;
  std::vector<double> s;
  std::vector<Complex> jump_u;
  std::vector<Complex> dnu_plus;        // outer normal derivative below the minus face
  std::vector<Complex> predicted_jump;  // (2 delta / lambda_c) dnu_plus
  std::vector<Complex> jump_dnu;        // normal derivative above the plus face minus dnu_plus
};

/// g = a . nu at the boundary nodes; the exact solution for homogeneous
/// admittivity gamma is a . x / gamma.
NeumannCurrent uniform_field_current(const Mesh& mesh, const Vec2& a);

/// Discrete integral of g over the boundary (consistent boundary mass).
Complex boundary_integral(const Mesh& mesh, const std::vector<Complex>& g);

/// Boundary-mean of a nodal field over the boundary polygon.
Complex boundary_mean(const Mesh& mesh, const std::vector<Complex>& u);

/// Factored discrete problem for one mesh, phantom, frequency and medium.
/// Several currents can be solved against one factorization.
class ForwardProblem {
 public:
  ForwardProblem(const Mesh& mesh, const Phantom& phantom, Frequency omega, Medium medium);
  ~ForwardProblem();
  ForwardProblem(const ForwardProblem&) = delete;
  ForwardProblem& operator=(const ForwardProblem&) = delete;

  PotentialField solve(const NeumannCurrent& g) const;
  /// All right-hand sides against one factorization. Serially this is a single
  /// block solve; in parallel, column chunks are solved on separate threads.
  std::vector<PotentialField> solve(const std::vector<NeumannCurrent>& gs,
                                    bool parallel = false) const;

  /// Admittivity of each triangle.
  const std::vector<Complex>& coefficients() const { return gamma_; }
  /// Slit coupling part of the stiffness matrix (empty without slits).
  const SparseMatrixC& interface_matrix() const { return interface_; }
  /// conj(u)^T K u including the interface coupling term.
  Complex energy(const PotentialField& field) const;
  /// conj(u)^T M_b g.
  Complex boundary_work(const PotentialField& field, const NeumannCurrent& g) const;

 private:
  struct Factor;

  VectorC load(const NeumannCurrent& g) const;
  VectorC gather(const PotentialField& f) const;

  const Mesh& mesh_;
  Frequency omega_;
  Medium medium_;
  std::vector<Complex> gamma_;
  std::vector<int> dof_;  // node -> unknown
  int ndof_ = 0;
  SparseMatrixC stiffness_;
  SparseMatrixC interface_;
  std::unique_ptr<Factor> factor_;
};

PotentialField solve_resolved(const Mesh& mesh, const Phantom& phantom, Frequency omega,
                              const NeumannCurrent& g);
PotentialField solve_zero_thickness(const Mesh& mesh, const Phantom& phantom, Frequency omega,
                                    const NeumannCurrent& g);
PotentialField homogeneous_reference(const Mesh& mesh, const MaterialSpec& materials,
                                     Frequency omega, const NeumannCurrent& g);

/// Jump of the potential and of its normal derivative across segment k,
/// sampled at lattice columns at least c0_fraction * L away from both tips.
JumpProfile jump_profile(const Mesh& mesh, const Phantom& phantom, const PotentialField& field,
                         int segment_id, double c0_fraction = 0.1);

/// Least-squares slope of log(error) against log(h). Throws InvalidInput for
/// fewer than two points or non-positive entries.
double fitted_order(const std::vector<double>& h, const std::vector<double>& error);

/// Nodal values on mesh.boundary_nodes.
std::vector<Complex> boundary_trace(const Mesh& mesh, const PotentialField& field);

}  // namespace mfeit
