#include "mfeit/forward.hpp"

#include <algorithm>
#include <cmath>

#include <omp.h>

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include "fe.hpp"
#include "mfeit/errors.hpp"

namespace mfeit {

namespace {

using Triplets = std::vector<Eigen::Triplet<Complex>>;

double perimeter(const Mesh& mesh) {
  double sum = 0.0;
  for (const auto& e : mesh.boundary_edges) sum += (mesh.nodes[e[1]] - mesh.nodes[e[0]]).norm();
  return sum;
}

void check_current(const Mesh& mesh, const NeumannCurrent& g) {
  if (g.g.size() != mesh.boundary_nodes.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "current must have one value per boundary node");
  }
  double gmax = 0.0;
  for (const auto& v : g.g) gmax = std::max(gmax, std::abs(v));
  if (std::abs(boundary_integral(mesh, g.g)) > 1e-12 * gmax * perimeter(mesh)) {
    throw Error(ErrorCode::kInvalidInput, "boundary current must have zero mean");
  }
}

}  // namespace

NeumannCurrent uniform_field_current(const Mesh& mesh, const Vec2& a) {
  NeumannCurrent g;
  for (int n : mesh.boundary_nodes) {
    const Vec2& x = mesh.nodes[n];
    g.g.emplace_back(a.dot(x) / x.norm(), 0.0);
  }
  return g;
}

Complex boundary_integral(const Mesh& mesh, const std::vector<Complex>& g) {
  // Boundary node i sits at position i of g; edges join i and i + 1.
  const int nb = static_cast<int>(mesh.boundary_nodes.size());
  Complex sum = 0.0;
  for (int i = 0; i < nb; ++i) {
    const int j = (i + 1) % nb;
    const double len = (mesh.nodes[mesh.boundary_nodes[j]] - mesh.nodes[mesh.boundary_nodes[i]]).norm();
    sum += 0.5 * len * (g[i] + g[j]);
  }
  return sum;
}

Complex boundary_mean(const Mesh& mesh, const std::vector<Complex>& u) {
  std::vector<Complex> trace;
  trace.reserve(mesh.boundary_nodes.size());
  for (int n : mesh.boundary_nodes) trace.push_back(u[n]);
  return boundary_integral(mesh, trace) / perimeter(mesh);
}

std::vector<Complex> boundary_trace(const Mesh& mesh, const PotentialField& field) {
  std::vector<Complex> out;
  out.reserve(mesh.boundary_nodes.size());
  for (int n : mesh.boundary_nodes) out.push_back(field.u[n]);
  return out;
}

struct ForwardProblem::Factor {
  Eigen::SparseLU<SparseMatrixC, Eigen::COLAMDOrdering<int>> lu;
  SparseMatrixC system;
};

ForwardProblem::ForwardProblem(const Mesh& mesh, const Phantom& phantom, Frequency omega,
                               Medium medium)
    : mesh_(mesh), omega_(omega), medium_(medium), factor_(std::make_unique<Factor>()) {
  const auto& mat = phantom.materials;
  const Complex gb = gamma_background(omega, mat);
  const int nt = static_cast<int>(mesh.triangles.size());
  gamma_.assign(nt, gb);
  if (medium == Medium::kPhantom) {
    for (int t = 0; t < nt; ++t) {
      if (mesh.region[t] == Region::kInsulator) gamma_[t] = gamma_insulator(omega, mat);
      if (mesh.region[t] == Region::kDisk) gamma_[t] = gamma_conductor(omega, mat);
    }
  }

  const int nn = static_cast<int>(mesh.nodes.size());
  dof_.resize(nn);
  for (int i = 0; i < nn; ++i) dof_[i] = i;
  if (medium == Medium::kHomogeneous) {
    for (const auto& cp : mesh.crack_pairs) dof_[cp.node_plus] = cp.node_minus;
  }
  ndof_ = nn;

  Triplets trip;
  trip.reserve(9 * nt + 4 * mesh.boundary_nodes.size());
  for (int t = 0; t < nt; ++t) {
    const auto eg = detail::element_geometry(mesh, t);
    const auto& tri = mesh.triangles[t];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        trip.emplace_back(dof_[tri[a]], dof_[tri[b]],
                          gamma_[t] * eg.area * eg.grad[a].dot(eg.grad[b]));
      }
    }
  }

  // Robin-type coupling across each slit: gamma_c / (2 delta) * int [u][v].
  Triplets slit;
  if (medium == Medium::kPhantom && mesh.model == InterfaceModel::kZeroThickness) {
    const Complex gc = gamma_insulator(omega, mat);
    for (const auto& lat : mesh.lattices) {
      const double delta = phantom.insulators[lat.segment_id].half_thickness;
      const Complex kappa = gc / (2.0 * delta);
      if (kappa == Complex{0.0, 0.0}) continue;
      for (int i = lat.col_tip_p; i < lat.col_tip_q; ++i) {
        const double len = lat.s[i + 1] - lat.s[i];
        const int minus[2] = {lat.minus_face_node(i), lat.minus_face_node(i + 1)};
        const int plus[2] = {lat.plus_face_node(i), lat.plus_face_node(i + 1)};
        for (int a = 0; a < 2; ++a) {
          for (int b = 0; b < 2; ++b) {
            const Complex m = kappa * len / 6.0 * (a == b ? 2.0 : 1.0);
            slit.emplace_back(plus[a], plus[b], m);
            slit.emplace_back(plus[a], minus[b], -m);
            slit.emplace_back(minus[a], plus[b], -m);
            slit.emplace_back(minus[a], minus[b], m);
          }
        }
      }
    }
  }
  interface_.resize(ndof_, ndof_);
  interface_.setFromTriplets(slit.begin(), slit.end());
  trip.insert(trip.end(), slit.begin(), slit.end());
  stiffness_.resize(ndof_, ndof_);
  stiffness_.setFromTriplets(trip.begin(), trip.end());

  // Lagrange multiplier row enforcing a zero boundary integral of u.
  const int nb = static_cast<int>(mesh.boundary_nodes.size());
  for (int i = 0; i < nb; ++i) {
    const int a = mesh.boundary_nodes[i], b = mesh.boundary_nodes[(i + 1) % nb];
    const double half = 0.5 * (mesh.nodes[b] - mesh.nodes[a]).norm();
    for (int n : {a, b}) {
      trip.emplace_back(dof_[n], ndof_, half);
      trip.emplace_back(ndof_, dof_[n], half);
    }
  }
  // Unused unknowns (tied slit copies) get an identity row.
  for (int i = 0; i < nn; ++i) {
    if (dof_[i] != i) trip.emplace_back(i, i, 1.0);
  }
  auto& sys = factor_->system;
  sys.resize(ndof_ + 1, ndof_ + 1);
  sys.setFromTriplets(trip.begin(), trip.end());
  sys.makeCompressed();
  factor_->lu.compute(sys);
  if (factor_->lu.info() != Eigen::Success) {
    throw Error(ErrorCode::kSolveFailure, "sparse factorization failed");
  }
}

ForwardProblem::~ForwardProblem() = default;

VectorC ForwardProblem::load(const NeumannCurrent& g) const {
  check_current(mesh_, g);
  VectorC b = VectorC::Zero(ndof_ + 1);
  const int nb = static_cast<int>(mesh_.boundary_nodes.size());
  for (int i = 0; i < nb; ++i) {
    const int j = (i + 1) % nb;
    const int a = mesh_.boundary_nodes[i], c = mesh_.boundary_nodes[j];
    const double len = (mesh_.nodes[c] - mesh_.nodes[a]).norm();
    b[dof_[a]] += len / 6.0 * (2.0 * g.g[i] + g.g[j]);
    b[dof_[c]] += len / 6.0 * (g.g[i] + 2.0 * g.g[j]);
  }
  return b;
}

VectorC ForwardProblem::gather(const PotentialField& f) const {
  VectorC x(ndof_);
  for (int i = 0; i < ndof_; ++i) x[i] = f.u[i];
  return x;
}

std::vector<PotentialField> ForwardProblem::solve(const std::vector<NeumannCurrent>& gs,
                                                  bool parallel) const {
  const int m = static_cast<int>(gs.size());
  Eigen::MatrixXcd rhs(ndof_ + 1, m);
  for (int k = 0; k < m; ++k) rhs.col(k) = load(gs[k]);
  Eigen::MatrixXcd x(ndof_ + 1, m);
  if (parallel && m > 1) {
    const int nchunks = std::min(m, omp_get_max_threads());
#pragma omp parallel for schedule(static)
    for (int c = 0; c < nchunks; ++c) {
      const int b = c * m / nchunks, e = (c + 1) * m / nchunks;
      x.middleCols(b, e - b) = factor_->lu.solve(rhs.middleCols(b, e - b));
    }
  } else {
    x = factor_->lu.solve(rhs);
  }
  if (factor_->lu.info() != Eigen::Success) {
    throw Error(ErrorCode::kSolveFailure, "sparse solve failed");
  }
  std::vector<PotentialField> out(m);
  for (int k = 0; k < m; ++k) {
    const double bnorm = rhs.col(k).norm();
    const double res = (factor_->system * x.col(k) - rhs.col(k)).norm();
    if (!(res <= 1e-10 * std::max(bnorm, 1e-300))) {
      throw Error(ErrorCode::kSolveFailure,
                  "relative residual " + std::to_string(res / bnorm) + " above 1e-10");
    }
    auto& f = out[k];
    f.omega = omega_;
    f.model = mesh_.model;
    f.medium = medium_;
    f.u.resize(mesh_.nodes.size());
    for (std::size_t i = 0; i < f.u.size(); ++i) f.u[i] = x(dof_[i], k);
  }
  return out;
}

PotentialField ForwardProblem::solve(const NeumannCurrent& g) const {
  return std::move(solve(std::vector<NeumannCurrent>{g}).front());
}

Complex ForwardProblem::energy(const PotentialField& field) const {
  const VectorC u = gather(field);
  return u.dot(stiffness_ * u);
}

Complex ForwardProblem::boundary_work(const PotentialField& field,
                                      const NeumannCurrent& g) const {
  const VectorC b = load(g).head(ndof_);
  const VectorC u = gather(field);
  // Eigen's dot conjugates its first argument: sum conj(u_i) b_i.
  return u.dot(b);
}

PotentialField solve_resolved(const Mesh& mesh, const Phantom& phantom, Frequency omega,
                              const NeumannCurrent& g) {
  if (mesh.model != InterfaceModel::kResolved) {
    throw Error(ErrorCode::kInvalidInput, "resolved solve needs a resolved mesh");
  }
  return ForwardProblem(mesh, phantom, omega, Medium::kPhantom).solve(g);
}

PotentialField solve_zero_thickness(const Mesh& mesh, const Phantom& phantom, Frequency omega,
                                    const NeumannCurrent& g) {
  if (mesh.model != InterfaceModel::kZeroThickness) {
    throw Error(ErrorCode::kInvalidInput, "zero-thickness solve needs a slit mesh");
  }
  return ForwardProblem(mesh, phantom, omega, Medium::kPhantom).solve(g);
}

PotentialField homogeneous_reference(const Mesh& mesh, const MaterialSpec& materials,
                                     Frequency omega, const NeumannCurrent& g) {
  Phantom ph;
  ph.domain_radius = mesh.domain_radius;
  ph.materials = materials;
  return ForwardProblem(mesh, ph, omega, Medium::kHomogeneous).solve(g);
}

namespace {

// Average of grad(u) . nu over the triangles containing both nodes a and b.
Complex edge_normal_derivative(const Mesh& mesh, const std::vector<std::vector<int>>& node_tris,
                               const PotentialField& f, int a, int b, const Vec2& nu) {
  Complex sum = 0.0;
  int count = 0;
  for (int t : node_tris[a]) {
    const auto& tri = mesh.triangles[t];
    if (tri[0] != b && tri[1] != b && tri[2] != b) continue;
    const auto eg = detail::element_geometry(mesh, t);
    Complex d = 0.0;
    for (int k = 0; k < 3; ++k) d += f.u[tri[k]] * eg.grad[k].dot(nu);
    sum += d;
    ++count;
  }
  if (count == 0) throw Error(ErrorCode::kNumericalFailure, "lattice edge has no element");
  return sum / static_cast<double>(count);
}

}  // namespace

JumpProfile jump_profile(const Mesh& mesh, const Phantom& phantom, const PotentialField& field,
                         int segment_id, double c0_fraction) {
  const SegmentLattice* lat = nullptr;
  for (const auto& l : mesh.lattices) {
    if (l.segment_id == segment_id) lat = &l;
  }
  if (lat == nullptr || segment_id < 0 ||
      segment_id >= static_cast<int>(phantom.insulators.size())) {
    throw Error(ErrorCode::kSegmentNotFound, "no segment " + std::to_string(segment_id));
  }
  if (field.u.size() != mesh.nodes.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "field does not belong to this mesh");
  }
  const auto& seg = phantom.insulators[segment_id];
  const double len = seg.length();
  const double delta = seg.half_thickness;
  const Vec2 nu = seg.normal();
  const Complex lc = lambda_c(field.omega, phantom.materials);

  std::vector<std::vector<int>> node_tris(mesh.nodes.size());
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    for (int v : mesh.triangles[t]) node_tris[v].push_back(t);
  }

  JumpProfile jp;
  jp.segment_id = segment_id;
  const int below = lat->row_minus - 1, above = lat->row_plus + 1;
  for (int i = lat->col_tip_p; i <= lat->col_tip_q; ++i) {
    const double s = lat->s[i];
    if (s < c0_fraction * len || s > (1.0 - c0_fraction) * len) continue;
    const int minus = lat->minus_face_node(i);
    const int plus = lat->plus_face_node(i);
    const Complex dminus =
        edge_normal_derivative(mesh, node_tris, field, lat->node[i][below], minus, nu);
    const Complex dplus =
        edge_normal_derivative(mesh, node_tris, field, plus, lat->node[i][above], nu);
    jp.s.push_back(s);
    jp.jump_u.push_back(field.u[plus] - field.u[minus]);
    jp.dnu_plus.push_back(dminus);
    jp.predicted_jump.push_back(2.0 * delta / lc * dminus);
    jp.jump_dnu.push_back(dplus - dminus);
  }
  return jp;
}

double fitted_order(const std::vector<double>& h, const std::vector<double>& error) {
  if (h.size() != error.size() || h.size() < 2) {
    throw Error(ErrorCode::kInvalidInput, "order fit needs at least two matching points");
  }
  const int n = static_cast<int>(h.size());
  Eigen::MatrixXd A(n, 2);
  Eigen::VectorXd b(n);
  for (int i = 0; i < n; ++i) {
    if (!(h[i] > 0.0) || !(error[i] > 0.0)) {
      throw Error(ErrorCode::kInvalidInput, "order fit needs positive values");
    }
    A(i, 0) = std::log(h[i]);
    A(i, 1) = 1.0;
    b(i) = std::log(error[i]);
  }
  return A.colPivHouseholderQr().solve(b)(0);
}

}  // namespace mfeit
