#include "mfeit/protocol.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <sstream>

#include "fe.hpp"
#include "mfeit/errors.hpp"

namespace mfeit {

namespace {

constexpr double kPi = std::numbers::pi;

// Signed angular difference wrapped to (-pi, pi].
double angle_diff(double a, double b) {
  double d = std::fmod(a - b, 2.0 * kPi);
  if (d > kPi) d -= 2.0 * kPi;
  if (d <= -kPi) d += 2.0 * kPi;
  return d;
}

}  // namespace

ElectrodeLayout ElectrodeLayout::equally_spaced(int n_electrodes, double coverage) {
  if (n_electrodes < 2 || !(coverage > 0.0) || !(coverage < 1.0)) {
    throw Error(ErrorCode::kInvalidInput, "need >= 2 electrodes and coverage in (0, 1)");
  }
  ElectrodeLayout l;
  l.n_electrodes = n_electrodes;
  for (int e = 0; e < n_electrodes; ++e) l.centers.push_back(2.0 * kPi * e / n_electrodes);
  l.width = coverage * 2.0 * kPi / n_electrodes;
  return l;
}

std::vector<Complex> electrode_density(const Mesh& mesh, const ElectrodeLayout& layout, int e) {
  if (e < 1 || e > layout.n_electrodes) {
    throw Error(ErrorCode::kBadIndex, "electrode index out of range");
  }
  const int nb = static_cast<int>(mesh.boundary_nodes.size());
  const double spacing = 2.0 * kPi / nb;
  const double centre = layout.centers[e - 1];
  std::vector<Complex> w(nb);
  for (int i = 0; i < nb; ++i) {
    const Vec2& x = mesh.nodes[mesh.boundary_nodes[i]];
    const double d = std::abs(angle_diff(std::atan2(x.y(), x.x()), centre));
    // 1 inside the arc, 1/2 on a node at the arc edge, 0 outside.
    w[i] = std::clamp((0.5 * layout.width - d) / spacing + 0.5, 0.0, 1.0);
  }
  const Complex total = boundary_integral(mesh, w);
  if (std::abs(total) == 0.0) throw Error(ErrorCode::kInvalidInput, "electrode covers no node");
  for (auto& v : w) v /= total;
  return w;
}

NeumannCurrent make_injection(const Mesh& mesh, const ElectrodeLayout& layout, int k) {
  if (k < 1 || k > layout.n_electrodes) {
    throw Error(ErrorCode::kBadIndex, "injection index out of range");
  }
  const int k2 = k % layout.n_electrodes + 1;
  const auto in = electrode_density(mesh, layout, k);
  const auto out = electrode_density(mesh, layout, k2);
  NeumannCurrent g;
  g.g.resize(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) g.g[i] = in[i] - out[i];
  return g;
}

Eigen::MatrixXcd energy_form(const ForwardProblem& problem, const Mesh& mesh,
                             const std::vector<PotentialField>& fields, bool parallel) {
  const int m = static_cast<int>(fields.size());
  const int nt = static_cast<int>(mesh.triangles.size());
  const auto& gamma = problem.coefficients();

  // Elements are summed in fixed chunks and the chunk sums are added in
  // order, so the serial and parallel paths agree bit for bit.
  constexpr int kChunk = 256;
  const int nchunks = (nt + kChunk - 1) / kChunk;
  std::vector<Eigen::MatrixXcd> partial(nchunks);
  auto chunk = [&](int c) {
    Eigen::MatrixXcd acc = Eigen::MatrixXcd::Zero(m, m);
    Eigen::Matrix<Complex, 2, Eigen::Dynamic> grad(2, m);
    for (int t = c * kChunk; t < std::min(nt, (c + 1) * kChunk); ++t) {
      const auto eg = detail::element_geometry(mesh, t);
      const auto& tri = mesh.triangles[t];
      for (int k = 0; k < m; ++k) {
        Eigen::Vector2cd gk = Eigen::Vector2cd::Zero();
        for (int a = 0; a < 3; ++a) gk += fields[k].u[tri[a]] * eg.grad[a].cast<Complex>();
        grad.col(k) = gk;
      }
      acc.noalias() += (gamma[t] * eg.area) * (grad.transpose() * grad);
    }
    partial[c] = std::move(acc);
  };
  if (parallel) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < nchunks; ++c) chunk(c);
  } else {
    for (int c = 0; c < nchunks; ++c) chunk(c);
  }
  Eigen::MatrixXcd V = Eigen::MatrixXcd::Zero(m, m);
  for (const auto& p : partial) V += p;

  const auto& slit = problem.interface_matrix();
  if (slit.nonZeros() > 0) {
    Eigen::MatrixXcd U(slit.rows(), m);
    for (int k = 0; k < m; ++k) {
      for (int i = 0; i < slit.rows(); ++i) U(i, k) = fields[k].u[i];
    }
    V += U.transpose() * (slit * U);
  }
  return V;
}

std::vector<BoundaryDataset> simulate_sweep(const Phantom& phantom, const Mesh& mesh,
                                            const ElectrodeLayout& layout,
                                            const std::vector<Frequency>& frequencies,
                                            const SweepOptions& options) {
  std::vector<NeumannCurrent> currents;
  for (int k = 1; k <= layout.n_electrodes; ++k) {
    currents.push_back(make_injection(mesh, layout, k));
  }
  std::vector<BoundaryDataset> out;
  for (const auto& f : frequencies) {
    ForwardProblem problem(mesh, phantom, f, options.medium);
    const auto fields = problem.solve(currents, options.parallel);
    BoundaryDataset ds;
    ds.omega = f;
    ds.n_electrodes = layout.n_electrodes;
    ds.V = energy_form(problem, mesh, fields, options.parallel);
    ds.mask = Eigen::MatrixXi::Zero(layout.n_electrodes, layout.n_electrodes);
    out.push_back(std::move(ds));
  }
  return out;
}

BoundaryDataset mask_adjacent(const BoundaryDataset& dataset) {
  BoundaryDataset out = dataset;
  const int n = dataset.n_electrodes;
  for (int k = 0; k < n; ++k) {
    for (int d : {-1, 0, 1}) out.mask(k, (k + d + n) % n) = 1;
  }
  return out;
}

BoundaryDataset add_noise(const BoundaryDataset& dataset, double snr_db, std::uint64_t seed) {
  if (std::isinf(snr_db)) return dataset;
  if (!(snr_db > 0.0)) throw Error(ErrorCode::kInvalidInput, "snr_db must be positive");
  BoundaryDataset out = dataset;
  const double power = dataset.V.squaredNorm() / static_cast<double>(dataset.V.size());
  const double sigma = std::sqrt(power / std::pow(10.0, snr_db / 10.0) / 2.0);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, sigma);
  for (int k = 0; k < out.V.rows(); ++k) {
    for (int j = 0; j < out.V.cols(); ++j) {
      const double re = normal(rng);
      const double im = normal(rng);
      out.V(k, j) += Complex(re, im);
    }
  }
  return out;
}

SweepConfig sweep_config_from_json(const nlohmann::json& j) {
  SweepConfig c;
  try {
    c.frequencies_hz = j.at("frequencies_hz").get<std::vector<double>>();
    c.snr_db = j.value("snr_db", 0.0);
    c.seed = j.value("seed", std::uint64_t{0});
    c.n_electrodes = j.value("n_electrodes", 16);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kInvalidInput, std::string("sweep config: ") + e.what());
  }
  if (c.frequencies_hz.empty()) throw Error(ErrorCode::kInvalidInput, "no frequencies");
  for (double f : c.frequencies_hz) {
    if (!(f > 0.0)) throw Error(ErrorCode::kInvalidInput, "frequencies must be positive");
  }
  if (c.n_electrodes < 4) throw Error(ErrorCode::kInvalidInput, "need at least 4 electrodes");
  return c;
}

void write_dataset_csv(const std::string& path, const std::vector<BoundaryDataset>& datasets) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << std::setprecision(17);
  out << "omega,k,j,re_V,im_V,masked\n";
  for (const auto& ds : datasets) {
    for (int k = 0; k < ds.n_electrodes; ++k) {
      for (int j = 0; j < ds.n_electrodes; ++j) {
        out << ds.omega.omega << ',' << k + 1 << ',' << j + 1 << ',' << ds.V(k, j).real() << ','
            << ds.V(k, j).imag() << ',' << ds.mask(k, j) << '\n';
      }
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

std::vector<BoundaryDataset> read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("omega,k,j,re_V,im_V,masked", 0) != 0) {
    throw Error(ErrorCode::kInvalidInput, path + ": unexpected header");
  }
  struct Row {
    int k, j, masked;
    double re, im;
  };
  std::map<double, std::vector<Row>> by_omega;
  std::vector<double> order;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw Error(ErrorCode::kInvalidInput, path + ": bad row " + line);
    Row r{};
    double omega = 0.0;
    try {
      omega = std::stod(cells[0]);
      r.k = std::stoi(cells[1]);
      r.j = std::stoi(cells[2]);
      r.re = std::stod(cells[3]);
      r.im = std::stod(cells[4]);
      r.masked = std::stoi(cells[5]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidInput, path + ": bad row " + line);
    }
    if (!by_omega.count(omega)) order.push_back(omega);
    by_omega[omega].push_back(r);
  }
  std::vector<BoundaryDataset> out;
  for (double omega : order) {
    const auto& rows = by_omega[omega];
    int n = 0;
    for (const auto& r : rows) n = std::max({n, r.k, r.j});
    if (static_cast<int>(rows.size()) != n * n) {
      throw Error(ErrorCode::kInvalidInput, path + ": incomplete matrix");
    }
    BoundaryDataset ds;
    ds.omega = Frequency{omega};
    ds.n_electrodes = n;
    ds.V = Eigen::MatrixXcd::Zero(n, n);
    ds.mask = Eigen::MatrixXi::Zero(n, n);
    for (const auto& r : rows) {
      if (r.k < 1 || r.j < 1) throw Error(ErrorCode::kInvalidInput, path + ": bad index");
      ds.V(r.k - 1, r.j - 1) = Complex(r.re, r.im);
      ds.mask(r.k - 1, r.j - 1) = r.masked;
    }
    out.push_back(std::move(ds));
  }
  return out;
}

}  // namespace mfeit
