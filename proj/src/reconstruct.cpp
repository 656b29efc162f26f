#include "mfeit/reconstruct.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "fe.hpp"
#include "mfeit/errors.hpp"

namespace mfeit {

Eigen::MatrixXcd SensitivityMatrix::at(Frequency omega) const {
  const Complex gb = gamma_background(omega, materials);
  return J / (gb * gb);
}

SensitivityMatrix build_sensitivity(const Mesh& mesh, const ElectrodeLayout& layout,
                                    const MaterialSpec& materials, const Eigen::MatrixXi& mask,
                                    bool parallel) {
  const int ne = layout.n_electrodes;
  if (mask.rows() != ne || mask.cols() != ne) {
    throw Error(ErrorCode::kDimensionMismatch, "mask size differs from electrode count");
  }
  SensitivityMatrix S;
  S.pixels = mesh.pixels;
  S.materials = materials;
  for (int k = 0; k < ne; ++k) {
    for (int j = 0; j < ne; ++j) {
      if (!mask(k, j)) S.rows.push_back({k, j});
    }
  }

  // Unit admittivity fields: the solution for gamma_b scaled by gamma_b.
  const Frequency f0 = Frequency::from_hz(1.0);
  const Complex gb = gamma_background(f0, materials);
  std::vector<NeumannCurrent> currents;
  for (int k = 1; k <= ne; ++k) currents.push_back(make_injection(mesh, layout, k));
  Phantom ph;
  ph.domain_radius = mesh.domain_radius;
  ph.materials = materials;
  const auto fields = ForwardProblem(mesh, ph, f0, Medium::kHomogeneous).solve(currents);

  const int nt = static_cast<int>(mesh.triangles.size());
  const int npix = static_cast<int>(mesh.pixels.active.size());
  std::map<int, int> column;
  for (int c = 0; c < npix; ++c) column[mesh.pixels.active[c]] = c;
  std::vector<std::vector<int>> members(npix);
  for (int t = 0; t < nt; ++t) members[column.at(mesh.pixel_map[t])].push_back(t);

  const int nrows = static_cast<int>(S.rows.size());
  S.J = Eigen::MatrixXcd::Zero(nrows, npix);
  auto pixel = [&](int c) {
    Eigen::Matrix<Complex, 2, Eigen::Dynamic> grad(2, ne);
    for (int t : members[c]) {
      const auto eg = detail::element_geometry(mesh, t);
      const auto& tri = mesh.triangles[t];
      for (int k = 0; k < ne; ++k) {
        Eigen::Vector2cd g = Eigen::Vector2cd::Zero();
        for (int a = 0; a < 3; ++a) g += (gb * fields[k].u[tri[a]]) * eg.grad[a].cast<Complex>();
        grad.col(k) = g;
      }
      for (int r = 0; r < nrows; ++r) {
        const auto [k, j] = S.rows[r];
        S.J(r, c) -= eg.area * grad.col(k).cwiseProduct(grad.col(j)).sum();
      }
    }
  };
  if (parallel) {
#pragma omp parallel for schedule(dynamic, 4)
    for (int c = 0; c < npix; ++c) pixel(c);
  } else {
    for (int c = 0; c < npix; ++c) pixel(c);
  }
  return S;
}

Eigen::VectorXcd reconstruct_frequency(const BoundaryDataset& dataset,
                                       const BoundaryDataset& reference,
                                       const SensitivityMatrix& J, const Regularization& reg) {
  if (dataset.n_electrodes != reference.n_electrodes ||
      std::abs(dataset.omega.omega - reference.omega.omega) >
          1e-12 * std::max(1.0, dataset.omega.omega)) {
    throw Error(ErrorCode::kDimensionMismatch, "dataset and reference do not match");
  }
  const int nrows = static_cast<int>(J.rows.size());
  Eigen::VectorXcd b(nrows);
  for (int r = 0; r < nrows; ++r) {
    const auto [k, j] = J.rows[r];
    if (k >= dataset.n_electrodes || j >= dataset.n_electrodes) {
      throw Error(ErrorCode::kDimensionMismatch, "sensitivity rows exceed dataset size");
    }
    b(r) = dataset.V(k, j) - reference.V(k, j);
  }
  const Eigen::MatrixXcd A = J.at(dataset.omega);

  // Solve in the row space: x = A^H (A A^H + alpha I)^{-1} b, via the
  // eigendecomposition of A A^H so alpha can be tuned cheaply.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(A * A.adjoint());
  if (es.info() != Eigen::Success) throw Error(ErrorCode::kNumericalFailure, "eigensolver failed");
  const Eigen::VectorXd lam = es.eigenvalues().cwiseMax(0.0);
  const double lmax = lam.maxCoeff();
  const Eigen::VectorXcd beta = es.eigenvectors().adjoint() * b;

  double alpha = reg.alpha;
  if (alpha < 0.0 && reg.noise_std > 0.0) {
    // Discrepancy principle: ||b - A x(alpha)|| = sqrt(rows) * noise_std.
    const double target = std::sqrt(static_cast<double>(nrows)) * reg.noise_std;
    auto misfit = [&](double a) {
      double s = 0.0;
      for (int i = 0; i < nrows; ++i) s += std::norm(a * beta(i) / (lam(i) + a));
      return std::sqrt(s);
    };
    double lo = std::log(1e-14 * lmax), hi = std::log(lmax);
    if (misfit(std::exp(hi)) <= target) {
      alpha = std::exp(hi);
    } else {
      for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (misfit(std::exp(mid)) > target) hi = mid; else lo = mid;
      }
      alpha = std::exp(lo);
    }
  } else if (alpha < 0.0) {
    alpha = 1e-4 * lmax;
  }
  Eigen::VectorXcd y(nrows);
  for (int i = 0; i < nrows; ++i) {
    const double d = lam(i) + alpha;
    if (!(d > 1e-13 * lmax)) {
      if (beta(i) == Complex(0.0)) {
        y(i) = 0.0;
        continue;
      }
      throw Error(ErrorCode::kSingularSystem, "singular normal equations (alpha = 0)");
    }
    y(i) = beta(i) / d;
  }
  return A.adjoint() * (es.eigenvectors() * y);
}

ImageStack reconstruct_sweep(const std::vector<BoundaryDataset>& datasets,
                             const std::vector<BoundaryDataset>& references,
                             const SensitivityMatrix& J, const Regularization& reg) {
  if (datasets.size() != references.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "one reference per dataset is required");
  }
  ImageStack s;
  s.pixels = J.pixels;
  s.images.resize(static_cast<int>(J.pixels.active.size()), static_cast<int>(datasets.size()));
  for (std::size_t f = 0; f < datasets.size(); ++f) {
    s.images.col(static_cast<int>(f)) = reconstruct_frequency(datasets[f], references[f], J, reg);
    s.frequencies.push_back(datasets[f].omega);
  }
  return s;
}

void write_image_csv(const std::string& path, const ImageStack& stack) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << std::setprecision(17);
  out << "pixel_id,x_center,y_center,omega,re_dgamma,im_dgamma\n";
  for (int f = 0; f < stack.images.cols(); ++f) {
    for (int c = 0; c < stack.images.rows(); ++c) {
      const int id = stack.pixels.active[c];
      const Vec2 x = stack.pixels.center(id);
      out << id << ',' << x.x() << ',' << x.y() << ',' << stack.frequencies[f].omega << ','
          << stack.images(c, f).real() << ',' << stack.images(c, f).imag() << '\n';
    }
  }
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

ImageStack read_image_csv(const std::string& path, int pixels_per_side, double domain_radius) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open " + path);
  std::string line;
  std::getline(in, line);
  if (line.rfind("pixel_id,x_center,y_center,omega,re_dgamma,im_dgamma", 0) != 0) {
    throw Error(ErrorCode::kInvalidInput, path + ": unexpected header");
  }
  std::vector<double> omegas;
  std::map<double, std::map<int, Complex>> values;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw Error(ErrorCode::kInvalidInput, path + ": bad row " + line);
    try {
      const int id = std::stoi(cells[0]);
      const double omega = std::stod(cells[3]);
      if (!values.count(omega)) omegas.push_back(omega);
      values[omega][id] = Complex(std::stod(cells[4]), std::stod(cells[5]));
    } catch (const std::exception&) {
      throw Error(ErrorCode::kInvalidInput, path + ": bad row " + line);
    }
  }
  ImageStack s;
  s.pixels.n = pixels_per_side;
  s.pixels.domain_radius = domain_radius;
  if (omegas.empty()) return s;
  for (const auto& [id, v] : values[omegas[0]]) s.pixels.active.push_back(id);
  s.images.resize(static_cast<int>(s.pixels.active.size()), static_cast<int>(omegas.size()));
  for (std::size_t f = 0; f < omegas.size(); ++f) {
    const auto& col = values[omegas[f]];
    if (col.size() != s.pixels.active.size()) {
      throw Error(ErrorCode::kInvalidInput, path + ": frequencies cover different pixels");
    }
    int c = 0;
    for (const auto& [id, v] : col) {
      if (id != s.pixels.active[c]) throw Error(ErrorCode::kInvalidInput, path + ": pixel mismatch");
      s.images(c++, static_cast<int>(f)) = v;
    }
    s.frequencies.push_back(Frequency{omegas[f]});
  }
  return s;
}

void write_pgm(const std::string& path, const Pixelation& pixels, const Eigen::VectorXd& values) {
  if (values.size() != static_cast<int>(pixels.active.size())) {
    throw Error(ErrorCode::kDimensionMismatch, "image size differs from active pixel count");
  }
  const int n = pixels.n;
  const double vmax = values.size() ? values.cwiseAbs().maxCoeff() : 0.0;
  std::vector<std::uint8_t> grid(static_cast<std::size_t>(n) * n, 0);
  for (int c = 0; c < values.size(); ++c) {
    const double v = vmax > 0.0 ? values(c) / vmax : 0.0;
    const int ix = pixels.active[c] % n, iy = pixels.active[c] / n;
    // Top row of the file is the largest y.
    grid[static_cast<std::size_t>(n - 1 - iy) * n + ix] =
        static_cast<std::uint8_t>(std::lround(128.0 + 127.0 * v));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << "P5\n" << n << ' ' << n << "\n255\n";
  out.write(reinterpret_cast<const char*>(grid.data()), static_cast<std::streamsize>(grid.size()));
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

std::vector<int> roi_disk(const Pixelation& pixels, const ConductiveDisk& disk) {
  std::vector<int> out;
  for (int c = 0; c < static_cast<int>(pixels.active.size()); ++c) {
    if ((pixels.center(pixels.active[c]) - disk.center).norm() <= disk.radius) out.push_back(c);
  }
  return out;
}

std::vector<int> roi_segment(const Pixelation& pixels, const ThinInsulator& seg, double margin) {
  std::vector<int> out;
  for (int c = 0; c < static_cast<int>(pixels.active.size()); ++c) {
    if (point_segment_distance(pixels.center(pixels.active[c]), seg.p, seg.q) <= margin) {
      out.push_back(c);
    }
  }
  return out;
}

std::vector<int> roi_background(const Pixelation& pixels, const Phantom& phantom, double margin) {
  std::vector<int> out;
  for (int c = 0; c < static_cast<int>(pixels.active.size()); ++c) {
    const Vec2 x = pixels.center(pixels.active[c]);
    bool near = false;
    for (const auto& s : phantom.insulators) {
      near = near || point_segment_distance(x, s.p, s.q) < margin;
    }
    for (const auto& d : phantom.disks) near = near || (x - d.center).norm() < d.radius + margin;
    if (!near) out.push_back(c);
  }
  return out;
}

double roi_contrast(const Eigen::VectorXd& values, const std::vector<int>& roi,
                    const std::vector<int>& background) {
  if (roi.empty() || background.size() < 2) {
    throw Error(ErrorCode::kInvalidInput, "ROI and background must be non-empty");
  }
  double m = 0.0;
  for (int c : roi) m += std::abs(values(c));
  m /= static_cast<double>(roi.size());
  double mean = 0.0;
  for (int c : background) mean += values(c);
  mean /= static_cast<double>(background.size());
  double var = 0.0;
  for (int c : background) var += (values(c) - mean) * (values(c) - mean);
  var /= static_cast<double>(background.size() - 1);
  return m / std::sqrt(var);
}

}  // namespace mfeit
