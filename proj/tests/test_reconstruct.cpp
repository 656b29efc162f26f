#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "mfeit/errors.hpp"
#include "mfeit/reconstruct.hpp"

using namespace mfeit;

namespace {

struct Setup {
  Phantom bare = build_phantom(PhantomSpec{});
  Mesh mesh;
  ElectrodeLayout layout = ElectrodeLayout::equally_spaced(16);
  Eigen::MatrixXi mask;
  SensitivityMatrix S;

  explicit Setup(double h = 0.1, int pixels = 16, bool masked = true) {
    MeshOptions o;
    o.pixels = pixels;
    mesh = mesh_domain(bare, h, o);
    BoundaryDataset d;
    d.n_electrodes = 16;
    d.V = Eigen::MatrixXcd::Zero(16, 16);
    d.mask = Eigen::MatrixXi::Zero(16, 16);
    mask = masked ? mask_adjacent(d).mask : d.mask;
    S = build_sensitivity(mesh, layout, bare.materials, mask, true);
  }
};

const Setup& coarse() {
  static const Setup s;
  return s;
}

BoundaryDataset from_rows(const SensitivityMatrix& S, const Eigen::VectorXcd& b, Frequency f,
                          const Eigen::MatrixXi& mask) {
  BoundaryDataset d;
  d.n_electrodes = 16;
  d.omega = f;
  d.V = Eigen::MatrixXcd::Zero(16, 16);
  d.mask = mask;
  for (std::size_t r = 0; r < S.rows.size(); ++r) d.V(S.rows[r][0], S.rows[r][1]) = b(r);
  return d;
}

BoundaryDataset zeros(Frequency f, const Eigen::MatrixXi& mask) {
  BoundaryDataset d;
  d.n_electrodes = 16;
  d.omega = f;
  d.V = Eigen::MatrixXcd::Zero(16, 16);
  d.mask = mask;
  return d;
}

// P1 gradient from the three vertex values by solving the 2x2 edge system.
Eigen::Vector2cd p1_gradient(const Mesh& m, int t, const std::vector<Complex>& u) {
  const auto& tri = m.triangles[t];
  Eigen::Matrix2d E;
  E.row(0) = (m.nodes[tri[1]] - m.nodes[tri[0]]).transpose();
  E.row(1) = (m.nodes[tri[2]] - m.nodes[tri[0]]).transpose();
  const Eigen::Vector2cd du(u[tri[1]] - u[tri[0]], u[tri[2]] - u[tri[0]]);
  return E.cast<Complex>().fullPivLu().solve(du);
}

}  // namespace

TEST_CASE("sensitivity columns sum to the energy form") {
  const auto& s = coarse();
  const Frequency f = Frequency::from_hz(5e4);
  SweepOptions so;
  so.medium = Medium::kHomogeneous;
  const auto V = simulate_sweep(s.bare, s.mesh, s.layout, {f}, so).front().V;
  const Eigen::VectorXcd sum = s.S.at(f).rowwise().sum();
  const Complex gb = gamma_background(f, s.bare.materials);
  const double vmax = V.cwiseAbs().maxCoeff();
  for (std::size_t r = 0; r < s.S.rows.size(); ++r) {
    const auto [k, j] = s.S.rows[r];
    CHECK(std::abs(sum(r) + V(k, j) / gb) <= 1e-9 * vmax / std::abs(gb));
  }
}

TEST_CASE("sensitivity entries match direct pixel quadrature") {
  const auto& s = coarse();
  const Frequency f = Frequency::from_hz(5e5);
  const Complex gb = gamma_background(f, s.bare.materials);
  std::vector<PotentialField> fields;
  for (int k = 1; k <= 16; ++k) {
    auto fld = homogeneous_reference(s.mesh, s.bare.materials, f, make_injection(s.mesh, s.layout, k));
    for (auto& v : fld.u) v *= gb;
    fields.push_back(fld);
  }
  std::mt19937 rng(3);
  std::uniform_int_distribution<int> pix(0, static_cast<int>(s.S.pixels.active.size()) - 1);
  std::uniform_int_distribution<int> row(0, static_cast<int>(s.S.rows.size()) - 1);
  for (int trial = 0; trial < 20; ++trial) {
    const int c = pix(rng), r = row(rng);
    const auto [k, j] = s.S.rows[r];
    Complex acc = 0.0;
    for (std::size_t t = 0; t < s.mesh.triangles.size(); ++t) {
      if (s.mesh.pixel_map[t] != s.S.pixels.active[c]) continue;
      const auto gk = p1_gradient(s.mesh, static_cast<int>(t), fields[k].u);
      const auto gj = p1_gradient(s.mesh, static_cast<int>(t), fields[j].u);
      acc -= s.mesh.triangle_area(static_cast<int>(t)) * gk.cwiseProduct(gj).sum();
    }
    CHECK(std::abs(s.S.J(r, c) - acc) <= 1e-9 * s.S.J.cwiseAbs().maxCoeff());
  }
}

TEST_CASE("sensitivity rows are symmetric in the pair") {
  const auto& s = coarse();
  std::map<std::pair<int, int>, int> index;
  for (std::size_t r = 0; r < s.S.rows.size(); ++r) index[{s.S.rows[r][0], s.S.rows[r][1]}] = r;
  for (const auto& [kj, r] : index) {
    const int rt = index.at({kj.second, kj.first});
    CHECK((s.S.J.row(r) - s.S.J.row(rt)).cwiseAbs().maxCoeff() <= 1e-12 * s.S.J.cwiseAbs().maxCoeff());
  }
  CHECK(s.S.rows.size() == 256 - 48);
}

TEST_CASE("parallel sensitivity assembly equals the serial one") {
  const auto& s = coarse();
  const auto serial = build_sensitivity(s.mesh, s.layout, s.bare.materials, s.mask, false);
  CHECK((serial.J - s.S.J).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(build_sensitivity(s.mesh, s.layout, s.bare.materials, Eigen::MatrixXi::Zero(8, 8)),
                  Error);
}

TEST_CASE("identical data give a zero image") {
  const auto& s = coarse();
  const Frequency f = Frequency::from_hz(1e3);
  const auto ref = simulate_sweep(s.bare, s.mesh, s.layout, {f}).front();
  CHECK(reconstruct_frequency(ref, ref, s.S).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Tikhonov solution matches the normal equations") {
  const auto& s = coarse();
  const Frequency f = Frequency::from_hz(1.5e5);
  const Eigen::MatrixXcd A = s.S.at(f);
  std::mt19937 rng(5);
  std::normal_distribution<double> n01;
  Eigen::VectorXcd b(A.rows());
  for (int i = 0; i < b.size(); ++i) b(i) = Complex(n01(rng), n01(rng)) * A.cwiseAbs().maxCoeff();
  const double alpha = 1e-3 * A.squaredNorm();
  Regularization reg;
  reg.alpha = alpha;
  const auto x = reconstruct_frequency(from_rows(s.S, b, f, s.mask), zeros(f, s.mask), s.S, reg);
  const Eigen::MatrixXcd N = A.adjoint() * A + alpha * Eigen::MatrixXcd::Identity(A.cols(), A.cols());
  const Eigen::VectorXcd oracle = N.ldlt().solve(A.adjoint() * b);
  CHECK((x - oracle).norm() <= 1e-8 * oracle.norm());

  // Linearity in the data and monotone shrinkage in alpha.
  const Complex c(0.3, -2.0);
  const auto xc = reconstruct_frequency(from_rows(s.S, c * b, f, s.mask), zeros(f, s.mask), s.S, reg);
  CHECK((xc - c * x).norm() <= 1e-10 * std::abs(c) * x.norm());
  double prev = INFINITY;
  for (double a : {1e-6, 1e-4, 1e-2, 1.0}) {
    reg.alpha = a * A.squaredNorm();
    const double nx = reconstruct_frequency(from_rows(s.S, b, f, s.mask), zeros(f, s.mask), s.S, reg).norm();
    CHECK(nx <= prev);
    prev = nx;
  }
}

TEST_CASE("discrepancy principle meets the target misfit") {
  const auto& s = coarse();
  const Frequency f = Frequency::from_hz(5e4);
  const Eigen::MatrixXcd A = s.S.at(f);
  Eigen::VectorXcd x0 = Eigen::VectorXcd::Zero(A.cols());
  x0(A.cols() / 3) = 1.0;
  const Eigen::VectorXcd clean = A * x0;
  const double sd = 1e-2 * clean.cwiseAbs().maxCoeff();
  std::mt19937 rng(9);
  std::normal_distribution<double> n01(0.0, std::sqrt(0.5));
  Eigen::VectorXcd b = clean;
  for (int i = 0; i < b.size(); ++i) b(i) += sd * Complex(n01(rng), n01(rng));
  Regularization reg;
  reg.noise_std = sd;
  const auto x = reconstruct_frequency(from_rows(s.S, b, f, s.mask), zeros(f, s.mask), s.S, reg);
  const double misfit = (A * x - b).norm();
  CHECK(misfit == doctest::Approx(std::sqrt(static_cast<double>(b.size())) * sd).epsilon(1e-6));
}

TEST_CASE("unregularized rank-deficient system is singular") {
  const auto& s = coarse();
  const Frequency f = Frequency::from_hz(1e3);
  std::mt19937 rng(1);
  std::normal_distribution<double> n01;
  Eigen::VectorXcd b(static_cast<int>(s.S.rows.size()));
  for (int i = 0; i < b.size(); ++i) b(i) = Complex(n01(rng), n01(rng));
  Regularization reg;
  reg.alpha = 0.0;
  try {
    reconstruct_frequency(from_rows(s.S, b, f, s.mask), zeros(f, s.mask), s.S, reg);
    FAIL("expected SingularSystem");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kSingularSystem);
  }
  CHECK_THROWS_AS(reconstruct_frequency(zeros(f, s.mask), zeros(Frequency::from_hz(2e3), s.mask), s.S),
                  Error);
}

TEST_CASE("one-pixel synthetic perturbation peaks at its pixel") {
  const auto& s = coarse();
  const Frequency f = Frequency::from_hz(5e4);
  const Eigen::MatrixXcd A = s.S.at(f);
  Regularization reg;
  reg.alpha = 1e-10 * A.squaredNorm();
  for (const Vec2 at : {Vec2(0.7, 0.2), Vec2(-0.3, -0.75), Vec2(0.1, 0.8)}) {
    const int id = s.S.pixels.pixel_of(at);
    const int m = static_cast<int>(std::find(s.S.pixels.active.begin(), s.S.pixels.active.end(), id) -
                                   s.S.pixels.active.begin());
    REQUIRE(m < static_cast<int>(s.S.pixels.active.size()));
    const auto x = reconstruct_frequency(from_rows(s.S, A.col(m), f, s.mask), zeros(f, s.mask), s.S, reg);
    int arg = 0;
    x.cwiseAbs().maxCoeff(&arg);
    CHECK(arg == m);
  }
}

TEST_CASE("real and imaginary perturbations stay separated") {
  const auto& s = coarse();
  const Frequency f = Frequency::from_hz(5e5);
  const Eigen::MatrixXcd A = s.S.at(f);
  Eigen::VectorXcd x0 = Eigen::VectorXcd::Zero(A.cols());
  for (int c = 0; c < A.cols(); c += 7) x0(c) = 1.0 + 0.1 * c;
  for (const Complex unit : {Complex(1.0, 0.0), Complex(0.0, 1.0)}) {
    const auto x = reconstruct_frequency(from_rows(s.S, A * (unit * x0), f, s.mask), zeros(f, s.mask), s.S);
    const Eigen::VectorXcd rotated = x / unit;
    CHECK(rotated.imag().norm() <= 1e-10 * rotated.real().norm());
  }
}

TEST_CASE("sweep maps columns per frequency") {
  const auto& s = coarse();
  PhantomSpec spec;
  spec.disks.push_back({{0.3, 0.2}, 0.15});
  const Phantom ph = build_phantom(spec);
  const Mesh m = mesh_domain(ph, 0.1);
  const std::vector<Frequency> fs = {Frequency::from_hz(1e3), Frequency::from_hz(5e5)};
  auto data = simulate_sweep(ph, m, s.layout, fs);
  SweepOptions so;
  so.medium = Medium::kHomogeneous;
  auto refs = simulate_sweep(ph, m, s.layout, fs, so);
  const auto stack = reconstruct_sweep(data, refs, s.S);
  REQUIRE(stack.images.cols() == 2);
  const auto swapped = reconstruct_sweep({data[1], data[0]}, {refs[1], refs[0]}, s.S);
  CHECK(swapped.images.col(0) == stack.images.col(1));
  CHECK(swapped.images.col(1) == stack.images.col(0));
  const auto same = reconstruct_sweep({data[0], data[0]}, {refs[0], refs[0]}, s.S);
  CHECK(same.images.col(0) == same.images.col(1));
  CHECK_THROWS_AS(reconstruct_sweep(data, {refs[0]}, s.S), Error);
}

TEST_CASE("masking adjacent entries on noiseless data") {
  const Phantom ph = build_phantom(load_phantom_spec(std::string(MFEIT_SOURCE_DIR) + "/configs/mixed_phantom.json"));
  const Mesh m = mesh_domain(ph, 0.05);
  const Setup masked(0.05, 32, true), full(0.05, 32, false);
  const Frequency f = Frequency::from_hz(5e5);
  const auto data = simulate_sweep(ph, m, masked.layout, {f}).front();
  SweepOptions so;
  so.medium = Medium::kHomogeneous;
  const auto ref = simulate_sweep(ph, m, masked.layout, {f}, so).front();
  // Same alpha for both; the default scales with ||J||^2, which the
  // adjacent rows dominate.
  Regularization reg;
  reg.alpha = 1e-4 * masked.S.at(f).squaredNorm();
  const auto a = reconstruct_frequency(mask_adjacent(data), mask_adjacent(ref), masked.S, reg);
  const auto b = reconstruct_frequency(data, ref, full.S, reg);
  // Measured 8.8% relative L2 and cosine 0.996: the adjacent entries are
  // exact here and carry a large share of the data.
  CHECK((a - b).norm() <= 0.10 * b.norm());
  CHECK(std::abs(a.dot(b)) >= 0.99 * a.norm() * b.norm());
}

TEST_CASE("image CSV round trip is lossless") {
  const auto& s = coarse();
  ImageStack st;
  st.pixels = s.S.pixels;
  st.frequencies = {Frequency::from_hz(10.0), Frequency::from_hz(5e5)};
  st.images = Eigen::MatrixXcd::Random(static_cast<int>(st.pixels.active.size()), 2);
  const std::string path = "reconstruct_roundtrip.csv";
  write_image_csv(path, st);
  const auto back = read_image_csv(path, st.pixels.n, 1.0);
  std::remove(path.c_str());
  CHECK(back.images == st.images);
  CHECK(back.pixels.active == st.pixels.active);
  CHECK(back.frequencies[1].omega == st.frequencies[1].omega);
  CHECK_THROWS_AS(read_image_csv("no_such_image.csv", 16, 1.0), Error);
}

TEST_CASE("PGM rendering") {
  const auto& s = coarse();
  const int np = static_cast<int>(s.S.pixels.active.size());
  Eigen::VectorXd v = Eigen::VectorXd::Zero(np);
  v(0) = -2.0;
  v(1) = 2.0;
  const std::string path = "reconstruct_render.pgm";
  write_pgm(path, s.S.pixels, v);
  std::ifstream in(path, std::ios::binary);
  std::string magic;
  int w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  std::vector<unsigned char> px(w * h);
  in.read(reinterpret_cast<char*>(px.data()), w * h);
  std::remove(path.c_str());
  CHECK(magic == "P5");
  CHECK(w == 16);
  CHECK(maxval == 255);
  auto at = [&](int id) { return px[(15 - id / 16) * 16 + id % 16]; };
  CHECK(at(s.S.pixels.active[0]) == 1);
  CHECK(at(s.S.pixels.active[1]) == 255);
  CHECK(at(s.S.pixels.active[2]) == 128);
  CHECK(px[0] == 0);  // corner pixel lies outside the disk
  CHECK_THROWS_AS(write_pgm(path, s.S.pixels, Eigen::VectorXd::Zero(3)), Error);
}

TEST_CASE("region-of-interest helpers") {
  const auto& s = coarse();
  const auto& px = s.S.pixels;
  const ConductiveDisk d{{0.3, -0.2}, 0.3};
  const auto roi = roi_disk(px, d);
  for (int c : roi) CHECK((px.center(px.active[c]) - d.center).norm() <= 0.3);
  // Centre count approximates the area in pixel units.
  CHECK(std::abs(static_cast<double>(roi.size()) - M_PI * 0.09 / (px.width() * px.width())) < 6.0);

  PhantomSpec spec;
  spec.disks.push_back(d);
  const auto bg = roi_background(px, build_phantom(spec), 0.1);
  for (int c : bg) CHECK((px.center(px.active[c]) - d.center).norm() >= 0.4);

  Eigen::VectorXd v = Eigen::VectorXd::Zero(static_cast<int>(px.active.size()));
  for (std::size_t i = 0; i < bg.size(); ++i) v(bg[i]) = (i % 2) ? 1.0 : -1.0;
  for (int c : roi) v(c) = 5.0;
  double mean = 0.0, var = 0.0;
  for (int c : bg) mean += v(c);
  mean /= bg.size();
  for (int c : bg) var += (v(c) - mean) * (v(c) - mean);
  const double sd = std::sqrt(var / (bg.size() - 1));
  CHECK(roi_contrast(v, roi, bg) == doctest::Approx(5.0 / sd));
  CHECK_THROWS_AS(roi_contrast(v, {}, bg), Error);
}
