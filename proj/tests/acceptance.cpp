// Acceptance run: one PASS/FAIL line per criterion with its pinned tolerance.
// Exits non-zero when a criterion fails that is not listed in
// --expected-failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mfeit/asymptotics.hpp"
#include "mfeit/errors.hpp"
#include "mfeit/forward.hpp"
#include "mfeit/fusion.hpp"
#include "mfeit/protocol.hpp"
#include "mfeit/reconstruct.hpp"

using namespace mfeit;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v) {
  char b[32];
  std::snprintf(b, sizeof b, "%.3g", v);
  return b;
}

double rel_l2(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += std::norm(a[i] - b[i]);
    den += std::norm(b[i]);
  }
  return std::sqrt(num / den);
}

const std::vector<double> kSweepHz = {10.0, 1e3, 5e4, 1.5e5, 2.5e5, 5e5};

MeshOptions resolved(int ring = 32) {
  MeshOptions o;
  o.model = InterfaceModel::kResolved;
  o.disk_ring_points = ring;
  return o;
}

Phantom load(const std::string& name) {
  return build_phantom(load_phantom_spec(std::string(MFEIT_SOURCE_DIR) + "/configs/" + name));
}

// 1. Jump conditions converge in delta.
Outcome jump_convergence() {
  const std::vector<double> deltas = {1e-2, 5e-3, 2.5e-3, 1.25e-3};
  Outcome o{true, ""};
  for (double hz : {10.0, 5e4, 5e5}) {
    std::vector<double> err, dnu;
    for (double d : deltas) {
      PhantomSpec s;
      s.insulators.push_back({{-0.5, 0.0}, {0.5, 0.0}, d});
      const Phantom ph = build_phantom(s);
      const Mesh m = mesh_domain(ph, 0.05, resolved());
      const auto field = solve_resolved(m, ph, Frequency::from_hz(hz), uniform_field_current(m, {0.6, 0.8}));
      const auto jp = jump_profile(m, ph, field, 0);
      double e = 0.0, j = 0.0;
      for (std::size_t i = 0; i < jp.s.size(); ++i) {
        e = std::max(e, std::abs(jp.jump_u[i] - jp.predicted_jump[i]));
        j = std::max(j, std::abs(jp.jump_dnu[i]));
      }
      err.push_back(e);
      dnu.push_back(j);
    }
    const double p1 = fitted_order(deltas, err), p2 = fitted_order(deltas, dnu);
    o.pass = o.pass && p1 >= 1.5 && p2 >= 0.8;
    o.detail += fmt(hz) + " Hz: [u] order " + fmt(p1) + ", [du/dnu] order " + fmt(p2) + "; ";
  }
  return o;
}

// 2. Resolved strip vs zero-thickness slit.
Outcome model_equivalence() {
  const std::vector<double> deltas = {2e-3, 1e-3, 5e-4, 2.5e-4};
  Outcome o{true, ""};
  for (double hz : {10.0, 5e4, 5e5}) {
    std::vector<double> err;
    double at_ref = 0.0;
    for (double d : deltas) {
      PhantomSpec s;
      s.insulators.push_back({{-0.5, 0.1}, {0.4, -0.2}, d});
      const Phantom ph = build_phantom(s);
      const Mesh mr = mesh_domain(ph, 0.05, resolved());
      const Mesh mz = mesh_domain(ph, 0.05);
      const Frequency f = Frequency::from_hz(hz);
      const auto tr = boundary_trace(mr, solve_resolved(mr, ph, f, uniform_field_current(mr, {0.6, 0.8})));
      const auto tz = boundary_trace(mz, solve_zero_thickness(mz, ph, f, uniform_field_current(mz, {0.6, 0.8})));
      err.push_back(rel_l2(tz, tr));
      if (d == 5e-4) at_ref = err.back();
    }
    const double p = fitted_order(deltas, err);
    o.pass = o.pass && at_ref <= 0.02 && p >= 1.5;
    o.detail += fmt(hz) + " Hz: rel " + fmt(at_ref) + " at 5e-4, order " + fmt(p) + "; ";
  }
  return o;
}

// 3. Circle polarization tensor.
Outcome polarization() {
  std::mt19937 rng(2024);
  std::uniform_real_distribution<double> mag(0.6, 5.0), arg(-M_PI, M_PI);
  const auto curve = BoundaryCurve::circle({0.0, 0.0}, 0.5, 128);
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    double m = mag(rng);
    if (m <= 0.6) m = 0.61;
    const Complex ld = std::polar(m, arg(rng));
    const auto Q = polarization_quadrature(ld, curve);
    const auto D = polarization_disk(ld, M_PI * 0.25);
    worst = std::max(worst, (Q - D).norm() / D.norm());
  }
  return {worst <= 1e-6, "max rel " + fmt(worst) + " over 10 lambda_d (tol 1e-6)"};
}

// 4. Boundary operator quadrature against -phi/2.
Outcome boundary_operator_check() {
  const int n = 256;
  std::vector<Complex> phi(n);
  for (int k = 0; k < n; ++k) {
    const double t = 2.0 * M_PI * k / n;
    phi[k] = Complex(std::cos(t) - 0.4 * std::sin(5 * t), 0.7 * std::sin(2 * t));
  }
  const auto q = boundary_operator_quadrature(BoundaryCurve::circle({0.0, 0.0}, 1.0, n), phi,
                                              SignConvention::kMinus, true);
  double worst = 0.0;
  for (int k = 0; k < n; ++k) worst = std::max(worst, std::abs(q[k] + 0.5 * phi[k]));
  return {worst <= 1e-8, "max abs " + fmt(worst) + " (tol 1e-8)"};
}

// 5. Forward perturbation against the high-frequency expansion.
Outcome asymptotic_agreement() {
  const Vec2 a(0.6, 0.8);
  const Frequency f = Frequency::from_hz(5e5);
  std::vector<double> err, sizes;
  for (int lev = 0; lev < 3; ++lev) {
    const double d = 1e-3 / std::pow(2.0, lev), r = 5e-2 / std::pow(2.0, lev);
    PhantomSpec s;
    s.insulators.push_back({{-0.5, -0.2}, {0.1, -0.5}, d});
    s.disks.push_back({{0.3, 0.3}, r});
    const Phantom ph = build_phantom(s);
    const Mesh m = mesh_domain(ph, 0.0125, resolved(64));
    const auto g = uniform_field_current(m, a);
    const auto tu = boundary_trace(m, solve_resolved(m, ph, f, g));
    const auto t0 = boundary_trace(m, homogeneous_reference(m, ph.materials, f, g));
    const Complex gb = gamma_background(f, ph.materials);
    std::vector<Complex> diff(tu.size());
    std::vector<Vec2> pts;
    for (std::size_t i = 0; i < tu.size(); ++i) {
      diff[i] = (tu[i] - t0[i]) * gb;
      pts.push_back(m.nodes[m.boundary_nodes[i]]);
    }
    err.push_back(rel_l2(boundary_operator(diff, SignConvention::kPlus), high_freq_prediction(ph, f, a, pts)));
    sizes.push_back(d);
  }
  const double p = fitted_order(sizes, err);
  const bool pass = err[0] <= 0.10 && err[1] < err[0] && err[2] < err[1] && p > 0.0;
  return {pass, "rel " + fmt(err[0]) + ", " + fmt(err[1]) + ", " + fmt(err[2]) + ", order " + fmt(p) +
                    " (tol 0.10, decreasing, order > 0)"};
}

// 6. Pole and residue round trip.
struct RoundTrip {
  double loc = INFINITY, res = INFINITY;
};

RoundTrip compare_models(const MeromorphicModel& truth, const MeromorphicModel& rec) {
  RoundTrip r;
  if (rec.simple_poles.size() != truth.simple_poles.size() ||
      rec.double_poles.size() != truth.double_poles.size()) {
    return r;
  }
  r.loc = r.res = 0.0;
  for (const auto& p : truth.simple_poles) {
    const auto it = std::min_element(rec.simple_poles.begin(), rec.simple_poles.end(), [&](auto& x, auto& y) {
      return std::abs(x.location - p.location) < std::abs(y.location - p.location);
    });
    r.loc = std::max(r.loc, std::abs(it->location - p.location));
    r.res = std::max(r.res, std::abs(it->residue - p.residue) / std::abs(p.residue));
  }
  for (const auto& p : truth.double_poles) {
    const auto it = std::min_element(rec.double_poles.begin(), rec.double_poles.end(), [&](auto& x, auto& y) {
      return std::abs(x.location - p.location) < std::abs(y.location - p.location);
    });
    r.loc = std::max(r.loc, std::abs(it->location - p.location));
    r.res = std::max(r.res, std::abs(it->strength - p.strength) / std::abs(p.strength));
  }
  return r;
}

// Noiseless and noisy recovery; the tolerance sits just above the noise floor.
std::pair<RoundTrip, RoundTrip> round_trip(const MeromorphicModel& truth, double snr_db) {
  const int n = 256;
  std::vector<Complex> samples(n);
  for (int k = 0; k < n; ++k) samples[k] = meromorphic_derivative(truth, std::polar(1.0, 2.0 * M_PI * k / n));
  const RoundTrip clean = compare_models(truth, recover_poles(0.0, 1.0, samples).model);
  double rms = 0.0;
  for (const auto& v : samples) rms += std::norm(v);
  rms = std::sqrt(rms / n);
  const double level = std::pow(10.0, -snr_db / 20.0);
  std::mt19937 rng(17);
  std::normal_distribution<double> n01(0.0, std::sqrt(0.5));
  for (auto& v : samples) v += level * rms * Complex(n01(rng), n01(rng));
  PoleRecoveryConfig pc;
  pc.fit_tol = 1.1 * level;
  RoundTrip noisy;
  try {
    noisy = compare_models(truth, recover_poles(0.0, 1.0, samples, pc).model);
  } catch (const Error&) {
  }
  return {clean, noisy};
}

Outcome residue_round_trip() {
  MeromorphicModel m;
  m.simple_poles = {{{-0.5, 0.3}, {-0.02, 0.01}}, {{-0.1, 0.5}, {0.02, -0.01}},
                    {{0.2, -0.5}, {0.0, -0.015}}, {{0.55, -0.1}, {0.0, 0.015}}};
  m.segments = {{0, 1}, {2, 3}};
  m.double_poles = {{{0.3, 0.4}, {-0.003, 0.001}}, {{-0.4, -0.35}, {-0.002, -0.0005}}};
  const auto [clean, noisy] = round_trip(m, 60.0);

  // Reported only: the mixed phantom coefficients, where the segment residues
  // are about 1e-4 next to disk strengths of about 5e-3.
  const Phantom ph = load("mixed_phantom.json");
  const auto mixed_model = meromorphic_model(ph, expansion_coefficients(ph, Frequency::from_hz(5e5), {0.6, 0.8}),
                                     CoefficientPart::kReal);
  const auto [fclean, fnoisy] = round_trip(mixed_model, 60.0);

  const bool pass = clean.loc <= 1e-6 && clean.res <= 1e-6 && noisy.loc <= 1e-2;
  return {pass, "noiseless loc " + fmt(clean.loc) + " res " + fmt(clean.res) + " (tol 1e-6); 60 dB loc " +
                    fmt(noisy.loc) + " (tol 1e-2); mixed phantom coefficients: noiseless loc " + fmt(fclean.loc) +
                    ", 60 dB loc " + fmt(fnoisy.loc) + " (not graded)"};
}

// Pole locations of the detection chain on simulated 500 kHz electrode data.
MeromorphicModel detect(const Phantom& ph, double h) {
  const Mesh m = mesh_domain(ph, h, resolved(64));
  const auto layout = ElectrodeLayout::equally_spaced(16);
  const Frequency f = Frequency::from_hz(5e5);
  const auto d = simulate_sweep(ph, m, layout, {f}).front();
  SweepOptions so;
  so.medium = Medium::kHomogeneous;
  const auto r = simulate_sweep(ph, m, layout, {f}, so).front();
  auto u = electrode_perturbation(d, r, {1.0, 0.0}, ph.domain_radius);
  const Complex gb = gamma_background(f, ph.materials);
  for (auto& v : u) v *= gb;
  const auto phi = boundary_operator(u, SignConvention::kPlus);
  PoleRecoveryConfig pc;
  pc.fit_tol = 0.05;
  pc.max_order = 6;
  return recover_poles(0.0, 1.0, identification_samples(phi, 1.0, 1.0, 128, layout.width), pc).model;
}

// 7. End-to-end detection from electrode data.
Outcome end_to_end_detection() {
  PhantomSpec ds;
  ds.disks.push_back({{0.3, 0.2}, 0.1});
  const auto disk = detect(build_phantom(ds), 0.025);
  double dz = INFINITY;
  if (disk.double_poles.size() == 1) dz = std::abs(disk.double_poles[0].location - Complex(0.3, 0.2));

  PhantomSpec ss;
  ss.insulators.push_back({{-0.5, -0.2}, {0.1, -0.5}, 5e-4});
  const auto seg = detect(build_phantom(ss), 0.025);
  const Complex P(-0.5, -0.2), Q(0.1, -0.5);
  double de = INFINITY;
  if (seg.segments.size() == 1) {
    const Complex a = seg.simple_poles[seg.segments[0][0]].location;
    const Complex b = seg.simple_poles[seg.segments[0][1]].location;
    de = std::min(std::max(std::abs(a - P), std::abs(b - Q)), std::max(std::abs(a - Q), std::abs(b - P)));
  }
  const double len = std::abs(Q - P);
  const bool pass = dz <= 0.05 * 2.0 && de <= 0.10 * len;
  return {pass, "disk centre error " + fmt(dz) + " (tol 0.1 = 5% of diameter); endpoint error " + fmt(de) +
                    " (tol " + fmt(0.1 * len) + " = 10% of length)"};
}

// 8. Reciprocity and zero boundary mean.
Outcome reciprocity() {
  const Phantom ph = load("mixed_phantom.json");
  const Mesh m = mesh_domain(ph, 0.05);
  const auto layout = ElectrodeLayout::equally_spaced(16);
  double recip = 0.0, mean = 0.0;
  for (double hz : {10.0, 5e4, 5e5}) {
    const ForwardProblem problem(m, ph, Frequency::from_hz(hz), Medium::kPhantom);
    std::vector<NeumannCurrent> gs;
    for (int k = 1; k <= 16; ++k) gs.push_back(make_injection(m, layout, k));
    const auto fields = problem.solve(gs, true);
    const Eigen::MatrixXcd V = energy_form(problem, m, fields, true);
    recip = std::max(recip, (V - V.transpose()).cwiseAbs().maxCoeff() / V.cwiseAbs().maxCoeff());
    for (const auto& fld : fields) mean = std::max(mean, std::abs(boundary_mean(m, fld.u)));
  }
  return {recip <= 1e-10 && mean <= 1e-10,
          "asymmetry " + fmt(recip) + " x max|V| (tol 1e-10); boundary mean " + fmt(mean) + " (tol 1e-10)"};
}

struct Pipeline {
  Phantom phantom;
  Mesh mesh;
  ImageStack stack;
  std::vector<int> background;
};

Pipeline run_pipeline(const std::string& name) {
  Pipeline p;
  p.phantom = load(name);
  p.mesh = mesh_domain(p.phantom, 0.025, resolved());
  const auto layout = ElectrodeLayout::equally_spaced(16);
  std::vector<Frequency> fs;
  for (double hz : kSweepHz) fs.push_back(Frequency::from_hz(hz));
  auto data = simulate_sweep(p.phantom, p.mesh, layout, fs);
  SweepOptions so;
  so.medium = Medium::kHomogeneous;
  auto refs = simulate_sweep(p.phantom, p.mesh, layout, fs, so);
  for (auto& d : data) d = mask_adjacent(d);
  for (auto& r : refs) r = mask_adjacent(r);
  const auto J = build_sensitivity(p.mesh, layout, p.phantom.materials, data[0].mask);
  p.stack = reconstruct_sweep(data, refs, J);
  p.background = roi_background(p.mesh.pixels, p.phantom, 2.0 * p.mesh.pixels.width());
  return p;
}

std::vector<int> segment_roi(const Pipeline& p) {
  std::vector<int> roi;
  for (const auto& s : p.phantom.insulators) {
    const auto v = roi_segment(p.mesh.pixels, s, 0.5 * p.mesh.pixels.width());
    roi.insert(roi.end(), v.begin(), v.end());
  }
  std::sort(roi.begin(), roi.end());
  roi.erase(std::unique(roi.begin(), roi.end()), roi.end());
  return roi;
}

// 9. Frequency-dependent visibility.
Outcome visibility(const Pipeline& a, const Pipeline& b) {
  const int lo = 0, hi = static_cast<int>(kSweepHz.size()) - 1;
  auto contrast = [](const Pipeline& p, const std::vector<int>& roi, int f) {
    return roi_contrast(Eigen::VectorXd(p.stack.images.col(f).real()), roi, p.background);
  };
  const auto enclosed = roi_disk(b.mesh.pixels, b.phantom.disks[1]);
  const double disk_ratio = contrast(b, enclosed, hi) / contrast(b, enclosed, lo);
  const auto seg = segment_roi(a);
  const double seg_ratio = contrast(a, seg, lo) / contrast(a, seg, hi);
  return {disk_ratio >= 3.0 && seg_ratio >= 2.0, "enclosed disk 500k/10 ratio " + fmt(disk_ratio) +
                                                      " (tol 3); segment 10/500k ratio " + fmt(seg_ratio) + " (tol 2)"};
}

// 10. PCA fusion.
Outcome fusion(const Pipeline& a) {
  const auto fused = fuse(a.stack, 2, ImagePart::kReal);
  const double scale = a.stack.images.real().cwiseAbs().maxCoeff();
  const bool zero = fused.values.cwiseAbs().maxCoeff() <= 1e-12 * scale;
  double seg = 0.0, disk = INFINITY;
  if (!zero) {
    seg = roi_contrast(fused.values, segment_roi(a), a.background);
    for (const auto& d : a.phantom.disks) {
      disk = std::min(disk, roi_contrast(fused.values, roi_disk(a.mesh.pixels, d), a.background));
    }
  } else {
    disk = 0.0;
  }
  const Eigen::MatrixXd X = center_stack(a.stack, ImagePart::kReal);
  const auto d = decompose(X);
  Eigen::MatrixXd back = Eigen::MatrixXd::Zero(X.rows(), X.cols());
  for (int i = 0; i < d.singular_values.size(); ++i) {
    back += d.singular_values(i) * d.left.col(i) * d.right.col(i).transpose();
  }
  const double round_trip = (back - X).norm() / X.norm();
  const auto full = fuse(a.stack, d.rank, ImagePart::kReal);
  const double full_max = full.values.cwiseAbs().maxCoeff() / scale;
  const bool pass = seg >= 2.0 && disk >= 2.0 && round_trip <= 1e-10 && full_max <= 1e-10;
  return {pass, "fused max|v| " + fmt(fused.values.cwiseAbs().maxCoeff()) + ", segment contrast " + fmt(seg) +
                    ", min disk contrast " + fmt(disk) + " (tol 2); SVD round trip " + fmt(round_trip) +
                    " (tol 1e-10); full-rank fused " + fmt(full_max) + " (tol 1e-10)"};
}

// 11. Homogeneity of the expansion coefficients.
Outcome coefficient_scaling() {
  const Frequency f = Frequency::from_hz(2.5e5);
  auto build = [](double delta, double radius) {
    PhantomSpec s;
    s.insulators.push_back({{-0.5, -0.3}, {0.3, -0.5}, delta});
    s.disks.push_back({{0.2, 0.4}, radius});
    return build_phantom(s);
  };
  double worst = 0.0;
  for (double k : {2.0, 3.0, 0.5}) {
    const auto c1 = expansion_coefficients(build(1e-3, 0.05), f, {0.6, 0.8});
    const auto ck = expansion_coefficients(build(k * 1e-3, k * 0.05), f, {0.6, 0.8});
    auto rel = [](Complex x, Complex y) { return std::abs(x - y) / std::abs(x); };
    worst = std::max({worst, rel(ck.c_re[0], k * c1.c_re[0]), rel(ck.c_im[0], k * c1.c_im[0]),
                      rel(ck.d_re[0], k * k * c1.d_re[0]), rel(ck.d_im[0], k * k * c1.d_im[0])});
  }
  return {worst <= 1e-12, "max rel deviation " + fmt(worst) + " (tol 1e-12)"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mfeit acceptance criteria"};
  std::vector<int> expected;
  app.add_option("--expected-failures", expected, "criteria known to be unattainable")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  struct Criterion {
    int id;
    const char* name;
    std::function<Outcome()> run;
  };
  std::unique_ptr<Pipeline> mixed, enclosed;
  auto pipelines = [&] {
    if (!mixed) mixed = std::make_unique<Pipeline>(run_pipeline("mixed_phantom.json"));
    if (!enclosed) enclosed = std::make_unique<Pipeline>(run_pipeline("enclosed_disk_phantom.json"));
  };
  const std::vector<Criterion> criteria = {
      {1, "jump-condition convergence", jump_convergence},
      {2, "model equivalence", model_equivalence},
      {3, "polarization tensor", polarization},
      {4, "disk boundary operator", boundary_operator_check},
      {5, "asymptotic agreement", asymptotic_agreement},
      {6, "residue round trip", residue_round_trip},
      {7, "end-to-end detection", end_to_end_detection},
      {8, "reciprocity and conservation", reciprocity},
      {9, "spectroscopic visibility", [&] { pipelines(); return visibility(*mixed, *enclosed); }},
      {10, "PCA fusion", [&] { pipelines(); return fusion(*mixed); }},
      {11, "coefficient scaling", coefficient_scaling},
  };

  std::set<int> failed;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << c.id << ". " << c.name << ": " << o.detail << " ["
              << fmt(secs) << " s]" << std::endl;
    if (!o.pass) failed.insert(c.id);
  }

  const std::set<int> allowed(expected.begin(), expected.end());
  int unexpected = 0;
  for (int id : failed) unexpected += !allowed.count(id);
  std::cout << failed.size() << " of " << criteria.size() << " criteria failing";
  if (!allowed.empty()) std::cout << ", " << unexpected << " not in the expected-failure list";
  std::cout << std::endl;
  return unexpected ? 1 : 0;
}
