// Serial vs OpenMP timings of the parallel kernels, with a check that both
// paths agree.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>

#include <omp.h>

#include "CLI11.hpp"
#include "mfeit/asymptotics.hpp"
#include "mfeit/reconstruct.hpp"

using namespace mfeit;

namespace {

double best_of(int reps, const std::function<void()>& f) {
  double best = INFINITY;
  for (int r = 0; r < reps; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    f();
    best = std::min(best, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
  }
  return best;
}

void report(const char* name, double serial, double parallel, double diff) {
  std::printf("%-30s %10.4f %10.4f %8.2fx   max diff %.2e\n", name, serial, parallel, serial / parallel, diff);
}

double max_diff(const std::vector<Complex>& a, const std::vector<Complex>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"serial vs parallel kernel timings"};
  double h = 0.025;
  int reps = 3;
  app.add_option("--mesh-h", h, "mesh size");
  app.add_option("--reps", reps, "repetitions, best time reported");
  CLI11_PARSE(app, argc, argv);

  const Phantom ph = build_phantom(load_phantom_spec(std::string(MFEIT_SOURCE_DIR) + "/configs/mixed_phantom.json"));
  const Mesh mesh = mesh_domain(ph, h);
  const auto layout = ElectrodeLayout::equally_spaced(16);
  const Frequency f = Frequency::from_hz(5e5);
  std::printf("threads %d, nodes %zu, triangles %zu\n", omp_get_max_threads(), mesh.nodes.size(),
              mesh.triangles.size());
  std::printf("%-30s %10s %10s %9s\n", "kernel", "serial s", "omp s", "speedup");

  const ForwardProblem problem(mesh, ph, f, Medium::kPhantom);
  std::vector<NeumannCurrent> gs;
  for (int k = 1; k <= 16; ++k) gs.push_back(make_injection(mesh, layout, k));
  for (int k = 0; k < 48; ++k) gs.push_back(uniform_field_current(mesh, {std::cos(0.1 * k), std::sin(0.1 * k)}));
  {
    std::vector<PotentialField> a, b;
    const double ts = best_of(reps, [&] { a = problem.solve(gs, false); });
    const double tp = best_of(reps, [&] { b = problem.solve(gs, true); });
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, max_diff(a[k].u, b[k].u));
    report("block solve (64 rhs)", ts, tp, d);
  }
  {
    const auto fields = problem.solve(std::vector<NeumannCurrent>(gs.begin(), gs.begin() + 16));
    Eigen::MatrixXcd a, b;
    const double ts = best_of(reps, [&] { a = energy_form(problem, mesh, fields, false); });
    const double tp = best_of(reps, [&] { b = energy_form(problem, mesh, fields, true); });
    report("energy_form", ts, tp, (a - b).cwiseAbs().maxCoeff());
  }
  {
    const Mesh bare = mesh_domain(build_phantom(PhantomSpec{}), h);
    BoundaryDataset d;
    d.n_electrodes = 16;
    d.V = Eigen::MatrixXcd::Zero(16, 16);
    d.mask = Eigen::MatrixXi::Zero(16, 16);
    const auto mask = mask_adjacent(d).mask;
    SensitivityMatrix a, b;
    const double ts = best_of(reps, [&] { a = build_sensitivity(bare, layout, ph.materials, mask, false); });
    const double tp = best_of(reps, [&] { b = build_sensitivity(bare, layout, ph.materials, mask, true); });
    report("build_sensitivity", ts, tp, (a.J - b.J).cwiseAbs().maxCoeff());
  }
  {
    const int n = 2048;
    const auto curve = BoundaryCurve::circle({0.0, 0.0}, 1.0, n);
    std::vector<Complex> phi(n);
    for (int k = 0; k < n; ++k) phi[k] = std::polar(1.0, 3.0 * 2.0 * M_PI * k / n);
    std::vector<Complex> a, b;
    const double ts = best_of(reps, [&] { a = boundary_operator_quadrature(curve, phi, SignConvention::kPlus, false); });
    const double tp = best_of(reps, [&] { b = boundary_operator_quadrature(curve, phi, SignConvention::kPlus, true); });
    report("boundary_operator_quadrature", ts, tp, max_diff(a, b));
  }
  {
    std::vector<Vec2> pts;
    const int n = 200000;
    for (int k = 0; k < n; ++k) {
      const double t = 2.0 * M_PI * k / n;
      pts.push_back(Vec2(std::cos(t), std::sin(t)));
    }
    std::vector<Complex> a, b;
    const double ts = best_of(reps, [&] { a = high_freq_prediction(ph, f, {0.6, 0.8}, pts, false); });
    const double tp = best_of(reps, [&] { b = high_freq_prediction(ph, f, {0.6, 0.8}, pts, true); });
    report("high_freq_prediction", ts, tp, max_diff(a, b));
  }
  return 0;
}
