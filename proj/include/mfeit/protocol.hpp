#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfeit/forward.hpp"

namespace mfeit {

struct ElectrodeLayout {
  int n_electrodes = 16;
  std::vector<double> centers;  // angles, electrode e at 2 pi e / N_E
  double width = 0.0;           // angular width of each electrode arc

  /// Equally spaced electrodes covering the given fraction of the boundary.
  static ElectrodeLayout equally_spaced(int n_electrodes, double coverage = 0.5);
};

struct BoundaryDataset {
  Frequency omega{};
  int n_electrodes = 0;
  Eigen::MatrixXcd V;   // V(k, j) = V^{j,k}, zero-based injection k, measurement j
  Eigen::MatrixXi mask; // 1 where the entry is excluded downstream
  double amplitude = 1.0;
  std::string pattern = "adjacent";
};

/// Pair injection between electrodes k and k+1 (1-based, cyclic), unit total
/// current in and out.
NeumannCurrent make_injection(const Mesh& mesh, const ElectrodeLayout& layout, int k);

/// Unit-current indicator density of electrode e (1-based).
std::vector<Complex> electrode_density(const Mesh& mesh, const ElectrodeLayout& layout, int e);

/// Energy bilinear form V(k, j) = int gamma grad u_k . grad u_j for all pairs
/// of fields from one factored problem. The element loop runs in parallel when
/// `parallel` is set; both paths sum in the same per-element order.
Eigen::MatrixXcd energy_form(const ForwardProblem& problem, const Mesh& mesh,
                             const std::vector<PotentialField>& fields, bool parallel = true);

struct SweepOptions {
  Medium medium = Medium::kPhantom;
  bool parallel = true;
};

std::vector<BoundaryDataset> simulate_sweep(const Phantom& phantom, const Mesh& mesh,
                                            const ElectrodeLayout& layout,
                                            const std::vector<Frequency>& frequencies,
                                            const SweepOptions& options = {});

/// Flags V^{k-1,k}, V^{k,k}, V^{k,k+1} of every injection k.
BoundaryDataset mask_adjacent(const BoundaryDataset& dataset);

/// Adds complex Gaussian noise with total power mean|V|^2 / 10^(snr_db/10).
/// An infinite snr_db returns the input unchanged.
BoundaryDataset add_noise(const BoundaryDataset& dataset, double snr_db, std::uint64_t seed);

struct SweepConfig {
  std::vector<double> frequencies_hz;
  double snr_db = 0.0;  // <= 0 or infinite means noiseless
  std::uint64_t seed = 0;
  int n_electrodes = 16;
};

SweepConfig sweep_config_from_json(const nlohmann::json& j);

void write_dataset_csv(const std::string& path, const std::vector<BoundaryDataset>& datasets);
std::vector<BoundaryDataset> read_dataset_csv(const std::string& path);

}  // namespace mfeit
