#pragma once

#include <array>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfeit/protocol.hpp"

namespace mfeit {

/// Linearized map from pixel admittivity changes to changes of V, for unit
/// background admittivity. Row r is the measurement pair rows[r] = (k, j),
/// zero-based, in injection-major order over unmasked entries.
struct SensitivityMatrix {
  Eigen::MatrixXcd J;  // -int_pixel grad u_k . grad u_j, gamma = 1 fields
  std::vector<std::array<int, 2>> rows;
  Pixelation pixels;   // columns follow pixels.active
  MaterialSpec materials;

  /// Sensitivity for fields in the background admittivity at omega, J / gamma_b^2.
  Eigen::MatrixXcd at(Frequency omega) const;
};

/// J from homogeneous reference solves, one row per unmasked (k, j). Pixel
/// columns are assembled in parallel when requested.
SensitivityMatrix build_sensitivity(const Mesh& mesh, const ElectrodeLayout& layout,
                                    const MaterialSpec& materials, const Eigen::MatrixXi& mask,
                                    bool parallel = true);

struct Regularization {
  /// Tikhonov weight; negative selects the default 1e-4 ||J||_2^2, or the
  /// discrepancy principle when noise_std > 0.
  double alpha = -1.0;
  /// Standard deviation of the complex noise per entry of V, if known.
  double noise_std = 0.0;
};

struct ImageStack {
  Eigen::MatrixXcd images;  // active pixels x frequencies
  std::vector<Frequency> frequencies;
  Pixelation pixels;
};

/// argmin ||A x - (V - V_ref)||^2 + alpha ||x||^2 over unmasked entries,
/// A = J / gamma_b^2. Throws SingularSystem for alpha = 0 on a singular system.
Eigen::VectorXcd reconstruct_frequency(const BoundaryDataset& dataset,
                                       const BoundaryDataset& reference,
                                       const SensitivityMatrix& J,
                                       const Regularization& reg = {});

ImageStack reconstruct_sweep(const std::vector<BoundaryDataset>& datasets,
                             const std::vector<BoundaryDataset>& references,
                             const SensitivityMatrix& J, const Regularization& reg = {});

/// CSV rows pixel_id,x_center,y_center,omega,re_dgamma,im_dgamma.
void write_image_csv(const std::string& path, const ImageStack& stack);
ImageStack read_image_csv(const std::string& path, int pixels_per_side, double domain_radius);

/// 8-bit binary PGM of one image on the full pixel grid. Values are scaled
/// by max |value| to [-1, 1] and mapped to 1..255; pixels outside the domain
/// are 0.
void write_pgm(const std::string& path, const Pixelation& pixels,
               const Eigen::VectorXd& values);

/// Active-pixel indices (into pixels.active) whose centres lie in the disk.
std::vector<int> roi_disk(const Pixelation& pixels, const ConductiveDisk& disk);
/// Active-pixel indices whose centres lie within margin of the segment.
std::vector<int> roi_segment(const Pixelation& pixels, const ThinInsulator& seg, double margin);
/// Active pixels at least margin away from every inclusion.
std::vector<int> roi_background(const Pixelation& pixels, const Phantom& phantom, double margin);

/// mean |v| over the ROI divided by the standard deviation of v over the
/// background.
double roi_contrast(const Eigen::VectorXd& values, const std::vector<int>& roi,
                    const std::vector<int>& background);

}  // namespace mfeit
