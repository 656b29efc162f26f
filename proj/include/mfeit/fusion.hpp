#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mfeit/reconstruct.hpp"

namespace mfeit {

enum class ImagePart { kReal, kImag };

struct PcaDecomposition {
  Eigen::VectorXd mean_image;
  Eigen::VectorXd eigenvalues;      // of the covariance, descending
  Eigen::VectorXd singular_values;  // of the centred matrix
  Eigen::MatrixXd left;             // orthonormal u_i as columns
  Eigen::MatrixXd right;            // orthonormal v_i as columns
  int rank = 0;                     // nonzero singular values
  int n_kept = 0;
};

/// Columns minus the across-frequency mean image. Throws TooFewFrequencies
/// for fewer than two columns.
Eigen::MatrixXd center_stack(const ImageStack& stack, ImagePart part);

/// Thin SVD of the centred matrix; covariance eigenvalues are s_i^2 / N_w.
PcaDecomposition decompose(const Eigen::MatrixXd& centered,
                           const Eigen::VectorXd& mean_image = Eigen::VectorXd());

/// p_i = u_i^T (image - mean_image) for the kept components.
Eigen::VectorXd project(const Eigen::VectorXd& image, const PcaDecomposition& pca);

struct FusedImage {
  Eigen::VectorXd values;
  PcaDecomposition pca;
  double energy_fraction = 0.0;  // kept eigenvalues over their total
  std::string warning;
};

/// Row mean of sum_{i <= N} (X v_i) v_i^T for the centred matrix X of one
/// part. Because X 1 = 0 the result vanishes for every N up to the rank; the
/// mean image is added back when add_mean is set. A component count above
/// the rank is truncated with a warning.
FusedImage fuse(const ImageStack& stack, int n_components, ImagePart part,
                bool add_mean = false);

}  // namespace mfeit
