#include "mfeit/fusion.hpp"

#include <cmath>

#include "mfeit/errors.hpp"

namespace mfeit {

namespace {

Eigen::MatrixXd part_of(const ImageStack& stack, ImagePart part) {
  return part == ImagePart::kReal ? Eigen::MatrixXd(stack.images.real())
                                  : Eigen::MatrixXd(stack.images.imag());
}

}  // namespace

Eigen::MatrixXd center_stack(const ImageStack& stack, ImagePart part) {
  if (stack.images.cols() < 2) {
    throw Error(ErrorCode::kTooFewFrequencies, "need at least two frequencies");
  }
  Eigen::MatrixXd X = part_of(stack, part);
  const Eigen::VectorXd mean = X.rowwise().mean();
  X.colwise() -= mean;
  return X;
}

PcaDecomposition decompose(const Eigen::MatrixXd& centered, const Eigen::VectorXd& mean_image) {
  if (!centered.allFinite()) throw Error(ErrorCode::kNumericalFailure, "non-finite image values");
  PcaDecomposition d;
  d.mean_image = mean_image.size() ? mean_image : Eigen::VectorXd::Zero(centered.rows());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
  if (svd.info() != Eigen::Success) throw Error(ErrorCode::kNumericalFailure, "SVD failed");
  d.singular_values = svd.singularValues();
  d.left = svd.matrixU();
  d.right = svd.matrixV();
  d.eigenvalues = d.singular_values.array().square() / static_cast<double>(centered.cols());
  const double smax = d.singular_values.size() ? d.singular_values(0) : 0.0;
  const double cut = 1e-12 * std::max(smax, 1e-300) * static_cast<double>(centered.rows());
  for (int i = 0; i < d.singular_values.size(); ++i) d.rank += d.singular_values(i) > cut;
  d.n_kept = d.rank;
  return d;
}

Eigen::VectorXd project(const Eigen::VectorXd& image, const PcaDecomposition& pca) {
  if (image.size() != pca.left.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "image size differs from decomposition");
  }
  return pca.left.leftCols(pca.n_kept).transpose() * (image - pca.mean_image);
}

FusedImage fuse(const ImageStack& stack, int n_components, ImagePart part, bool add_mean) {
  if (n_components < 1) throw Error(ErrorCode::kInvalidInput, "need at least one component");
  const Eigen::MatrixXd X = center_stack(stack, part);
  const Eigen::VectorXd mean = part_of(stack, part).rowwise().mean();
  FusedImage out;
  out.pca = decompose(X, mean);
  int n = n_components;
  if (n > out.pca.rank) {
    out.warning = "requested " + std::to_string(n) + " components, rank is " +
                  std::to_string(out.pca.rank) + "; truncated";
    n = out.pca.rank;
  }
  out.pca.n_kept = n;
  Eigen::MatrixXd tilde = Eigen::MatrixXd::Zero(X.rows(), X.cols());
  for (int i = 0; i < n; ++i) {
    const Eigen::VectorXd v = out.pca.right.col(i);
    tilde += (X * v) * v.transpose();
  }
  out.values = tilde.rowwise().mean();
  if (add_mean) out.values += mean;
  const double total = out.pca.eigenvalues.sum();
  out.energy_fraction = total > 0.0 ? out.pca.eigenvalues.head(n).sum() / total : 0.0;
  return out;
}

}  // namespace mfeit
