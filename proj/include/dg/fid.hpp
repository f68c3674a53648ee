#pragma once

#include <cstddef>
#include <functional>
#include <span>

#include <Eigen/Dense>

#include "dg/dataset.hpp"
#include "dg/model.hpp"

namespace dg {

/// Mean and unbiased covariance of a point cloud.
struct GaussianSummary {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
  std::size_t n = 0;
};

/// Rows of `embeddings` are samples. Needs at least two rows.
GaussianSummary gaussian_summary(const Eigen::MatrixXd& embeddings);

/// Symmetric PSD square root; negative eigenvalues are clamped to 0.
/// Throws ContractError when `c` is asymmetric beyond `tolerance`.
Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& c, double tolerance = 1e-9);

double frechet_distance(const GaussianSummary& a, const GaussianSummary& b);

/// Maps a batch [B x 3 x H x W] to embeddings, one row per sample.
using Embedder = std::function<Eigen::MatrixXd(const Tensor& batch)>;

/// 8x8 area-averaged grayscale, flattened to 64 values.
Embedder pixel_embedder();
/// Trunk output g of a trained model.
Embedder trunk_embedder(const TwoBranchParams& params);

Eigen::MatrixXd embed(const DatasetBundle& bundle, std::span<const std::size_t> indices, const Embedder& embedder);

/// Frechet distance between the embeddings of two index sets, with 1e-6 * I
/// added to both covariances.
double fid_between_splits(const DatasetBundle& bundle, std::span<const std::size_t> a,
                          std::span<const std::size_t> b, const Embedder& embedder = pixel_embedder());

/// Same, across two bundles (every sample of each).
double fid_between_bundles(const DatasetBundle& a, const DatasetBundle& b, const Embedder& embedder = pixel_embedder());

}  // namespace dg
