#include "dg/fid.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "dg/error.hpp"

namespace dg {
namespace {

constexpr double kCovarianceFloor = 1e-6;
constexpr std::size_t kPixelGrid = 8;
constexpr std::size_t kEmbedBatch = 256;

double nuclear_norm(const Eigen::MatrixXd& m) {
  return Eigen::JacobiSVD<Eigen::MatrixXd>(m).singularValues().sum();
}

// Tr sqrt(S1 C2 S1) is the sum of singular values of S1 S2, which stays
// accurate when covariances are ill-conditioned. Both factor orders are
// averaged so the result is bit-symmetric in (a, b).
double summed_distance(const GaussianSummary& a, const GaussianSummary& b) {
  const Eigen::MatrixXd s1 = psd_sqrt(a.cov), s2 = psd_sqrt(b.cov);
  const double cross = 0.5 * (nuclear_norm(s1 * s2) + nuclear_norm(s2 * s1));
  const double d2 = (a.mean - b.mean).squaredNorm() + (a.cov.trace() + b.cov.trace()) - 2.0 * cross;
  return std::sqrt(std::max(d2, 0.0));
}

GaussianSummary regularized(GaussianSummary s) {
  s.cov.diagonal().array() += kCovarianceFloor;
  return s;
}

}  // namespace

GaussianSummary gaussian_summary(const Eigen::MatrixXd& embeddings) {
  const auto n = static_cast<std::size_t>(embeddings.rows());
  if (n < 2) throw ContractError("gaussian_summary needs at least 2 samples, got " + std::to_string(n));
  GaussianSummary s;
  s.n = n;
  s.mean = embeddings.colwise().mean().transpose();
  const Eigen::MatrixXd centered = embeddings.rowwise() - s.mean.transpose();
  const Eigen::MatrixXd c = centered.transpose() * centered / static_cast<double>(n - 1);
  s.cov = 0.5 * (c + c.transpose());
  return s;
}

Eigen::MatrixXd psd_sqrt(const Eigen::MatrixXd& c, double tolerance) {
  if (c.rows() != c.cols()) throw DimensionError("psd_sqrt needs a square matrix");
  const double scale = std::max(1.0, c.cwiseAbs().maxCoeff());
  if ((c - c.transpose()).cwiseAbs().maxCoeff() > tolerance * scale) {
    throw ContractError("psd_sqrt input is not symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(c);
  if (eig.info() != Eigen::Success) throw ContractError("eigendecomposition failed");
  const Eigen::VectorXd roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Eigen::MatrixXd& v = eig.eigenvectors();
  Eigen::MatrixXd s = v * roots.asDiagonal() * v.transpose();
  return 0.5 * (s + s.transpose());
}

double frechet_distance(const GaussianSummary& a, const GaussianSummary& b) {
  if (a.mean.size() != b.mean.size() || a.cov.rows() != b.cov.rows()) {
    throw DimensionError("frechet_distance: dimensions " + std::to_string(a.mean.size()) + " and " +
                         std::to_string(b.mean.size()) + " differ");
  }
  return summed_distance(a, b);
}

Embedder pixel_embedder() {
  return [](const Tensor& batch) {
    const std::size_t B = batch.dim(0), H = batch.dim(2), W = batch.dim(3);
    const std::size_t plane = H * W;
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(B), kPixelGrid * kPixelGrid);
    const auto px = batch.data();
    for (std::size_t b = 0; b < B; ++b) {
      const double* img = px.data() + b * 3 * plane;
      for (std::size_t gy = 0; gy < kPixelGrid; ++gy) {
        const std::size_t y0 = gy * H / kPixelGrid, y1 = (gy + 1) * H / kPixelGrid;
        for (std::size_t gx = 0; gx < kPixelGrid; ++gx) {
          const std::size_t x0 = gx * W / kPixelGrid, x1 = (gx + 1) * W / kPixelGrid;
          double acc = 0.0;
          for (std::size_t y = y0; y < y1; ++y) {
            for (std::size_t x = x0; x < x1; ++x) {
              const std::size_t p = y * W + x;
              acc += 0.299 * img[p] + 0.587 * img[plane + p] + 0.114 * img[2 * plane + p];
            }
          }
          const double area = static_cast<double>((y1 - y0) * (x1 - x0));
          out(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(gy * kPixelGrid + gx)) = acc / area;
        }
      }
    }
    return out;
  };
}

Embedder trunk_embedder(const TwoBranchParams& params) {
  return [params](const Tensor& batch) {
    const Tensor g = extract_features(params, batch);
    Eigen::MatrixXd out(static_cast<Eigen::Index>(g.dim(0)), static_cast<Eigen::Index>(g.dim(1)));
    for (std::size_t r = 0; r < g.dim(0); ++r) {
      for (std::size_t c = 0; c < g.dim(1); ++c) {
        out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = g.data()[r * g.dim(1) + c];
      }
    }
    return out;
  };
}

Eigen::MatrixXd embed(const DatasetBundle& bundle, std::span<const std::size_t> indices, const Embedder& embedder) {
  Eigen::MatrixXd out;
  for (std::size_t start = 0; start < indices.size(); start += kEmbedBatch) {
    const auto chunk = indices.subspan(start, std::min(kEmbedBatch, indices.size() - start));
    const Eigen::MatrixXd part = embedder(bundle.batch(chunk));
    if (start == 0) out.resize(static_cast<Eigen::Index>(indices.size()), part.cols());
    out.middleRows(static_cast<Eigen::Index>(start), part.rows()) = part;
  }
  return out;
}

double fid_between_splits(const DatasetBundle& bundle, std::span<const std::size_t> a,
                          std::span<const std::size_t> b, const Embedder& embedder) {
  if (a.size() < 2 || b.size() < 2) {
    throw ContractError("fid needs at least 2 samples per side, got " + std::to_string(a.size()) + " and " +
                        std::to_string(b.size()));
  }
  return frechet_distance(regularized(gaussian_summary(embed(bundle, a, embedder))),
                          regularized(gaussian_summary(embed(bundle, b, embedder))));
}

double fid_between_bundles(const DatasetBundle& a, const DatasetBundle& b, const Embedder& embedder) {
  std::vector<std::size_t> ia(a.size()), ib(b.size());
  std::iota(ia.begin(), ia.end(), std::size_t{0});
  std::iota(ib.begin(), ib.end(), std::size_t{0});
  if (ia.size() < 2 || ib.size() < 2) throw ContractError("fid needs at least 2 samples per bundle");
  return frechet_distance(regularized(gaussian_summary(embed(a, ia, embedder))),
                          regularized(gaussian_summary(embed(b, ib, embedder))));
}

}  // namespace dg
