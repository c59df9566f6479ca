#pragma once

#include <cmath>
#include <memory>
#include <string>

#include <Eigen/Eigenvalues>

#include "c2p/encoder/tape.hpp"
#include "c2p/error.hpp"

namespace c2p::analysis {

/// N x D -> N x 2 for plotting.
class Projection2D {
 public:
  virtual ~Projection2D() = default;
  virtual nn::Matrix project(const nn::Matrix& x, std::uint64_t seed) const = 0;
  virtual std::string name() const = 0;
};

/// Projection onto the two leading principal axes of the centered data. Each
/// axis is signed so its largest-magnitude loading is positive, which makes
/// the output a deterministic function of the input.
class PcaProjection final : public Projection2D {
 public:
  nn::Matrix project(const nn::Matrix& x, std::uint64_t) const override {
    require(x.rows() >= 2, ErrorKind::InvalidInput, "projection needs at least two points");
    require(x.cols() >= 1, ErrorKind::InvalidInput, "projection needs at least one feature");
    const nn::RowVector mean = x.colwise().mean();
    const nn::Matrix centered = x.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(x.rows());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    require(eig.info() == Eigen::Success, ErrorKind::NumericalError, "eigendecomposition failed");
    const Eigen::Index d = cov.rows();
    Eigen::MatrixXd axes = Eigen::MatrixXd::Zero(d, 2);
    for (int a = 0; a < 2 && a < d; ++a) {
      Eigen::VectorXd v = eig.eigenvectors().col(d - 1 - a);  // ascending order
      Eigen::Index arg;
      v.cwiseAbs().maxCoeff(&arg);
      if (v(arg) < 0) v = -v;
      axes.col(a) = v;
    }
    return centered * axes;
  }

  std::string name() const override { return "pca"; }
};

inline std::unique_ptr<Projection2D> make_projection(const std::string& name) {
  if (name == "pca") return std::make_unique<PcaProjection>();
  fail(ErrorKind::Unsupported, "projection '" + name + "' is not built in; pca is available");
}

inline nn::Matrix project_2d(const nn::Matrix& x, const Projection2D& method, std::uint64_t seed) {
  return method.project(x, seed);
}

}  // namespace c2p::analysis
