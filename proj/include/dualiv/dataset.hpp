#pragma once

#include <optional>

#include <Eigen/Dense>

#include "dualiv/kernels.hpp"

namespace dualiv {

/// Observational sample: treatment X (n x d_x), outcome y (n), instrument Z (n x d_z).
/// Latents hold unobserved draws a generator kept for diagnostics; estimators never read them.
struct Dataset {
  PointMatrix x;
  Eigen::VectorXd y;
  PointMatrix z;
  std::optional<PointMatrix> latents;

  Eigen::Index size() const { return y.size(); }

  // W = [y | Z], the points the dual function lives on.
  PointMatrix w() const;

  // Rows [begin, end) as a new dataset.
  Dataset slice(Eigen::Index begin, Eigen::Index end) const;
  Dataset permuted(const std::vector<Eigen::Index>& order) const;

  // Throws ArgumentError unless row counts agree, n >= 1 and every entry is finite.
  void validate() const;
};

}  // namespace dualiv
