#include "dualiv/dataset.hpp"

#include <string>

#include "dualiv/error.hpp"

namespace dualiv {

PointMatrix Dataset::w() const {
  PointMatrix out(y.size(), 1 + z.cols());
  out.col(0) = y;
  out.rightCols(z.cols()) = z;
  return out;
}

Dataset Dataset::slice(Eigen::Index begin, Eigen::Index end) const {
  if (begin < 0 || end > size() || begin > end) throw ArgumentError("dataset slice out of range");
  const Eigen::Index len = end - begin;
  Dataset out{x.middleRows(begin, len), y.segment(begin, len), z.middleRows(begin, len),
              std::nullopt};
  if (latents) out.latents = latents->middleRows(begin, len);
  return out;
}

Dataset Dataset::permuted(const std::vector<Eigen::Index>& order) const {
  if (static_cast<Eigen::Index>(order.size()) != size()) {
    throw ArgumentError("permutation length does not match dataset size");
  }
  Dataset out{PointMatrix(x.rows(), x.cols()), Eigen::VectorXd(y.size()),
              PointMatrix(z.rows(), z.cols()), std::nullopt};
  if (latents) out.latents = PointMatrix(latents->rows(), latents->cols());
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out.x.row(r) = x.row(order[i]);
    out.y(r) = y(order[i]);
    out.z.row(r) = z.row(order[i]);
    if (latents) out.latents->row(r) = latents->row(order[i]);
  }
  return out;
}

void Dataset::validate() const {
  const Eigen::Index n = y.size();
  if (n < 1) throw ArgumentError("dataset is empty");
  if (x.rows() != n || z.rows() != n) {
    throw ArgumentError("dataset row counts differ: x=" + std::to_string(x.rows()) +
                        " y=" + std::to_string(n) + " z=" + std::to_string(z.rows()));
  }
  if (latents && latents->rows() != n) throw ArgumentError("latent row count differs");
  if (!x.allFinite() || !y.allFinite() || !z.allFinite()) {
    throw ArgumentError("dataset contains non-finite entries");
  }
}

}  // namespace dualiv
