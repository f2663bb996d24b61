#include "vnn/separable_fit.hpp"

#include <Eigen/SVD>
#include <cmath>

namespace vnn {

SeparableKernel fit_separable(const ExactKernel& exact, std::size_t blocks, std::size_t m, std::size_t rank) {
  if (rank == 0) throw ConfigError("separable rank Q must be >= 1");
  if (exact.w2.size() != blocks * m * m) throw ShapeError("exact kernel does not match block layout");
  using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  SeparableKernel sep;
  sep.rank = rank;
  sep.a.assign(blocks * rank * m, 0.0);
  sep.b.assign(blocks * rank * m, 0.0);
  for (std::size_t blk = 0; blk < blocks; ++blk) {
    const Eigen::Map<const Matrix> w(exact.w2.data() + blk * m * m, m, m);
    const Eigen::JacobiSVD<Matrix> svd(w, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const auto& s = svd.singularValues();
    for (std::size_t q = 0; q < std::min(rank, m); ++q) {
      const double scale = std::sqrt(s(q));
      const std::size_t off = (blk * rank + q) * m;
      for (std::size_t i = 0; i < m; ++i) {
        sep.a[off + i] = scale * svd.matrixU()(i, q);
        sep.b[off + i] = scale * svd.matrixV()(i, q);
      }
    }
  }
  return sep;
}

VolterraLayer fit_separable(const VolterraLayer& layer, std::size_t rank) {
  const auto* exact = std::get_if<ExactKernel>(&layer.quad);
  if (!exact) throw ConfigError("fit_separable expects an exact layer");
  VolterraLayer out = layer;
  out.quad = fit_separable(*exact, layer.geometry.out_channels * layer.group_count(), layer.group_length(), rank);
  return out;
}

}  // namespace vnn
