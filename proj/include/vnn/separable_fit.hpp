#pragma once

#include "vnn/layer.hpp"

namespace vnn {

// Best rank-Q approximation (truncated SVD) of every quadratic block,
// returned as separable factors a_q = sqrt(s_q) u_q, b_q = sqrt(s_q) v_q.
// Ranks beyond the block size are padded with zero factors.
SeparableKernel fit_separable(const ExactKernel& exact, std::size_t blocks, std::size_t group_length,
                              std::size_t rank);
VolterraLayer fit_separable(const VolterraLayer& exact_layer, std::size_t rank);

}  // namespace vnn
