#pragma once

#include <Eigen/Dense>
#include <cstdint>

namespace rankformer {

// Embeddings are stored row-major: one contiguous row per user/item, users
// first (rows 0..n-1), then items (rows n..n+m-1).
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using Index = std::int64_t;

}  // namespace rankformer
