#pragma once

#include <span>

#include <Eigen/Sparse>

namespace bhplab {

/// Rows and columns of `m` listed in `index` (ascending), in that order.
Eigen::SparseMatrix<double> principal_submatrix(const Eigen::SparseMatrix<double>& m, std::span<const int> index);

/// Rows in `rows`, columns in `cols`.
Eigen::SparseMatrix<double> submatrix(const Eigen::SparseMatrix<double>& m, std::span<const int> rows,
                                      std::span<const int> cols);

}  // namespace bhplab
