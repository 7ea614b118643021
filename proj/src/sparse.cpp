#include "bhplab/sparse.hpp"

#include <vector>

namespace bhplab {

Eigen::SparseMatrix<double> submatrix(const Eigen::SparseMatrix<double>& m, std::span<const int> rows,
                                      std::span<const int> cols) {
  std::vector<int> local(m.rows(), -1);
  for (int k = 0; k < static_cast<int>(rows.size()); ++k) local[rows[k]] = k;
  std::vector<Eigen::Triplet<double>> t;
  for (int c = 0; c < static_cast<int>(cols.size()); ++c) {
    for (Eigen::SparseMatrix<double>::InnerIterator it(m, cols[c]); it; ++it) {
      if (const int r = local[it.row()]; r >= 0) t.emplace_back(r, c, it.value());
    }
  }
  Eigen::SparseMatrix<double> out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  out.setFromTriplets(t.begin(), t.end());
  return out;
}

Eigen::SparseMatrix<double> principal_submatrix(const Eigen::SparseMatrix<double>& m, std::span<const int> index) {
  return submatrix(m, index, index);
}

}  // namespace bhplab
