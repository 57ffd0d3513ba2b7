#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace mgame {

// Labeled probability-mass (or general) matrix, immutable after construction.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> entries;  // row-major
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;

  Matrix() = default;
  Matrix(int r, int c)
      : rows(r), cols(c), entries(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return entries[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const {
    return entries[static_cast<std::size_t>(r) * cols + c];
  }

  double sum() const {
    double s = 0.0;
    for (double v : entries) s += v;
    return s;
  }

  Eigen::MatrixXd eigen() const {
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
      for (int c = 0; c < cols; ++c) m(r, c) = at(r, c);
    return m;
  }

  static Matrix from_eigen(const Eigen::MatrixXd& m) {
    Matrix out(static_cast<int>(m.rows()), static_cast<int>(m.cols()));
    for (int r = 0; r < out.rows; ++r)
      for (int c = 0; c < out.cols; ++c) out.at(r, c) = m(r, c);
    return out;
  }
};

inline std::vector<double> singular_values(const Matrix& m) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m.eigen());
  const auto& sv = svd.singularValues();
  return std::vector<double>(sv.data(), sv.data() + sv.size());
}

// Count of singular values with sigma_k / sigma_1 > rel_tol; all-zero matrix
// has rank 0.
inline int numeric_rank(const Matrix& m, double rel_tol = 1e-8) {
  auto sv = singular_values(m);
  if (sv.empty() || sv[0] <= 0.0) return 0;
  int r = 0;
  for (double s : sv)
    if (s / sv[0] > rel_tol) ++r;
  return r;
}

// Sum rows/columns by group; groups must partition the index ranges.
inline Matrix coarsen(const Matrix& m, const std::vector<std::vector<int>>& row_groups,
                      const std::vector<std::vector<int>>& col_groups) {
  std::vector<int> rseen(m.rows, 0), cseen(m.cols, 0);
  for (const auto& g : row_groups)
    for (int r : g) {
      if (r < 0 || r >= m.rows || rseen[r]++)
        throw std::invalid_argument("coarsen: invalid row partition");
    }
  for (const auto& g : col_groups)
    for (int c : g) {
      if (c < 0 || c >= m.cols || cseen[c]++)
        throw std::invalid_argument("coarsen: invalid column partition");
    }
  for (int v : rseen)
    if (!v) throw std::invalid_argument("coarsen: row partition incomplete");
  for (int v : cseen)
    if (!v) throw std::invalid_argument("coarsen: column partition incomplete");

  Matrix out(static_cast<int>(row_groups.size()), static_cast<int>(col_groups.size()));
  for (std::size_t gr = 0; gr < row_groups.size(); ++gr)
    for (std::size_t gc = 0; gc < col_groups.size(); ++gc) {
      double s = 0.0;
      for (int r : row_groups[gr])
        for (int c : col_groups[gc]) s += m.at(r, c);
      out.at(static_cast<int>(gr), static_cast<int>(gc)) = s;
    }
  return out;
}

// Contiguous blocks of equal size, e.g. 36 indices -> 9 groups of 4.
inline std::vector<std::vector<int>> block_groups(int n, int block) {
  if (block <= 0 || n % block != 0)
    throw std::invalid_argument("block_groups: block must divide n");
  std::vector<std::vector<int>> groups;
  for (int start = 0; start < n; start += block) {
    std::vector<int> g;
    for (int k = 0; k < block; ++k) g.push_back(start + k);
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace mgame
