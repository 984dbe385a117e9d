#pragma once

#include <cstddef>
#include <type_traits>
#include <vector>

#include "clinchlab/model.hpp"

namespace clinchlab {

/// maximize c^T x subject to A x <= b, x >= 0, with b >= 0 so the origin
/// is a feasible starting vertex.
template <typename Scalar>
struct LinearProgram {
  Matrix<Scalar> A;
  Vector<Scalar> b;
  Vector<Scalar> c;

  Eigen::Index rows() const { return A.rows(); }
  Eigen::Index cols() const { return A.cols(); }
};

template <typename Scalar>
struct SimplexResult {
  Vector<Scalar> x;
  Scalar objective{0};
  std::size_t pivots = 0;
};

namespace detail {

template <typename Scalar>
bool positive(const Scalar& v) {
  if constexpr (std::is_floating_point_v<Scalar>) return v > Scalar(1e-11);
  else return v > 0;
}

template <typename Scalar>
bool nonzero(const Scalar& v) {
  if constexpr (std::is_floating_point_v<Scalar>) return v > Scalar(1e-14) || v < Scalar(-1e-14);
  else return v != 0;
}

}  // namespace detail

/// Dense tableau simplex with Bland's rule. Pivots touch only the nonzero
/// entries of the pivot row and column. Throws SolverStall past
/// `max_pivots` (default 50 (rows + cols) + 1000) and NumericalFailure on an
/// unbounded program.
template <typename Scalar>
SimplexResult<Scalar> solve_simplex(const LinearProgram<Scalar>& lp, std::size_t max_pivots = 0) {
  using detail::nonzero;
  using detail::positive;
  const Eigen::Index m = lp.rows(), n = lp.cols();
  if (lp.b.size() != m || lp.c.size() != n) throw Error(ErrorCode::ValidationError, "LP dimensions disagree");
  for (Eigen::Index r = 0; r < m; ++r)
    if (lp.b[r] < Scalar(0)) throw Error(ErrorCode::ValidationError, "LP right-hand side must be nonnegative");
  if (max_pivots == 0) max_pivots = 50 * static_cast<std::size_t>(m + n) + 1000;

  // Columns 0..n-1 structural, n..n+m-1 slack, n+m right-hand side.
  // Row m holds the reduced costs c_j - z_j and -objective.
  const Eigen::Index width = n + m + 1;
  Matrix<Scalar> T = Matrix<Scalar>::Zero(m + 1, width);
  T.topLeftCorner(m, n) = lp.A;
  for (Eigen::Index r = 0; r < m; ++r) {
    T(r, n + r) = Scalar(1);
    T(r, n + m) = lp.b[r];
  }
  for (Eigen::Index j = 0; j < n; ++j) T(m, j) = lp.c[j];
  std::vector<Eigen::Index> basis(static_cast<std::size_t>(m));
  for (Eigen::Index r = 0; r < m; ++r) basis[static_cast<std::size_t>(r)] = n + r;

  SimplexResult<Scalar> result;
  std::vector<Eigen::Index> row_support, col_support;
  while (true) {
    Eigen::Index enter = -1;
    for (Eigen::Index j = 0; j < n + m; ++j)
      if (positive(T(m, j))) {
        enter = j;
        break;
      }
    if (enter < 0) break;

    Eigen::Index leave = -1;
    Scalar best_ratio{0};
    for (Eigen::Index r = 0; r < m; ++r) {
      if (!positive(T(r, enter))) continue;
      const Scalar ratio = T(r, n + m) / T(r, enter);
      if (leave < 0 || ratio < best_ratio ||
          (ratio == best_ratio && basis[static_cast<std::size_t>(r)] < basis[static_cast<std::size_t>(leave)])) {
        leave = r;
        best_ratio = ratio;
      }
    }
    if (leave < 0) throw Error(ErrorCode::NumericalFailure, "linear program is unbounded");
    if (++result.pivots > max_pivots) throw Error(ErrorCode::SolverStall, "simplex exceeded its pivot budget");

    const Scalar pivot = T(leave, enter);
    col_support.clear();
    for (Eigen::Index j = 0; j < width; ++j) {
      if (!nonzero(T(leave, j))) {
        T(leave, j) = Scalar(0);
        continue;
      }
      T(leave, j) /= pivot;
      col_support.push_back(j);
    }
    T(leave, enter) = Scalar(1);
    row_support.clear();
    for (Eigen::Index r = 0; r <= m; ++r)
      if (r != leave && nonzero(T(r, enter))) row_support.push_back(r);
    for (const Eigen::Index r : row_support) {
      const Scalar factor = T(r, enter);
      for (const Eigen::Index j : col_support) T(r, j) -= factor * T(leave, j);
      T(r, enter) = Scalar(0);
    }
    basis[static_cast<std::size_t>(leave)] = enter;
  }

  result.x = Vector<Scalar>::Zero(n);
  for (Eigen::Index r = 0; r < m; ++r) {
    const Eigen::Index var = basis[static_cast<std::size_t>(r)];
    if (var < n) result.x[var] = T(r, n + m);
  }
  result.objective = Scalar(0) - T(m, n + m);
  return result;
}

}  // namespace clinchlab
