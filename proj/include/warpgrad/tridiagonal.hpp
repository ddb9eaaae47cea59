#pragma once

#include <span>
#include <vector>

namespace warpgrad {

/// LU factorization of a tridiagonal matrix without pivoting (Thomas algorithm).
///
/// `lower[i]` couples row i+1 to column i, `upper[i]` couples row i to column
/// i+1; both have length n-1. The factorization is kept so repeated solves
/// against the same matrix cost O(n) each.
class TridiagonalLU {
 public:
  TridiagonalLU() = default;
  TridiagonalLU(std::span<const double> lower, std::span<const double> diag,
                std::span<const double> upper);

  std::size_t size() const { return pivots_.size(); }

  /// Smallest |pivot| encountered during elimination.
  double min_abs_pivot() const { return min_abs_pivot_; }

  /// Solves A x = rhs in place.
  void solve_in_place(std::span<double> rhs) const;

  /// Solves A^T x = rhs in place.
  void solve_transpose_in_place(std::span<double> rhs) const;

  std::vector<double> solve(std::span<const double> rhs) const;

 private:
  std::vector<double> upper_;
  std::vector<double> pivots_;       // diagonal of U
  std::vector<double> multipliers_;  // sub-diagonal of L
  double min_abs_pivot_ = 0.0;
};

}  // namespace warpgrad
