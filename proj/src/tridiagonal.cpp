#include "warpgrad/tridiagonal.hpp"

#include <cmath>
#include <limits>

#include "warpgrad/errors.hpp"

namespace warpgrad {

TridiagonalLU::TridiagonalLU(std::span<const double> lower, std::span<const double> diag,
                             std::span<const double> upper)
    : upper_(upper.begin(), upper.end()) {
  const std::size_t n = diag.size();
  if (n == 0) throw ValidationError("tridiagonal system must be nonempty");
  if (lower.size() + 1 != n || upper.size() + 1 != n) {
    throw ValidationError("tridiagonal band lengths must be n-1");
  }
  pivots_.resize(n);
  multipliers_.assign(n - 1, 0.0);
  pivots_[0] = diag[0];
  min_abs_pivot_ = std::abs(pivots_[0]);
  for (std::size_t i = 1; i < n; ++i) {
    const double l = pivots_[i - 1] != 0.0 ? lower[i - 1] / pivots_[i - 1]
                                           : std::numeric_limits<double>::infinity();
    multipliers_[i - 1] = l;
    pivots_[i] = diag[i] - l * upper[i - 1];
    min_abs_pivot_ = std::min(min_abs_pivot_, std::abs(pivots_[i]));
  }
}

void TridiagonalLU::solve_in_place(std::span<double> rhs) const {
  const std::size_t n = pivots_.size();
  if (rhs.size() != n) throw ValidationError("tridiagonal rhs size mismatch");
  for (std::size_t i = 1; i < n; ++i) rhs[i] -= multipliers_[i - 1] * rhs[i - 1];
  rhs[n - 1] /= pivots_[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) {
    rhs[i] = (rhs[i] - upper_[i] * rhs[i + 1]) / pivots_[i];
  }
}

void TridiagonalLU::solve_transpose_in_place(std::span<double> rhs) const {
  // A^T = U^T L^T: forward with U^T, then backward with L^T.
  const std::size_t n = pivots_.size();
  if (rhs.size() != n) throw ValidationError("tridiagonal rhs size mismatch");
  rhs[0] /= pivots_[0];
  for (std::size_t i = 1; i < n; ++i) {
    rhs[i] = (rhs[i] - upper_[i - 1] * rhs[i - 1]) / pivots_[i];
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= multipliers_[i] * rhs[i + 1];
}

std::vector<double> TridiagonalLU::solve(std::span<const double> rhs) const {
  std::vector<double> x(rhs.begin(), rhs.end());
  solve_in_place(x);
  return x;
}

}  // namespace warpgrad
