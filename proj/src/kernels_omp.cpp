#include "kernels_detail.hpp"
#include "warpgrad/kernels.hpp"

namespace warpgrad::kernels {

namespace {
// Below this much work per parallel region the fork/join overhead dominates.
constexpr std::size_t kMinParallelWork = 1 << 14;
}  // namespace

void node_costs_omp(const Signal& y, const Eigen::MatrixXd& x_at_knots,
                    const Eigen::VectorXd& weights, const WarpGrid& grid, std::span<double> cost) {
  const auto m = static_cast<std::ptrdiff_t>(grid.knot_count());
#pragma omp parallel if (grid.values.size() * static_cast<std::size_t>(y.dimension()) >= kMinParallelWork)
  {
    Eigen::VectorXd y_val(y.dimension());
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < m; ++i) {
      const auto col = static_cast<Eigen::Index>(i);
      for (std::size_t n = grid.offsets[i]; n < grid.offsets[i + 1]; ++n) {
        y.eval_into(grid.values[n], y_val);
        cost[n] = weights[col] * (x_at_knots.col(col) - y_val).squaredNorm();
      }
    }
  }
}

void dp_sweep_omp(const WarpGrid& grid, std::span<const double> node_cost,
                  const ConstraintSet& c, double lambda, std::span<double> acc,
                  std::span<int> back) {
  for (std::size_t n = 0; n < grid.column_size(0); ++n) {
    acc[n] = node_cost[n];
    back[n] = -1;
  }
  for (std::size_t i = 0; i + 1 < grid.knot_count(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    const std::span<const double> from = grid.column(i);
    const std::span<const double> from_acc(acc.data() + grid.offsets[i], from.size());
    const double dt = c.dt(col);
    const double s_lo = c.s_min[col];
    const double s_hi = c.s_max[col];
    const auto begin = static_cast<std::ptrdiff_t>(grid.offsets[i + 1]);
    const auto end = static_cast<std::ptrdiff_t>(grid.offsets[i + 2]);
    const std::size_t work = from.size() * grid.column_size(i + 1);
#pragma omp parallel for schedule(static) if (work >= kMinParallelWork)
    for (std::ptrdiff_t n = begin; n < end; ++n) {
      const detail::Relaxed r =
          detail::relax(from, from_acc, grid.values[n], dt, s_lo, s_hi, lambda);
      acc[n] = r.arg < 0 ? detail::kInf : r.cost + node_cost[n];
      back[n] = r.arg;
    }
  }
}

void dtw_accumulate_omp(const Eigen::MatrixXd& cost, Eigen::MatrixXd& acc) {
  const Eigen::Index rows = cost.rows();
  const Eigen::Index cols = cost.cols();
  acc.resize(rows, cols);
  for (Eigen::Index diag = 0; diag < rows + cols - 1; ++diag) {
    const Eigen::Index i_begin = std::max<Eigen::Index>(0, diag - (cols - 1));
    const Eigen::Index i_end = std::min<Eigen::Index>(rows - 1, diag);
    const auto len = static_cast<std::size_t>(i_end - i_begin + 1);
#pragma omp parallel for schedule(static) if (len >= 512)
    for (Eigen::Index i = i_begin; i <= i_end; ++i) {
      const Eigen::Index j = diag - i;
      acc(i, j) = cost(i, j) + detail::dtw_cell(acc, i, j);
    }
  }
}

}  // namespace warpgrad::kernels
