#include "kernels_detail.hpp"
#include "warpgrad/kernels.hpp"

namespace warpgrad::kernels {

void node_costs_serial(const Signal& y, const Eigen::MatrixXd& x_at_knots,
                       const Eigen::VectorXd& weights, const WarpGrid& grid,
                       std::span<double> cost) {
  Eigen::VectorXd y_val(y.dimension());
  for (std::size_t i = 0; i < grid.knot_count(); ++i) {
    const auto col = static_cast<Eigen::Index>(i);
    for (std::size_t n = grid.offsets[i]; n < grid.offsets[i + 1]; ++n) {
      y.eval_into(grid.values[n], y_val);
      cost[n] = weights[col] * (x_at_knots.col(col) - y_val).squaredNorm();
    }
  }
}

void dp_sweep_serial(const WarpGrid& grid, std::span<const double> node_cost,
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
    for (std::size_t n = grid.offsets[i + 1]; n < grid.offsets[i + 2]; ++n) {
      const detail::Relaxed r =
          detail::relax(from, from_acc, grid.values[n], dt, c.s_min[col], c.s_max[col], lambda);
      acc[n] = r.arg < 0 ? detail::kInf : r.cost + node_cost[n];
      back[n] = r.arg;
    }
  }
}

void dtw_accumulate_serial(const Eigen::MatrixXd& cost, Eigen::MatrixXd& acc) {
  acc.resize(cost.rows(), cost.cols());
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    for (Eigen::Index j = 0; j < cost.cols(); ++j) {
      acc(i, j) = cost(i, j) + detail::dtw_cell(acc, i, j);
    }
  }
}

}  // namespace warpgrad::kernels
