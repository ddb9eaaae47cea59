#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace warpgrad {

/// Candidate warp values per knot, stored flat: knot i owns
/// values[offsets[i] .. offsets[i+1]), sorted ascending.
struct WarpGrid {
  std::vector<double> values;
  std::vector<std::size_t> offsets{0};

  std::size_t knot_count() const { return offsets.size() - 1; }
  std::size_t column_size(std::size_t i) const { return offsets[i + 1] - offsets[i]; }
  std::span<const double> column(std::size_t i) const {
    return {values.data() + offsets[i], column_size(i)};
  }
  void push_column(std::span<const double> candidates) {
    values.insert(values.end(), candidates.begin(), candidates.end());
    offsets.push_back(values.size());
  }
};

}  // namespace warpgrad
