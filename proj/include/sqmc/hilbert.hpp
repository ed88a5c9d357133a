#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sqmc {

/// Grid cell of an order-m Hilbert map; each component is < 2^m.
struct CellCoord {
  std::vector<std::uint64_t> coords;
  bool operator==(const CellCoord&) const = default;
};

/// Order-m Hilbert curve codec on the 2^m x ... x 2^m grid of [0,1)^d.
///
/// Orientation: Skilling's transpose form of the Butz reflected-Gray-code
/// construction, evaluated on a fixed master order so that coarser orders
/// are prefixes of finer ones (the order-m index shifted right by d is the
/// order-(m-1) index of the parent cell). For d = 2, m = 1 the path is
/// (0,0) -> (0,1) -> (1,1) -> (1,0). In one dimension the index is the cell.
///
/// Immutable after construction.
class HilbertMap {
 public:
  static constexpr unsigned kMaxIndexBits = 62;

  /// Requires 1 <= dim <= 10, order >= 1 and dim * order <= 62.
  HilbertMap(std::size_t dim, unsigned order);

  std::size_t dimension() const { return dim_; }
  unsigned order() const { return order_; }
  std::uint64_t cell_count() const { return std::uint64_t{1} << (order_ * dim_); }

  /// floor(x * 2^m) per coordinate, clamped to 2^m - 1. Throws
  /// std::domain_error for coordinates outside [0,1).
  CellCoord cell_of(std::span<const double> point) const;

  std::uint64_t index_of_cell(const CellCoord& cell) const;
  std::uint64_t index_of(std::span<const double> point) const;

  /// Inverse of index_of_cell. Throws std::out_of_range for index >= 2^{m d}.
  CellCoord point_of(std::uint64_t index) const;

  /// Stable argsort of row-major N x d points by curve index.
  std::vector<std::size_t> sort_by_curve(std::span<const double> points) const;

 private:
  std::size_t dim_;
  unsigned order_;
  unsigned master_order_;
};

}  // namespace sqmc
