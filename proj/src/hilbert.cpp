#include "sqmc/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace sqmc {
namespace {

// Skilling, "Programming the Hilbert curve" (AIP Conf. Proc. 707, 2004).
// X holds d coordinates of `bits` bits each; converted in place to and from
// the transposed index.
void axes_to_transpose(std::vector<std::uint64_t>& x, unsigned bits) {
  const std::size_t n = x.size();
  const std::uint64_t top = std::uint64_t{1} << (bits - 1);
  for (std::uint64_t q = top; q > 1; q >>= 1) {
    const std::uint64_t p = q - 1;
    for (std::size_t i = 0; i < n; ++i) {
      if (x[i] & q) {
        x[0] ^= p;
      } else {
        const std::uint64_t t = (x[0] ^ x[i]) & p;
        x[0] ^= t;
        x[i] ^= t;
      }
    }
  }
  for (std::size_t i = 1; i < n; ++i) x[i] ^= x[i - 1];
  std::uint64_t t = 0;
  for (std::uint64_t q = top; q > 1; q >>= 1) {
    if (x[n - 1] & q) t ^= q - 1;
  }
  for (auto& v : x) v ^= t;
}

void transpose_to_axes(std::vector<std::uint64_t>& x, unsigned bits) {
  const std::size_t n = x.size();
  const std::uint64_t end = std::uint64_t{2} << (bits - 1);
  std::uint64_t t = x[n - 1] >> 1;
  for (std::size_t i = n - 1; i > 0; --i) x[i] ^= x[i - 1];
  x[0] ^= t;
  for (std::uint64_t q = 2; q != end; q <<= 1) {
    const std::uint64_t p = q - 1;
    for (std::size_t i = n; i-- > 0;) {
      if (x[i] & q) {
        x[0] ^= p;
      } else {
        t = (x[0] ^ x[i]) & p;
        x[0] ^= t;
        x[i] ^= t;
      }
    }
  }
}

}  // namespace

HilbertMap::HilbertMap(std::size_t dim, unsigned order) : dim_(dim), order_(order) {
  if (dim_ < 1 || dim_ > 10) throw std::invalid_argument("Hilbert dimension must be in 1..10");
  if (order_ < 1 || order_ * dim_ > kMaxIndexBits) {
    throw std::invalid_argument("Hilbert order " + std::to_string(order_) + " in dimension " +
                                std::to_string(dim_) + " exceeds the 62-bit index budget");
  }
  master_order_ = static_cast<unsigned>(kMaxIndexBits / dim_);
}

CellCoord HilbertMap::cell_of(std::span<const double> point) const {
  if (point.size() != dim_) throw std::invalid_argument("point has wrong dimension");
  const double scale = std::ldexp(1.0, static_cast<int>(order_));
  const std::uint64_t last = (std::uint64_t{1} << order_) - 1;
  CellCoord cell;
  cell.coords.resize(dim_);
  for (std::size_t c = 0; c < dim_; ++c) {
    const double x = point[c];
    if (!(x >= 0.0 && x < 1.0)) {
      throw std::domain_error("Hilbert coordinate " + std::to_string(x) + " outside [0,1)");
    }
    cell.coords[c] = std::min(static_cast<std::uint64_t>(x * scale), last);
  }
  return cell;
}

std::uint64_t HilbertMap::index_of_cell(const CellCoord& cell) const {
  if (cell.coords.size() != dim_) throw std::invalid_argument("cell has wrong dimension");
  const std::uint64_t limit = std::uint64_t{1} << order_;
  for (auto v : cell.coords) {
    if (v >= limit) throw std::out_of_range("cell coordinate exceeds grid");
  }
  if (dim_ == 1) return cell.coords[0];
  // Embed the cell at its corner in the master grid; the master curve visits
  // each order-m block contiguously, so the block rank is an order-m index.
  const unsigned pad = master_order_ - order_;
  std::vector<std::uint64_t> x(cell.coords);
  for (auto& v : x) v <<= pad;
  axes_to_transpose(x, master_order_);
  std::uint64_t index = 0;
  for (unsigned b = master_order_; b-- > pad;) {
    for (std::size_t i = 0; i < dim_; ++i) index = (index << 1) | ((x[i] >> b) & 1u);
  }
  return index;
}

std::uint64_t HilbertMap::index_of(std::span<const double> point) const {
  return index_of_cell(cell_of(point));
}

CellCoord HilbertMap::point_of(std::uint64_t index) const {
  if (index >= cell_count()) {
    throw std::out_of_range("Hilbert index " + std::to_string(index) + " out of range");
  }
  if (dim_ == 1) return CellCoord{{index}};
  const unsigned pad = master_order_ - order_;
  std::vector<std::uint64_t> x(dim_, 0);
  unsigned pos = order_ * static_cast<unsigned>(dim_);
  for (unsigned b = order_; b-- > 0;) {
    for (std::size_t i = 0; i < dim_; ++i) {
      --pos;
      x[i] |= ((index >> pos) & 1u) << (b + pad);
    }
  }
  transpose_to_axes(x, master_order_);
  for (auto& v : x) v >>= pad;
  return CellCoord{std::move(x)};
}

std::vector<std::size_t> HilbertMap::sort_by_curve(std::span<const double> points) const {
  if (points.size() % dim_ != 0) throw std::invalid_argument("point buffer not a multiple of d");
  const std::size_t n = points.size() / dim_;
  std::vector<std::uint64_t> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = index_of(points.subspan(i * dim_, dim_));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  return order;
}

}  // namespace sqmc
