#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "sqmc/random.hpp"

namespace sqmc {

class KeyValueConfig;

enum class Construction { RadicalInverseBase2, SobolJoeKuo };
enum class Randomization { None, DigitalShift, OwenScramble };

/// Incremental emits each point with an O(d) Gray-style update.
/// BatchRegenerate recomputes every point from index 0 on each call; it is
/// there to reproduce the cost blow-up of regenerating a sequence per draw.
enum class GenerationMode { Incremental, BatchRegenerate };

std::string to_string(Construction c);
std::string to_string(Randomization r);
Randomization randomization_from_string(const std::string& name);
std::string to_string(GenerationMode m);

struct StreamConfig {
  std::size_t dim = 1;
  /// Unset means radical inverse for d = 1 and Sobol otherwise.
  std::optional<Construction> construction;
  Randomization randomization = Randomization::None;
  std::uint64_t seed = 0;
  GenerationMode mode = GenerationMode::Incremental;
  /// Drop index 0 (the all-zero point of the unrandomized sequence).
  bool skip_zero_point = false;

  /// Keys: dim, construction, randomization, seed, mode, skip_zero_point.
  static StreamConfig from_config(const KeyValueConfig& config);
};

/// Sobol direction numbers in Joe-Kuo format (`d s a m_1 ... m_s` per line).
class DirectionTable {
 public:
  static DirectionTable parse(std::string_view text);
  static DirectionTable from_file(const std::filesystem::path& path);
  /// Table compiled from data/joe_kuo_d64.txt.
  static const DirectionTable& bundled();

  /// Largest supported stream dimension (table rows plus coordinate 0).
  std::size_t max_dimension() const { return entries_.size() + 1; }

  /// The 32 direction words v_1..v_32 of coordinate `coord` (0-based),
  /// left-aligned in 32 bits. Coordinate 0 is the van der Corput sequence.
  std::array<std::uint32_t, 32> directions(std::size_t coord) const;

 private:
  struct Entry {
    unsigned degree = 0;
    std::uint32_t coefficients = 0;
    std::vector<std::uint32_t> initial;
  };
  std::vector<Entry> entries_;
};

std::string_view bundled_joe_kuo_text();

/// Thrown when a stream is asked for a point past its index budget.
class IndexBudgetExceeded : public std::overflow_error {
 public:
  using std::overflow_error::overflow_error;
};

/// N points of a stream, row-major.
struct PointBatch {
  std::size_t dim = 0;
  std::uint64_t first_cursor = 0;
  std::vector<double> values;

  std::size_t size() const { return dim == 0 ? 0 : values.size() / dim; }
  std::span<const double> row(std::size_t i) const { return {values.data() + i * dim, dim}; }
  double operator()(std::size_t i, std::size_t c) const { return values[i * dim + c]; }
};

/// Randomized low-discrepancy point stream in [0,1)^d with a cursor.
/// Points are dyadic rationals of 32-bit resolution. Single owner; copy to
/// branch at the current cursor.
class RqmcStream final : public UniformSource {
 public:
  static constexpr std::uint64_t kIndexBudget = std::uint64_t{1} << 31;

  explicit RqmcStream(const StreamConfig& config,
                      const DirectionTable& table = DirectionTable::bundled());

  std::size_t dimension() const override { return dim_; }
  Construction construction() const { return construction_; }
  Randomization randomization() const { return randomization_; }
  GenerationMode mode() const { return mode_; }
  std::uint64_t cursor() const { return cursor_; }

  using UniformSource::next;
  void next(std::span<double> out) override;
  /// Same as n calls to next(), bit for bit.
  PointBatch next_batch(std::size_t n);

  /// Jump forward to `cursor` without emitting the skipped points. Throws
  /// std::logic_error when moving backwards.
  void seek(std::uint64_t cursor);
  /// Re-randomize a fresh stream. Throws std::logic_error once any point has
  /// been drawn.
  void randomize(Randomization kind, std::uint64_t seed);
  /// Digital shift with explicit per-coordinate words (fresh stream only).
  void set_digital_shift(std::span<const std::uint32_t> words);
  const std::vector<std::uint32_t>& shift_words() const { return shift_; }

 private:
  std::uint64_t raw_index() const { return cursor_ + (skip_zero_ ? 1 : 0); }
  void regenerate(std::uint64_t index);
  std::uint32_t randomize_digits(std::size_t coord, std::uint32_t digits) const;
  void require_fresh(const char* what) const;

  std::size_t dim_;
  Construction construction_;
  Randomization randomization_ = Randomization::None;
  GenerationMode mode_;
  bool skip_zero_;
  std::uint64_t seed_ = 0;
  std::uint64_t cursor_ = 0;
  // prefix_[c][k] = v_0 ^ ... ^ v_k; moving from index n-1 to n flips the
  // low ctz(n)+1 bits, so digits(n) = digits(n-1) ^ prefix_[c][ctz(n)].
  std::vector<std::array<std::uint32_t, 32>> prefix_;
  std::vector<std::uint32_t> digits_;  // unrandomized digits at raw_index()
  std::vector<std::uint32_t> shift_;
  std::vector<double> regen_buffer_;  // BatchRegenerate scratch
};

/// Convenience: build a stream and randomize it in one go.
RqmcStream randomize(RqmcStream stream, Randomization kind, std::uint64_t seed);

/// Maps a 32-bit dyadic point to the midpoint of its resolution cell, which
/// lies strictly inside (0,1). Used before inverse-CDF transforms that
/// reject 0.
inline double cell_midpoint(double u) { return u + 0x1p-33; }

/// Base-2 radical inverse of n at 32-bit resolution.
double radical_inverse_base2(std::uint32_t n);

/// Exact one-dimensional star discrepancy. Throws std::invalid_argument on
/// empty input.
double star_discrepancy_1d(std::span<const double> points);

}  // namespace sqmc
