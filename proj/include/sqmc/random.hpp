#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace sqmc {

/// SplitMix64 finalizer. Used wherever a seed has to be split into
/// independent sub-seeds or hashed with a counter.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derive a child seed from a parent seed and a stream identifier.
constexpr std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t id) {
  return mix64(parent ^ mix64(id + 0x632be59bd9b4e019ULL));
}

/// 32-bit dyadic uniform in [0,1), the same resolution as RqmcStream points.
inline double uniform32(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 32) * 0x1p-32;
}

/// Source of uniform vectors in [0,1)^d. Implemented by randomized QMC
/// streams and by a pseudorandom stream, so samplers can run either engine
/// through the same code path.
class UniformSource {
 public:
  virtual ~UniformSource() = default;
  virtual std::size_t dimension() const = 0;
  virtual void next(std::span<double> out) = 0;

  std::vector<double> next() {
    std::vector<double> out(dimension());
    next(out);
    return out;
  }
};

/// Pseudorandom counterpart of RqmcStream (mt19937_64, 32-bit resolution).
class PseudoUniformStream final : public UniformSource {
 public:
  PseudoUniformStream(std::size_t dim, std::uint64_t seed);

  std::size_t dimension() const override { return dim_; }
  using UniformSource::next;
  void next(std::span<double> out) override;

 private:
  std::size_t dim_;
  std::mt19937_64 rng_;
};

}  // namespace sqmc
