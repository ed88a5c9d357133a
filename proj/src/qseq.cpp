#include "sqmc/qseq.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <sstream>

#include "sqmc/config.hpp"

namespace sqmc {

std::string to_string(Construction c) {
  return c == Construction::RadicalInverseBase2 ? "radical_inverse" : "sobol";
}

std::string to_string(Randomization r) {
  switch (r) {
    case Randomization::None: return "none";
    case Randomization::DigitalShift: return "digital_shift";
    case Randomization::OwenScramble: return "owen";
  }
  return "none";
}

Randomization randomization_from_string(const std::string& name) {
  if (name == "none") return Randomization::None;
  if (name == "digital_shift") return Randomization::DigitalShift;
  if (name == "owen") return Randomization::OwenScramble;
  throw std::invalid_argument("unknown randomization '" + name + "'");
}

std::string to_string(GenerationMode m) {
  return m == GenerationMode::Incremental ? "incremental" : "batch_regenerate";
}

StreamConfig StreamConfig::from_config(const KeyValueConfig& config) {
  StreamConfig sc;
  sc.dim = config.get_uint("dim", 1);
  if (const auto c = config.get("construction")) {
    if (*c == "radical_inverse") sc.construction = Construction::RadicalInverseBase2;
    else if (*c == "sobol") sc.construction = Construction::SobolJoeKuo;
    else throw std::invalid_argument("unknown construction '" + *c + "'");
  }
  sc.randomization = randomization_from_string(config.get_string("randomization", "none"));
  sc.seed = config.get_uint("seed", 0);
  const auto m = config.get_string("mode", "incremental");
  if (m == "incremental") sc.mode = GenerationMode::Incremental;
  else if (m == "batch_regenerate") sc.mode = GenerationMode::BatchRegenerate;
  else throw std::invalid_argument("unknown mode '" + m + "'");
  sc.skip_zero_point = config.get_bool("skip_zero_point", false);
  return sc;
}

// ---------------------------------------------------------------------------

DirectionTable DirectionTable::parse(std::string_view text) {
  DirectionTable table;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream fields(line);
    std::uint64_t d = 0;
    if (!(fields >> d)) continue;  // header or blank line
    Entry e;
    std::uint64_t a = 0;
    if (!(fields >> e.degree >> a) || e.degree == 0 || e.degree > 31) {
      throw std::invalid_argument("direction table line " + std::to_string(line_no) +
                                  ": malformed 'd s a' fields");
    }
    if (d != table.entries_.size() + 2) {
      throw std::invalid_argument("direction table line " + std::to_string(line_no) +
                                  ": dimensions must be consecutive from 2");
    }
    e.coefficients = static_cast<std::uint32_t>(a);
    for (unsigned k = 0; k < e.degree; ++k) {
      std::uint64_t m = 0;
      if (!(fields >> m) || m % 2 == 0 || m >= (std::uint64_t{1} << (k + 1))) {
        throw std::invalid_argument("direction table line " + std::to_string(line_no) +
                                    ": m_" + std::to_string(k + 1) + " must be odd and < 2^" +
                                    std::to_string(k + 1));
      }
      e.initial.push_back(static_cast<std::uint32_t>(m));
    }
    table.entries_.push_back(std::move(e));
  }
  return table;
}

DirectionTable DirectionTable::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open direction table " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

const DirectionTable& DirectionTable::bundled() {
  static const DirectionTable table = parse(bundled_joe_kuo_text());
  return table;
}

std::array<std::uint32_t, 32> DirectionTable::directions(std::size_t coord) const {
  std::array<std::uint32_t, 32> v{};
  if (coord == 0) {
    for (unsigned k = 0; k < 32; ++k) v[k] = std::uint32_t{1} << (31 - k);
    return v;
  }
  if (coord >= max_dimension()) {
    throw std::out_of_range("direction table has no coordinate " + std::to_string(coord));
  }
  const Entry& e = entries_[coord - 1];
  const unsigned s = e.degree;
  for (unsigned k = 0; k < std::min(s, 32u); ++k) v[k] = e.initial[k] << (31 - k);
  for (unsigned k = s; k < 32; ++k) {
    std::uint32_t w = v[k - s] ^ (v[k - s] >> s);
    for (unsigned l = 1; l < s; ++l) {
      if ((e.coefficients >> (s - 1 - l)) & 1u) w ^= v[k - l];
    }
    v[k] = w;
  }
  return v;
}

// ---------------------------------------------------------------------------

RqmcStream::RqmcStream(const StreamConfig& config, const DirectionTable& table)
    : dim_(config.dim),
      construction_(config.construction.value_or(config.dim == 1 ? Construction::RadicalInverseBase2
                                                                 : Construction::SobolJoeKuo)),
      mode_(config.mode),
      skip_zero_(config.skip_zero_point) {
  if (dim_ == 0) throw std::invalid_argument("stream dimension must be positive");
  if (construction_ == Construction::RadicalInverseBase2 && dim_ != 1) {
    throw std::invalid_argument("radical-inverse construction is one-dimensional");
  }
  if (dim_ > table.max_dimension()) {
    throw std::invalid_argument("stream dimension " + std::to_string(dim_) +
                                " exceeds direction table size " +
                                std::to_string(table.max_dimension()));
  }
  prefix_.resize(dim_);
  for (std::size_t c = 0; c < dim_; ++c) {
    const auto v = table.directions(c);
    std::uint32_t acc = 0;
    for (unsigned k = 0; k < 32; ++k) prefix_[c][k] = acc ^= v[k];
  }
  digits_.assign(dim_, 0);
  if (skip_zero_) {
    for (std::size_t c = 0; c < dim_; ++c) digits_[c] = prefix_[c][0];
  }
  randomize(config.randomization, config.seed);
}

void RqmcStream::require_fresh(const char* what) const {
  if (cursor_ != 0) {
    throw std::logic_error(std::string(what) + ": stream already consumed " +
                           std::to_string(cursor_) + " points");
  }
}

void RqmcStream::randomize(Randomization kind, std::uint64_t seed) {
  require_fresh("randomize");
  randomization_ = kind;
  seed_ = seed;
  shift_.assign(dim_, 0);
  if (kind == Randomization::DigitalShift) {
    for (std::size_t c = 0; c < dim_; ++c) {
      shift_[c] = static_cast<std::uint32_t>(derive_seed(seed, c) >> 32);
    }
  }
}

void RqmcStream::set_digital_shift(std::span<const std::uint32_t> words) {
  require_fresh("set_digital_shift");
  if (words.size() != dim_) throw std::invalid_argument("one shift word per coordinate required");
  randomization_ = Randomization::DigitalShift;
  shift_.assign(words.begin(), words.end());
}

std::uint32_t RqmcStream::randomize_digits(std::size_t coord, std::uint32_t digits) const {
  switch (randomization_) {
    case Randomization::None: return digits;
    case Randomization::DigitalShift: return digits ^ shift_[coord];
    case Randomization::OwenScramble: {
      // Nested scrambling: the flip of digit k is a pseudorandom function of
      // (seed, coordinate, k, original digits 0..k-1).
      const std::uint64_t base = mix64(seed_ ^ mix64(coord));
      std::uint32_t out = 0;
      for (unsigned k = 0; k < 32; ++k) {
        const std::uint64_t prefix = k == 0 ? 0 : (digits >> (32 - k));
        const std::uint64_t key = (std::uint64_t{k} << 32) | prefix;
        const std::uint32_t flip = static_cast<std::uint32_t>(mix64(base ^ key) >> 63);
        const std::uint32_t bit = (digits >> (31 - k)) & 1u;
        out |= (bit ^ flip) << (31 - k);
      }
      return out;
    }
  }
  return digits;
}

void RqmcStream::regenerate(std::uint64_t index) {
  // Materializes the whole prefix 0..index, as a generator that returns the
  // first n points of the sequence per call would.
  regen_buffer_.resize((index + 1) * dim_);
  std::fill(digits_.begin(), digits_.end(), 0u);
  for (std::uint64_t n = 0; n <= index; ++n) {
    if (n > 0) {
      const int bit = std::countr_zero(n);
      for (std::size_t c = 0; c < dim_; ++c) digits_[c] ^= prefix_[c][bit];
    }
    double* row = regen_buffer_.data() + n * dim_;
    for (std::size_t c = 0; c < dim_; ++c) {
      row[c] = static_cast<double>(randomize_digits(c, digits_[c])) * 0x1p-32;
    }
  }
}

void RqmcStream::next(std::span<double> out) {
  if (out.size() != dim_) throw std::invalid_argument("output span has wrong dimension");
  const std::uint64_t index = raw_index();
  if (index >= kIndexBudget) {
    throw IndexBudgetExceeded("RqmcStream: index budget of 2^31 points exhausted");
  }
  if (mode_ == GenerationMode::BatchRegenerate) {
    regenerate(index);
    std::copy_n(regen_buffer_.data() + index * dim_, dim_, out.begin());
    ++cursor_;
    return;
  }
  for (std::size_t c = 0; c < dim_; ++c) {
    out[c] = static_cast<double>(randomize_digits(c, digits_[c])) * 0x1p-32;
  }
  ++cursor_;
  const int bit = std::countr_zero(index + 1);
  for (std::size_t c = 0; c < dim_; ++c) digits_[c] ^= prefix_[c][bit];
}

void RqmcStream::seek(std::uint64_t cursor) {
  if (cursor < cursor_) throw std::logic_error("seek: streams only move forward");
  cursor_ = cursor;
  const std::uint64_t index = raw_index();
  if (index >= kIndexBudget) return;  // the next draw reports the overflow
  for (std::size_t c = 0; c < dim_; ++c) {
    std::uint32_t d = 0;
    for (unsigned k = 0; k < 32; ++k) {
      if ((index >> k) & 1u) d ^= prefix_[c][k] ^ (k == 0 ? 0u : prefix_[c][k - 1]);
    }
    digits_[c] = d;
  }
}

PointBatch RqmcStream::next_batch(std::size_t n) {
  if (n == 0) throw std::invalid_argument("next_batch: n must be positive");
  PointBatch batch;
  batch.dim = dim_;
  batch.first_cursor = cursor_;
  batch.values.resize(n * dim_);
  for (std::size_t i = 0; i < n; ++i) next(std::span<double>(batch.values.data() + i * dim_, dim_));
  return batch;
}

RqmcStream randomize(RqmcStream stream, Randomization kind, std::uint64_t seed) {
  stream.randomize(kind, seed);
  return stream;
}

double radical_inverse_base2(std::uint32_t n) {
  std::uint32_t r = 0;
  for (unsigned k = 0; k < 32; ++k) r |= ((n >> k) & 1u) << (31 - k);
  return static_cast<double>(r) * 0x1p-32;
}

double star_discrepancy_1d(std::span<const double> points) {
  if (points.empty()) throw std::invalid_argument("star discrepancy of an empty point set");
  std::vector<double> sorted(points.begin(), points.end());
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    const double x = sorted[i];
    d = std::max({d, static_cast<double>(i + 1) / n - x, x - static_cast<double>(i) / n});
  }
  return d;
}

// ---------------------------------------------------------------------------

PseudoUniformStream::PseudoUniformStream(std::size_t dim, std::uint64_t seed)
    : dim_(dim), rng_(mix64(seed)) {
  if (dim_ == 0) throw std::invalid_argument("stream dimension must be positive");
}

void PseudoUniformStream::next(std::span<double> out) {
  if (out.size() != dim_) throw std::invalid_argument("output span has wrong dimension");
  for (auto& u : out) u = uniform32(rng_);
}

}  // namespace sqmc
