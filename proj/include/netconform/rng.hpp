#ifndef NETCONFORM_RNG_HPP
#define NETCONFORM_RNG_HPP

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string_view>

namespace netconform {

namespace detail {

inline constexpr std::uint64_t golden_gamma = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

}  // namespace detail

/// Counter-based random stream keyed by (seed, stream id, purpose tag).
///
/// The k-th draw of a stream is a pure function of its key and k, so two
/// streams built from the same triple produce the same sequence regardless of
/// what other streams were used in between. Replicate workers derive their
/// streams from (seed, replicate) and split them further by purpose, e.g.
/// `RngStream(seed, rep).substream("edges")`.
///
/// Satisfies UniformRandomBitGenerator so it can drive <random> distributions.
class RngStream {
 public:
  using result_type = std::uint64_t;

  RngStream(std::uint64_t seed, std::uint64_t stream_id)
      : seed_(seed), stream_id_(stream_id),
        key_(detail::mix64(detail::mix64(seed ^ 0x6A09E667F3BCC909ULL) +
                           detail::golden_gamma * (stream_id + 1))) {}

  /// Independent stream for a named purpose within this stream's key.
  RngStream substream(std::string_view purpose) const {
    RngStream child(*this);
    child.key_ = detail::mix64(key_ ^ detail::mix64(detail::fnv1a(purpose)));
    child.counter_ = 0;
    child.normal_.reset();
    return child;
  }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream_id() const noexcept { return stream_id_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    ++counter_;
    return detail::mix64(key_ + detail::golden_gamma * counter_);
  }

  /// Uniform on (0, 1]; never returns 0 so `u <= p` is false whenever p == 0.
  double uniform() {
    return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return normal_(*this); }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) {
    return std::uniform_int_distribution<std::uint64_t>(0, bound - 1)(*this);
  }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace netconform

#endif  // NETCONFORM_RNG_HPP
