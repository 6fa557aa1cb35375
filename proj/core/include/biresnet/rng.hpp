#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace biresnet {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

// Counter-based deterministic generator. A stream is identified by
// (root_seed, purpose_tag); the value at a given draw index is a pure
// function of that triple, so streams reproduce bit-exactly on every
// platform regardless of call interleaving elsewhere.
class SeededRng {
 public:
  SeededRng(std::uint64_t root_seed, std::string_view purpose_tag)
      : root_seed_(root_seed),
        purpose_tag_(purpose_tag),
        stream_(detail::splitmix64(root_seed ^ detail::fnv1a64(purpose_tag))) {}

  std::uint64_t root_seed() const { return root_seed_; }
  const std::string& purpose_tag() const { return purpose_tag_; }

  SeededRng derive(std::string_view subtag) const {
    return SeededRng(root_seed_, purpose_tag_ + "/" + std::string(subtag));
  }

  std::uint64_t next_u64() { return at(counter_++); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; consumes two draws per call.
  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    return r * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Unbiased integer in [0, n) via 128-bit multiply-shift.
  std::uint64_t below(std::uint64_t n) {
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t at(std::uint64_t index) const {
    return detail::splitmix64(stream_ ^ detail::splitmix64(index));
  }

  std::uint64_t root_seed_;
  std::string purpose_tag_;
  std::uint64_t stream_;
  std::uint64_t counter_ = 0;
};

}  // namespace biresnet
