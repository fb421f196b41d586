#pragma once
#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace craftrl {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// Counter-based stream split: independent seeds for (master, tag, index).
inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t index = 0) {
  uint64_t h = splitmix64(master ^ fnv1a64(tag));
  return splitmix64(h ^ splitmix64(index + 0x51ed2701));
}

// mt19937_64 wrapper with hand-rolled draws so results do not depend on the
// standard library's distribution implementations.
class Rng {
 public:
  Rng() : gen_(0x5eedULL) {}
  explicit Rng(uint64_t seed) : gen_(seed) {}

  uint64_t next() { return gen_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // uniform integer in [0, n)
  uint64_t uniform_int(uint64_t n) {
    return static_cast<uint64_t>((static_cast<__uint128_t>(gen_()) * n) >> 64);
  }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // index sampled from unnormalized non-negative weights
  size_t categorical(const std::vector<double>& w) {
    double total = 0.0;
    for (double x : w) total += x;
    double u = uniform() * total;
    double acc = 0.0;
    for (size_t i = 0; i < w.size(); ++i) {
      acc += w[i];
      if (u < acc) return i;
    }
    return w.empty() ? 0 : w.size() - 1;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = uniform_int(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  std::string serialize() const {
    std::ostringstream os;
    os << gen_;
    return os.str();
  }
  void deserialize(const std::string& s) {
    std::istringstream is(s);
    is >> gen_;
  }

  bool operator==(const Rng& o) const { return gen_ == o.gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace craftrl
