#ifndef DRAMATIC_RNG_H_
#define DRAMATIC_RNG_H_

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace dramatic {

// Counter-based generator: the i-th draw of a stream is a pure function of
// (key, i), and independent streams are split off by hashing a stream id into
// the key. Every random quantity in the library flows from one master seed
// through Split(), so results never depend on scheduling.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(Mix(Mix(seed) ^ Mix(stream + kGamma))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return Mix(key_ + (++counter_) * kGamma); }

  CounterRng Split(std::uint64_t stream) const { return CounterRng(key_, stream); }

  // Uniform on [0, 1).
  double Uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1).
  double UniformOpen() {
    return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
  }

  double Exponential() { return -std::log(UniformOpen()); }

  double Normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(UniformOpen()));
    const double theta = 2.0 * std::numbers::pi * Uniform();
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
  }

  bool Bernoulli(double p) { return Uniform() < p; }

  // Uniform integer in [0, n).
  std::uint64_t Below(std::uint64_t n) {
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t v;
    do {
      v = (*this)();
    } while (v >= limit);
    return v % n;
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;

  static std::uint64_t Mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace dramatic

#endif  // DRAMATIC_RNG_H_
