#ifndef HOIGEN_RNG_H_
#define HOIGEN_RNG_H_

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace hoigen {

// 64-bit FNV-1a.
std::uint64_t Fnv1a(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t Fnv1a(const void* data, std::size_t size,
                    std::uint64_t seed = 0xcbf29ce484222325ULL);
// SplitMix64 finalizer; used to derive independent sub-seeds.
std::uint64_t Mix(std::uint64_t x);
std::uint64_t DeriveSeed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t DeriveSeed(std::uint64_t seed, std::string_view stream);

// Seeded generator. Normal draws use Box-Muller on top of mt19937_64 so the
// sequence is identical across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  double Uniform();  // [0, 1)
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }
  double Normal();
  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }
  // Uniform integer in [0, n).
  std::size_t Index(std::size_t n);
  std::vector<double> NormalVector(std::size_t n);
  // Uniform sample of k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> SampleWithoutReplacement(std::size_t n, std::size_t k);
  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[Index(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hoigen

#endif  // HOIGEN_RNG_H_
