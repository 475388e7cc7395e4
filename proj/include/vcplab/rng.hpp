#ifndef VCPLAB_RNG_HPP
#define VCPLAB_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "vcplab/types.hpp"

// Deterministic randomness utilities. Every stochastic operation in the
// library takes an explicit engine (or a seed from which engines are
// derived); there is no global RNG. Variate generation is implemented on
// top of raw engine output rather than std:: distributions, whose
// algorithms are implementation-defined, so that identical seeds produce
// identical streams on every platform.

namespace vcplab::rng {

using Engine = std::mt19937_64;

/// SplitMix64 finalizer; used to decorrelate seed material.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline Engine make_engine(std::uint64_t seed) { return Engine(mix64(seed)); }

/// Seed material for the substream identified by (seed, stream).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ull));
}

/// Independent substream identified by (seed, stream).
inline Engine derive_stream(std::uint64_t seed, std::uint64_t stream) {
  return Engine(derive_seed(seed, stream));
}

/// Two-level substream (seed, stream, substream); used for per-point
/// Monte-Carlo streams so evaluation order can never change results.
inline Engine derive_stream(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream) {
  return Engine(mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ull) ^
                      mix64(substream + 0x9e6c63d0876a9a47ull)));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Engine& engine) {
  return static_cast<double>(engine() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller. Consumes exactly two engine draws and
/// keeps no cached state.
inline double standard_normal(Engine& engine) {
  const double u = 1.0 - uniform01(engine);  // (0, 1], keeps log finite
  const double v = uniform01(engine);
  return std::sqrt(-2.0 * std::log(u)) * std::cos(6.283185307179586476925286766559 * v);
}

/// Unbiased uniform integer in [0, bound) by rejection.
inline std::uint64_t uniform_below(Engine& engine, std::uint64_t bound) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t value;
  do {
    value = engine();
  } while (value >= limit);
  return value % bound;
}

inline void fill_standard_normal(Eigen::Ref<Vector> out, Engine& engine) {
  for (Index i = 0; i < out.size(); ++i) out[i] = standard_normal(engine);
}

/// Fisher-Yates shuffle (self-contained; std::shuffle's draw sequence is
/// implementation-defined).
template <class T>
void shuffle(std::vector<T>& values, Engine& engine) {
  for (std::size_t i = values.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_below(engine, i));
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace vcplab::rng

#endif
