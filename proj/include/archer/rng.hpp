#pragma once

#include <cstdint>
#include <random>

namespace archer {

using Rng = std::mt19937_64;

// SplitMix64 finalizer; decorrelates seeds derived from one master seed.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent random streams for one training run.
///
/// Each consumer owns its own engine so that toggling one feature (for
/// example disabling hindsight storage) cannot shift the random numbers
/// another consumer sees.
struct RunStreams {
  Rng init;
  Rng env;
  Rng noise;
  Rng buffer;
  Rng relabel;
  Rng eval;

  explicit RunStreams(std::uint64_t master_seed)
      : init(mix_seed(mix_seed(master_seed) + 1)),
        env(mix_seed(mix_seed(master_seed) + 2)),
        noise(mix_seed(mix_seed(master_seed) + 3)),
        buffer(mix_seed(mix_seed(master_seed) + 4)),
        relabel(mix_seed(mix_seed(master_seed) + 5)),
        eval(mix_seed(mix_seed(master_seed) + 6)) {}
};

}  // namespace archer
