#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "mpcrl/types.hpp"

namespace mpcrl {

// splitmix64 finalizer, used to decorrelate derived stream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d4ecda6d7dc0fbULL;
  return x ^ (x >> 31);
}

// Deterministic random stream. Substreams are derived by mixing the parent
// seed with a stream id, so (seed, episode) pairs reproduce their draws
// independently of evaluation order.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : root_(seed), engine_(seed) {}

  static RngStream derive(std::uint64_t seed, std::uint64_t stream_id) {
    return RngStream(splitmix64(splitmix64(seed) ^ (0x517cc1b727220a95ULL * (stream_id + 1))));
  }

  RngStream substream(std::uint64_t stream_id) const {
    return derive(root_, stream_id);
  }

  double uniform() { return std::generate_canonical<double, 53>(engine_); }

  // Box-Muller with a fixed draw count per normal (no rejection), so the
  // number of engine advances per sample is reproducible.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double phi = 2.0 * M_PI * u2;
    spare_ = r * std::sin(phi);
    have_spare_ = true;
    return r * std::cos(phi);
  }

  Vector normal_vector(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = normal();
    return v;
  }

 private:
  std::uint64_t root_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

}  // namespace mpcrl
