#pragma once

#include <cstdint>
#include <random>
#include <string>

namespace dualgs {

// Deterministic random stream. All randomness in the toolkit flows from one
// root seed; independent streams are derived by hashing (root, stage name,
// trial index), so parallel schedules cannot change results.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(seed) {}

  // Substream derivation: splitmix64 over root ^ fnv1a(label) ^ index.
  static RngStream derive(std::uint64_t root, const std::string& label,
                          std::uint64_t index = 0);

  // Uniform on [0, 1).
  double uniform();

  // Standard normal via Box-Muller (portable across standard libraries,
  // unlike std::normal_distribution).
  double gaussian();

  std::uint64_t next_u64() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t fnv1a64(const std::string& s);

}  // namespace dualgs
