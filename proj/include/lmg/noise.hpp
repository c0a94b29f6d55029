#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace lmg {

// Philox4x32-10 keyed counter permutation (Salmon et al., SC'11).
// Counter-based: the k-th block of a stream is a pure function of
// (counter, key), so streams can be replayed or split with no
// sequential dependence between them.
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;
  static Counter block(Counter ctr, Key key);
};

// Reproducible stream of Gaussian Wiener increments, addressed by
// (base_seed, trajectory_index). Distinct trajectory indices give
// statistically independent streams; replaying the same address yields
// the identical sequence. Shared by the quantum and semiclassical
// integrators so matched-noise comparisons are possible.
class NoiseStream {
 public:
  NoiseStream(std::uint64_t base_seed, std::uint64_t trajectory_index);

  // Standard normal draw.
  double normal();
  // Wiener increment with mean 0 and variance dt.
  double gaussian(double dt);

  std::uint64_t base_seed() const { return base_seed_; }
  std::uint64_t trajectory_index() const { return trajectory_index_; }
  // Number of philox blocks consumed so far.
  std::uint64_t blocks_used() const { return block_counter_; }

  // Recorded in output headers so CSV files identify their noise source.
  static constexpr std::string_view algorithm = "philox4x32-10/box-muller";

 private:
  std::uint64_t base_seed_;
  std::uint64_t trajectory_index_;
  std::uint64_t block_counter_ = 0;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Uniform stream for sampling discrete measurement outcomes. Lives in a
// separate counter domain, so it never collides with the NoiseStream of
// the same (base_seed, trajectory_index).
class OutcomeStream {
 public:
  OutcomeStream(std::uint64_t base_seed, std::uint64_t trajectory_index);

  // Uniform draw in [0, 1).
  double uniform();

  std::uint64_t base_seed() const { return base_seed_; }
  std::uint64_t trajectory_index() const { return trajectory_index_; }

 private:
  std::uint64_t base_seed_;
  std::uint64_t trajectory_index_;
  std::uint64_t block_counter_ = 0;
  std::array<std::uint32_t, 4> buffer_{};
  int buffered_ = 0;
};

}  // namespace lmg
