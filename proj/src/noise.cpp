#include "lmg/noise.hpp"

#include <cmath>
#include <numbers>

namespace lmg {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

// Domain tags keep the Wiener and outcome streams of one trajectory in
// disjoint counter spaces.
constexpr std::uint32_t kDomainWiener = 0x00000000u;
constexpr std::uint32_t kDomainOutcome = 0x9E3779B9u;

inline Philox4x32::Counter philox_round(Philox4x32::Counter c, Philox4x32::Key k) {
  const std::uint64_t p0 = std::uint64_t(kPhiloxM0) * c[0];
  const std::uint64_t p1 = std::uint64_t(kPhiloxM1) * c[2];
  const auto hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
  const auto hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
  return {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
}

inline Philox4x32::Counter make_counter(std::uint64_t block, std::uint64_t traj,
                                        std::uint32_t domain) {
  return {std::uint32_t(block), std::uint32_t(block >> 32), std::uint32_t(traj),
          std::uint32_t(traj >> 32) ^ domain};
}

inline Philox4x32::Key make_key(std::uint64_t seed) {
  return {std::uint32_t(seed), std::uint32_t(seed >> 32)};
}

// 53-bit uniform in (0, 1]; never 0 so it is safe under log().
inline double u64_to_unit_open(std::uint64_t x) {
  return double((x >> 11) + 1) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::block(Counter ctr, Key key) {
  for (int round = 0; round < 10; ++round) {
    ctr = philox_round(ctr, key);
    if (round < 9) {
      key[0] += kPhiloxW0;
      key[1] += kPhiloxW1;
    }
  }
  return ctr;
}

NoiseStream::NoiseStream(std::uint64_t base_seed, std::uint64_t trajectory_index)
    : base_seed_(base_seed), trajectory_index_(trajectory_index) {}

double NoiseStream::normal() {
  if (has_cached_) {
    has_cached_ = false;
    return cached_;
  }
  const auto out = Philox4x32::block(
      make_counter(block_counter_++, trajectory_index_, kDomainWiener),
      make_key(base_seed_));
  const double u1 = u64_to_unit_open((std::uint64_t(out[0]) << 32) | out[1]);
  const double u2 = u64_to_unit_open((std::uint64_t(out[2]) << 32) | out[3]);
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  cached_ = r * std::sin(angle);
  has_cached_ = true;
  return r * std::cos(angle);
}

double NoiseStream::gaussian(double dt) { return normal() * std::sqrt(dt); }

OutcomeStream::OutcomeStream(std::uint64_t base_seed, std::uint64_t trajectory_index)
    : base_seed_(base_seed), trajectory_index_(trajectory_index) {}

double OutcomeStream::uniform() {
  if (buffered_ == 0) {
    buffer_ = Philox4x32::block(
        make_counter(block_counter_++, trajectory_index_, kDomainOutcome),
        make_key(base_seed_));
    buffered_ = 2;
  }
  const int i = 2 * (2 - buffered_);
  --buffered_;
  const std::uint64_t x = (std::uint64_t(buffer_[i]) << 32) | buffer_[i + 1];
  return double(x >> 11) * 0x1.0p-53;
}

}  // namespace lmg
