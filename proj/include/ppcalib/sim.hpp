#ifndef PPCALIB_SIM_HPP
#define PPCALIB_SIM_HPP

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "ppcalib/core.hpp"
#include "ppcalib/models.hpp"

namespace ppcalib {

/// xoshiro256** (Blackman and Vigna). Satisfies UniformRandomBitGenerator.
class Xoshiro256 {
 public:
  using result_type = std::uint64_t;

  /// State filled from a SplitMix64 sequence started at `seed`.
  explicit Xoshiro256(std::uint64_t seed);

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

/// Deterministic random stream identified by (master_seed, stream_index).
///
/// The engine is xoshiro256** whose seed is a SplitMix64 hash of the whole
/// split path (master seed, stream index, child keys), so the sequence is
/// fixed across platforms and compilers. All variates are generated by code
/// in this library (no std:: distributions, whose algorithms are
/// implementation-defined).
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_index);

  std::uint64_t master_seed() const { return path_.front(); }
  std::uint64_t stream_index() const { return path_[1]; }

  /// Child stream keyed by this stream's identity and `child`; does not
  /// consume output from this stream.
  RngStream split(std::uint64_t child) const;

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on [0, 1).
  double uniform();
  /// Uniform integer on {0, ..., n - 1}; n >= 1.
  std::uint64_t uniform_index(std::uint64_t n);
  double exponential();
  double normal();
  std::int64_t poisson(double mean);

 private:
  explicit RngStream(std::vector<std::uint64_t> path);

  std::vector<std::uint64_t> path_;
  Xoshiro256 engine_;
};

/// Derives an independent 64-bit seed from a parent seed and a label.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

enum class InitialState { empty, poisson_matched };

struct McmcConfig {
  std::int64_t n_iterations = 100000;
  double p_birth = 0.5;
  InitialState initial_state = InitialState::empty;
  /// Births that would exceed this size are rejected (truncated target).
  std::optional<std::size_t> max_points;

  void validate() const;
};

/// Exact sampler for a Poisson model on a fixed window. The count is drawn
/// from Poisson(Lambda(W)) and locations by rejection under a bound on the
/// intensity; the bound is computed once at construction.
class PoissonSampler {
 public:
  PoissonSampler(const LogLinearIntensity& intensity, const Window& window);

  double expected_count() const { return mass_; }
  double intensity_bound() const { return bound_; }
  PointPattern draw(RngStream& rng) const;

 private:
  LogLinearIntensity intensity_;
  Window window_;
  double mass_;
  double bound_;
};

/// Upper bound on the intensity over the window: the maximum on a 512 x 512
/// grid of cells (evaluated at the 513 x 513 cell corners) times 1.01.
double intensity_bound(const LogLinearIntensity& intensity, const Window& window);

PointPattern sample_poisson(const ModelSpec& model, const Window& window, RngStream& rng);

/// Birth-death Metropolis-Hastings; returns the state after cfg.n_iterations
/// steps.
PointPattern sample_gibbs(const ModelSpec& model, const Window& window, const McmcConfig& cfg, RngStream& rng);

/// Runs the chain and reports the configuration size after every step;
/// used by the sampler's own diagnostics and tests.
std::vector<std::size_t> gibbs_size_trace(const ModelSpec& model, const Window& window, const McmcConfig& cfg,
                                          RngStream& rng);

/// Dispatches on the model family.
PointPattern sample_pattern(const ModelSpec& model, const Window& window, const McmcConfig& cfg, RngStream& rng);

/// K replicates; replicate k uses RngStream(master_seed, k). The result does
/// not depend on `threads` (0 = hardware concurrency).
std::vector<PointPattern> sample_batch(const ModelSpec& model, const Window& window, std::size_t K,
                                       const McmcConfig& cfg, std::uint64_t master_seed, unsigned threads = 0);

/// Same as sample_batch but keeps only the pixel counts of each replicate.
std::vector<CountVector> sample_batch_counts(const ModelSpec& model, const PixelGrid& grid, std::size_t K,
                                             const McmcConfig& cfg, std::uint64_t master_seed,
                                             unsigned threads = 0);

}  // namespace ppcalib

#endif  // PPCALIB_SIM_HPP
