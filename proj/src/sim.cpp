#include "ppcalib/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <thread>

namespace ppcalib {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

// PTRS transformed rejection (Hormann 1993), valid for mean >= 10.
std::int64_t poisson_ptrs(RngStream& rng, double mean) {
  const double slam = std::sqrt(mean);
  const double loglam = std::log(mean);
  const double b = 0.931 + 2.53 * slam;
  const double a = -0.059 + 0.02483 * b;
  const double inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
  const double vr = 0.9277 - 3.6224 / (b - 2.0);
  while (true) {
    const double u = rng.uniform() - 0.5;
    const double v = rng.uniform();
    const double us = 0.5 - std::abs(u);
    const double k = std::floor((2.0 * a / us + b) * u + mean + 0.43);
    if (us >= 0.07 && v <= vr) return static_cast<std::int64_t>(k);
    if (k < 0.0 || (us < 0.013 && v > us)) continue;
    if (std::log(v) + std::log(inv_alpha) - std::log(a / (us * us) + b) <=
        -mean + k * loglam - std::lgamma(k + 1.0)) {
      return static_cast<std::int64_t>(k);
    }
  }
}

std::uint64_t path_seed(const std::vector<std::uint64_t>& path) {
  std::uint64_t h = 0x243f6a8885a308d3ull;
  for (const auto v : path) h = splitmix64(h ^ splitmix64(v));
  return h;
}

}  // namespace

Xoshiro256::Xoshiro256(std::uint64_t seed) {
  for (auto& word : s_) {
    seed += 0x9e3779b97f4a7c15ull;
    std::uint64_t z = seed;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    word = z ^ (z >> 31);
  }
}

RngStream::RngStream(std::uint64_t master_seed, std::uint64_t stream_index)
    : RngStream(std::vector<std::uint64_t>{master_seed, stream_index}) {}

RngStream::RngStream(std::vector<std::uint64_t> path) : path_(std::move(path)), engine_(path_seed(path_)) {}

RngStream RngStream::split(std::uint64_t child) const {
  auto path = path_;
  path.push_back(child);
  return RngStream(std::move(path));
}

double RngStream::uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

std::uint64_t RngStream::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index needs n >= 1");
  // Rejection keeps the result exactly uniform.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = engine_();
  while (x >= limit) x = engine_();
  return x % n;
}

double RngStream::exponential() { return -std::log1p(-uniform()); }

double RngStream::normal() {
  // Box-Muller; one variate per call keeps the stream consumption simple.
  const double u1 = 1.0 - uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::int64_t RngStream::poisson(double mean) {
  if (!(mean >= 0.0) || !std::isfinite(mean)) throw std::invalid_argument("poisson mean must be finite and >= 0");
  if (mean == 0.0) return 0;
  if (mean >= 10.0) return poisson_ptrs(*this, mean);
  // Inversion by sequential search.
  double p = std::exp(-mean);
  double cdf = p;
  const double u = uniform();
  std::int64_t k = 0;
  while (u > cdf) {
    ++k;
    p *= mean / static_cast<double>(k);
    cdf += p;
    if (p < 1e-300 && cdf >= 1.0 - 1e-15) break;
  }
  return k;
}

std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
  std::uint64_t h = splitmix64(seed);
  for (const char c : label) h = splitmix64(h ^ static_cast<unsigned char>(c));
  return h;
}

void McmcConfig::validate() const {
  if (n_iterations < 1) throw std::invalid_argument("n_iterations must be >= 1");
  if (!(p_birth > 0.0 && p_birth < 1.0)) throw std::invalid_argument("p_birth must lie in (0, 1)");
}

double intensity_bound(const LogLinearIntensity& intensity, const Window& window) {
  if (intensity.is_constant()) return std::exp(intensity.theta()[0]);
  constexpr std::size_t kGrid = 512;
  double best = 0.0;
  for (std::size_t j = 0; j <= kGrid; ++j) {
    const double y = window.y_min() + window.height() * static_cast<double>(j) / kGrid;
    for (std::size_t i = 0; i <= kGrid; ++i) {
      const double x = window.x_min() + window.width() * static_cast<double>(i) / kGrid;
      best = std::max(best, intensity({x, y}));
    }
  }
  return best * 1.01;
}

PoissonSampler::PoissonSampler(const LogLinearIntensity& intensity, const Window& window)
    : intensity_(intensity),
      window_(window),
      mass_(integrate_intensity(intensity, window)),
      bound_(ppcalib::intensity_bound(intensity, window)) {}

PointPattern PoissonSampler::draw(RngStream& rng) const {
  const std::int64_t n = rng.poisson(mass_);
  std::vector<Point> pts;
  pts.reserve(static_cast<std::size_t>(n));
  const bool flat = intensity_.is_constant();
  while (static_cast<std::int64_t>(pts.size()) < n) {
    const Point u{window_.x_min() + window_.width() * rng.uniform(),
                  window_.y_min() + window_.height() * rng.uniform()};
    if (flat || rng.uniform() * bound_ <= intensity_(u)) pts.push_back(u);
  }
  return PointPattern(window_, std::move(pts));
}

PointPattern sample_poisson(const ModelSpec& model, const Window& window, RngStream& rng) {
  const auto* p = std::get_if<PoissonModel>(&model);
  if (p == nullptr) throw std::invalid_argument("sample_poisson requires a Poisson model");
  return PoissonSampler(p->intensity, window).draw(rng);
}

namespace {

std::vector<Point> initial_points(const ModelSpec& model, const Window& window, const McmcConfig& cfg,
                                  RngStream& rng) {
  if (cfg.initial_state == InitialState::empty) return {};
  LogLinearIntensity activity = LogLinearIntensity::constant(1.0);
  double hard_core = 0.0;
  if (const auto* s = std::get_if<StraussModel>(&model)) {
    activity = s->activity;
    if (s->gamma == 0.0) hard_core = s->r;
  } else if (const auto* g = std::get_if<GeyerModel>(&model)) {
    activity = LogLinearIntensity::constant(g->beta);
  } else {
    activity = std::get<PoissonModel>(model).intensity;
  }
  const auto draw = PoissonSampler(activity, window).draw(rng);
  std::vector<Point> pts(draw.points().begin(), draw.points().end());
  if (cfg.max_points && pts.size() > *cfg.max_points) pts.resize(*cfg.max_points);
  if (hard_core > 0.0) {
    // Sequential thinning to a configuration with positive density.
    std::vector<Point> kept;
    BucketGrid index(window, hard_core);
    for (const auto& p : pts) {
      bool clash = false;
      index.for_each_within(p, kept, [&](std::uint32_t) { clash = true; });
      if (!clash) {
        index.insert(static_cast<std::uint32_t>(kept.size()), p);
        kept.push_back(p);
      }
    }
    pts = std::move(kept);
  }
  return pts;
}

template <class Observer>
PointPattern run_chain(const ModelSpec& model, const Window& window, const McmcConfig& cfg, RngStream& rng,
                     Observer&& observe) {
  validate(model);
  cfg.validate();
  GibbsState state(model, window, initial_points(model, window, cfg, rng));
  const double area = window.area();
  // Proposal ratio for a birth move: q(death) / q(birth).
  const double log_birth_ratio = std::log(area) + std::log1p(-cfg.p_birth) - std::log(cfg.p_birth);
  auto accept = [&rng](double log_ratio) { return log_ratio >= 0.0 || rng.uniform() < std::exp(log_ratio); };
  std::vector<double> log_n;  // log_n[k] = log(k)
  auto log_of = [&log_n](std::size_t k) {
    while (log_n.size() <= k) log_n.push_back(std::log(static_cast<double>(log_n.size())));
    return log_n[k];
  };
  for (std::int64_t it = 0; it < cfg.n_iterations; ++it) {
    const std::size_t n = state.size();
    if (rng.uniform() < cfg.p_birth) {
      const Point u{window.x_min() + window.width() * rng.uniform(),
                    window.y_min() + window.height() * rng.uniform()};
      const bool allowed = !cfg.max_points || n < *cfg.max_points;
      if (allowed && accept(state.log_birth_intensity(u) + log_birth_ratio - log_of(n + 1))) state.add(u);
    } else if (n > 0) {
      const auto i = static_cast<std::size_t>(rng.uniform_index(n));
      if (accept(log_of(n) - state.log_death_intensity(i) - log_birth_ratio)) state.remove(i);
    }
    observe(state);
  }
  return state.pattern();
}

}  // namespace

PointPattern sample_gibbs(const ModelSpec& model, const Window& window, const McmcConfig& cfg, RngStream& rng) {
  return run_chain(model, window, cfg, rng, [](const GibbsState&) {});
}

std::vector<std::size_t> gibbs_size_trace(const ModelSpec& model, const Window& window, const McmcConfig& cfg,
                                          RngStream& rng) {
  std::vector<std::size_t> trace;
  trace.reserve(static_cast<std::size_t>(cfg.n_iterations));
  run_chain(model, window, cfg, rng, [&](const GibbsState& s) { trace.push_back(s.size()); });
  return trace;
}

PointPattern sample_pattern(const ModelSpec& model, const Window& window, const McmcConfig& cfg, RngStream& rng) {
  if (is_gibbs(model)) return sample_gibbs(model, window, cfg, rng);
  return sample_poisson(model, window, rng);
}

namespace {

template <class Result, class Make>
std::vector<Result> parallel_replicates(std::size_t K, unsigned threads, Make&& make) {
  std::vector<std::optional<Result>> slots(K);
  unsigned workers = threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : threads;
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(K, 1)));
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto work = [&]() {
    for (std::size_t k = next++; k < K; k = next++) {
      try {
        slots[k].emplace(make(k));
      } catch (...) {
        const std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = K;
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (error) std::rethrow_exception(error);
  std::vector<Result> out;
  out.reserve(K);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace

std::vector<PointPattern> sample_batch(const ModelSpec& model, const Window& window, std::size_t K,
                                       const McmcConfig& cfg, std::uint64_t master_seed, unsigned threads) {
  if (K == 0) throw std::invalid_argument("replicate count K must be >= 1");
  validate(model);
  std::optional<PoissonSampler> poisson;
  if (const auto* p = std::get_if<PoissonModel>(&model)) poisson.emplace(p->intensity, window);
  return parallel_replicates<PointPattern>(K, threads, [&](std::size_t k) {
    RngStream rng(master_seed, k);
    return poisson ? poisson->draw(rng) : sample_gibbs(model, window, cfg, rng);
  });
}

std::vector<CountVector> sample_batch_counts(const ModelSpec& model, const PixelGrid& grid, std::size_t K,
                                             const McmcConfig& cfg, std::uint64_t master_seed, unsigned threads) {
  if (K == 0) throw std::invalid_argument("replicate count K must be >= 1");
  validate(model);
  const Window& window = grid.window();
  std::optional<PoissonSampler> poisson;
  if (const auto* p = std::get_if<PoissonModel>(&model)) poisson.emplace(p->intensity, window);
  return parallel_replicates<CountVector>(K, threads, [&](std::size_t k) {
    RngStream rng(master_seed, k);
    return pixel_counts(poisson ? poisson->draw(rng) : sample_gibbs(model, window, cfg, rng), grid);
  });
}

}  // namespace ppcalib
