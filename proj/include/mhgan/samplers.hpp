#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mhgan/mixtures.hpp"
#include "mhgan/models.hpp"
#include "mhgan/rng.hpp"

namespace mhgan {

/// Acceptance probability of the discriminator-driven independence sampler:
/// min(1, (1/d_current - 1) / (1/d_proposal - 1)). Inputs are clamped to
/// [1e-6, 1 - 1e-6] first so the ratio is always finite.
double mh_accept_prob(double d_current, double d_proposal);

struct MHConfig {
  std::size_t k = 640;
  bool restart_on_no_accept = true;
  std::size_t max_restarts = 100;
  std::uint64_t seed = 0;
  bool record_trace = false;
  /// Steps (1..k) after which the chain state is copied into
  /// ChainResult::snapshots, rejections counted as repeats.
  std::vector<std::size_t> snapshot_steps;
  std::size_t threads = 1;
};

struct TraceStep {
  std::size_t pass = 0;  // 0 for the run from the real sample, then one per restart
  std::size_t step = 0;  // 1..k within the pass
  double d_current = 0.0;
  double d_proposal = 0.0;
  double alpha = 0.0;
  bool accepted = false;
};

struct ChainResult {
  Point output;
  std::size_t accepted_steps = 0;                 // in the final pass
  std::optional<std::size_t> first_accept_index;  // 1-based step, final pass
  bool restarted = false;
  std::size_t restarts = 0;
  std::size_t generator_draws = 0;  // proposals plus fresh restart states
  std::vector<TraceStep> trace;
  std::vector<Point> snapshots;  // final pass, one per MHConfig::snapshot_steps entry
};

/// One chain started at the real point `x0`. Runs k independence-sampler
/// steps with proposals from `g`; if nothing was accepted and restarts are
/// enabled, re-runs from a fresh generator draw until some proposal is
/// accepted, so the real start is never returned. Throws RuntimeError once
/// max_restarts restarts have all failed, and InvalidArgument for k == 0 or a
/// discriminator that does not produce probabilities.
ChainResult mh_chain(const Generator& g, const Discriminator& d, const Point& x0,
                     const MHConfig& cfg, Rng& rng);

struct MHSampleResult {
  std::vector<Point> samples;
  std::vector<ChainResult> chains;
  double acceptance_rate = 0.0;  // accepted / attempted steps, all passes
  double restart_rate = 0.0;     // fraction of chains that restarted
  double mean_generator_draws = 0.0;
};

/// n independent chains; chain i runs on substream(cfg.seed, i) and starts
/// from a real point picked uniformly with that stream.
MHSampleResult mh_sample_iid(const Generator& g, const Discriminator& d,
                             std::span<const Point> real_data, std::size_t n,
                             const MHConfig& cfg);

struct DRSConfig {
  std::size_t n_pilot = 10000;
  double gamma = 0.0;
  std::size_t max_draws = 1'000'000;  // per emitted sample
  std::uint64_t seed = 0;
  /// With gamma == 0, accept with min(1, r / M) instead of sigmoid(log r - log M).
  bool capped_ratio = true;
};

/// Largest odds D/(1-D) over n_pilot generator draws.
double drs_estimate_max(const Generator& g, const Discriminator& d, std::size_t n_pilot, Rng& rng);

/// Acceptance probability for a draw scored `d_score` under envelope
/// `max_odds` and shift `gamma`.
double drs_accept_prob(double d_score, double max_odds, double gamma, bool capped_ratio = true);

struct DRSDraw {
  Point point;
  std::size_t draws_used = 0;
};

/// Draws from g until one is accepted. Throws RuntimeError after
/// cfg.max_draws rejections and InvalidArgument for max_odds <= 0.
DRSDraw drs_sample(const Generator& g, const Discriminator& d, double max_odds, double gamma,
                   const DRSConfig& cfg, Rng& rng);

struct DRSSampleResult {
  std::vector<Point> samples;
  std::vector<std::size_t> draws_used;
  double max_odds = 0.0;
  double mean_draws = 0.0;
};

/// Pilot estimate on its own substream, then sample i on substream(seed, i).
DRSSampleResult drs_sample_iid(const Generator& g, const Discriminator& d, std::size_t n,
                               const DRSConfig& cfg);

}  // namespace mhgan
