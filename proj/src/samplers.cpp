#include "mhgan/samplers.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <mutex>
#include <string>
#include <thread>

#include "mhgan/calibration.hpp"
#include "mhgan/error.hpp"

namespace mhgan {

namespace {

double clamp_prob(double d) { return std::clamp(d, kCalibrationEpsilon, 1.0 - kCalibrationEpsilon); }

// Odds of the (clamped) score, written to stay exact near 1.
double odds(double d) {
  const double p = clamp_prob(d);
  return p / (1.0 - p);
}

// Runs body(i) for i in [0, n) over `threads` workers. The first exception
// thrown by any worker is rethrown after all workers stop.
template <typename Body>
void parallel_for(std::size_t n, std::size_t threads, Body body) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::jthread> workers;
  const std::size_t count = std::min(threads, n);
  for (std::size_t w = 0; w < count; ++w) {
    workers.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += count) body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  workers.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace

double mh_accept_prob(double d_current, double d_proposal) {
  const double c = clamp_prob(d_current);
  const double p = clamp_prob(d_proposal);
  // (1/c - 1) / (1/p - 1) == ((1 - c) p) / (c (1 - p))
  return std::min(1.0, ((1.0 - c) * p) / (c * (1.0 - p)));
}

ChainResult mh_chain(const Generator& g, const Discriminator& d, const Point& x0,
                     const MHConfig& cfg, Rng& rng) {
  if (cfg.k == 0) throw InvalidArgument("mh_chain: k must be >= 1");
  if (!d.is_probability())
    throw InvalidArgument("mh_chain: discriminator must produce probabilities; calibrate raw scores first");
  for (auto s : cfg.snapshot_steps)
    if (s == 0 || s > cfg.k) throw InvalidArgument("mh_chain: snapshot steps must lie in 1..k");

  ChainResult result;
  Point start = x0;
  std::vector<Point> proposals;
  std::vector<double> uniforms(cfg.k);
  std::size_t total_accepts = 0;

  for (std::size_t pass = 0;; ++pass) {
    Point state = start;
    double d_state = d.score(state);
    proposals = g.draw(cfg.k, rng);
    for (auto& u : uniforms) u = uniform01(rng);
    result.generator_draws += cfg.k;
    const auto d_props = d.score_batch(proposals);

    result.accepted_steps = 0;
    result.first_accept_index.reset();
    result.snapshots.assign(cfg.snapshot_steps.size(), Point{});
    for (std::size_t step = 1; step <= cfg.k; ++step) {
      const double d_prop = d_props[step - 1];
      const double alpha = mh_accept_prob(d_state, d_prop);
      const bool accept = uniforms[step - 1] <= alpha;
      if (cfg.record_trace) result.trace.push_back({pass, step, d_state, d_prop, alpha, accept});
      if (accept) {
        state = std::move(proposals[step - 1]);
        d_state = d_prop;
        ++result.accepted_steps;
        if (!result.first_accept_index) result.first_accept_index = step;
      }
      for (std::size_t j = 0; j < cfg.snapshot_steps.size(); ++j)
        if (cfg.snapshot_steps[j] == step) result.snapshots[j] = state;
    }
    total_accepts += result.accepted_steps;

    if (result.accepted_steps > 0 || !cfg.restart_on_no_accept) {
      result.output = std::move(state);
      return result;
    }
    if (result.restarts == cfg.max_restarts)
      throw RuntimeError("mh_chain: no proposal accepted after " + std::to_string(cfg.max_restarts) +
                         " restarts (k = " + std::to_string(cfg.k) + ", " +
                         std::to_string(result.generator_draws) + " generator draws, " +
                         std::to_string(total_accepts) + " accepts, last state score " +
                         std::to_string(d_state) + ")");
    ++result.restarts;
    result.restarted = true;
    start = g.draw(rng);
    ++result.generator_draws;
  }
}

MHSampleResult mh_sample_iid(const Generator& g, const Discriminator& d,
                             std::span<const Point> real_data, std::size_t n,
                             const MHConfig& cfg) {
  if (real_data.empty()) throw InvalidArgument("mh_sample_iid: real data must be non-empty");
  MHSampleResult out;
  out.chains.resize(n);
  parallel_for(n, cfg.threads, [&](std::size_t i) {
    Rng rng = substream(cfg.seed, i);
    std::uniform_int_distribution<std::size_t> pick(0, real_data.size() - 1);
    const Point& x0 = real_data[pick(rng)];
    out.chains[i] = mh_chain(g, d, x0, cfg, rng);
  });

  out.samples.reserve(n);
  double accepts = 0.0, steps = 0.0, restarted = 0.0, draws = 0.0;
  for (const auto& c : out.chains) {
    out.samples.push_back(c.output);
    // Earlier passes accepted nothing by construction.
    accepts += static_cast<double>(c.accepted_steps);
    steps += static_cast<double>(cfg.k * (c.restarts + 1));
    restarted += c.restarted ? 1.0 : 0.0;
    draws += static_cast<double>(c.generator_draws);
  }
  if (n > 0) {
    out.acceptance_rate = accepts / steps;
    out.restart_rate = restarted / static_cast<double>(n);
    out.mean_generator_draws = draws / static_cast<double>(n);
  }
  return out;
}

double drs_estimate_max(const Generator& g, const Discriminator& d, std::size_t n_pilot, Rng& rng) {
  if (n_pilot == 0) throw InvalidArgument("drs_estimate_max: n_pilot must be >= 1");
  const auto pilot = g.draw(n_pilot, rng);
  const auto scores = d.score_batch(pilot);
  double best = 0.0;
  for (double s : scores) best = std::max(best, odds(s));
  return best;
}

double drs_accept_prob(double d_score, double max_odds, double gamma, bool capped_ratio) {
  const double r = odds(d_score);
  if (gamma == 0.0 && capped_ratio) return std::min(1.0, r / max_odds);
  return sigmoid(std::log(r) - std::log(max_odds) - gamma);
}

DRSDraw drs_sample(const Generator& g, const Discriminator& d, double max_odds, double gamma,
                   const DRSConfig& cfg, Rng& rng) {
  if (!(max_odds > 0.0)) throw InvalidArgument("drs_sample: max odds must be positive");
  if (!d.is_probability())
    throw InvalidArgument("drs_sample: discriminator must produce probabilities; calibrate raw scores first");
  if (cfg.max_draws == 0) throw InvalidArgument("drs_sample: max_draws must be >= 1");
  // Proposals are scored in small batches; only those up to the accepted
  // one count as consumed.
  constexpr std::size_t kBatch = 64;
  std::size_t used = 0;
  std::vector<double> uniforms(kBatch);
  while (used < cfg.max_draws) {
    const std::size_t count = std::min(kBatch, cfg.max_draws - used);
    auto proposals = g.draw(count, rng);
    for (std::size_t i = 0; i < count; ++i) uniforms[i] = uniform01(rng);
    const auto scores = d.score_batch(proposals);
    for (std::size_t i = 0; i < count; ++i) {
      ++used;
      if (uniforms[i] < drs_accept_prob(scores[i], max_odds, gamma, cfg.capped_ratio))
        return {std::move(proposals[i]), used};
    }
  }
  throw RuntimeError("drs_sample: no draw accepted within " + std::to_string(cfg.max_draws) +
                     " draws (max odds " + std::to_string(max_odds) + ", gamma " +
                     std::to_string(gamma) + ")");
}

DRSSampleResult drs_sample_iid(const Generator& g, const Discriminator& d, std::size_t n,
                               const DRSConfig& cfg) {
  DRSSampleResult out;
  Rng pilot_rng = substream(cfg.seed, std::numeric_limits<std::uint64_t>::max());
  out.max_odds = drs_estimate_max(g, d, cfg.n_pilot, pilot_rng);
  out.samples.reserve(n);
  out.draws_used.reserve(n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng = substream(cfg.seed, i);
    auto draw = drs_sample(g, d, out.max_odds, cfg.gamma, cfg, rng);
    total += static_cast<double>(draw.draws_used);
    out.samples.push_back(std::move(draw.point));
    out.draws_used.push_back(draw.draws_used);
  }
  if (n > 0) out.mean_draws = total / static_cast<double>(n);
  return out;
}

}  // namespace mhgan
