#include "mhgan/experiment.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

#include "mhgan/metrics.hpp"

namespace mhgan {

namespace {

using nlohmann::json;

// Stream indices for the pipeline stages; chains use 0..n-1.
constexpr std::uint64_t kStageBase = 1ULL << 48;
enum Stage : std::uint64_t {
  kTrainData = kStageBase,
  kNetInit,
  kCalibrationData,
  kHeldOutData,
  kRealPool,
  kRawSamples,
  kMHSeed,
  kDRSSeed,
  kTrainShuffle,
};

std::uint64_t derive_seed(std::uint64_t seed, Stage stage) {
  Rng r = substream(seed, stage);
  return r();
}

std::string join(const std::string& path, const std::string& key) { return path + "." + key; }

template <typename T>
T read(const json& j, const std::string& key, const std::string& path, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(join(path, key), "has the wrong type");
  }
}

std::size_t read_count(const json& j, const std::string& key, const std::string& path,
                       std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(join(path, key), "must be a non-negative integer");
  return v.get<std::size_t>();
}

void reject_unknown(const json& j, const std::string& path, std::initializer_list<const char*> known) {
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(known.begin(), known.end(), [&](const char* k) { return key == k; }))
      throw ConfigError(join(path, key), "unknown field");
  }
}

ExperimentKind experiment_from_string(const std::string& s, const std::string& path) {
  if (s == "univariate4") return ExperimentKind::kUnivariate4;
  if (s == "grid25") return ExperimentKind::kGrid25;
  if (s == "calibration_study") return ExperimentKind::kCalibrationStudy;
  throw ConfigError(path, "unknown experiment '" + s + "' (expected univariate4, grid25 or calibration_study)");
}

SelectorKind selector_from_string(const std::string& s, const std::string& path) {
  if (s == "none") return SelectorKind::kNone;
  if (s == "mh") return SelectorKind::kMH;
  if (s == "drs") return SelectorKind::kDRS;
  throw ConfigError(path, "unknown selector '" + s + "' (expected none, mh or drs)");
}

std::string to_string(DiscriminatorKind kind) {
  switch (kind) {
    case DiscriminatorKind::kOracle: return "oracle";
    case DiscriminatorKind::kWarped: return "warped";
    case DiscriminatorKind::kMlp: return "mlp";
  }
  return "oracle";
}

DiscriminatorSpec parse_discriminator(const json& j, const std::string& path, DiscriminatorSpec spec) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    static const std::regex warped(R"(\s*warped\s*\(\s*([^,\s]+)\s*,\s*([^)\s]+)\s*\)\s*)");
    std::smatch m;
    if (s == "oracle") {
      spec.kind = DiscriminatorKind::kOracle;
    } else if (s == "mlp") {
      spec.kind = DiscriminatorKind::kMlp;
    } else if (std::regex_match(s, m, warped)) {
      spec.kind = DiscriminatorKind::kWarped;
      try {
        spec.warp_a = std::stod(m[1].str());
        spec.warp_b = std::stod(m[2].str());
      } catch (const std::exception&) {
        throw ConfigError(path, "cannot parse warp parameters in '" + s + "'");
      }
    } else {
      throw ConfigError(path, "unknown discriminator '" + s + "' (expected oracle, warped(a,b) or mlp)");
    }
    return spec;
  }
  if (!j.is_object()) throw ConfigError(path, "must be a string or an object");
  reject_unknown(j, path, {"type", "a", "b", "n_train", "epochs", "batch_size", "learning_rate",
                           "optimizer", "beta1", "beta2", "adam_epsilon"});
  const auto type = read<std::string>(j, "type", path, "oracle");
  if (type == "oracle") spec.kind = DiscriminatorKind::kOracle;
  else if (type == "warped") spec.kind = DiscriminatorKind::kWarped;
  else if (type == "mlp") spec.kind = DiscriminatorKind::kMlp;
  else throw ConfigError(join(path, "type"), "unknown discriminator '" + type + "'");
  spec.warp_a = read(j, "a", path, spec.warp_a);
  spec.warp_b = read(j, "b", path, spec.warp_b);
  spec.n_train = read_count(j, "n_train", path, spec.n_train);
  spec.train.epochs = read_count(j, "epochs", path, spec.train.epochs);
  spec.train.batch_size = read_count(j, "batch_size", path, spec.train.batch_size);
  spec.train.learning_rate = read(j, "learning_rate", path, spec.train.learning_rate);
  const auto opt = read<std::string>(j, "optimizer", path, spec.train.optimizer == Optimizer::kAdam ? "adam" : "sgd");
  if (opt == "adam") spec.train.optimizer = Optimizer::kAdam;
  else if (opt == "sgd") spec.train.optimizer = Optimizer::kSgd;
  else throw ConfigError(join(path, "optimizer"), "unknown optimizer '" + opt + "' (expected sgd or adam)");
  spec.train.beta1 = read(j, "beta1", path, spec.train.beta1);
  spec.train.beta2 = read(j, "beta2", path, spec.train.beta2);
  spec.train.adam_epsilon = read(j, "adam_epsilon", path, spec.train.adam_epsilon);
  return spec;
}

MixtureSpec parse_mixture(const json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "must be an object");
  reject_unknown(j, path, {"means", "sigma", "weights"});
  if (!j.contains("means")) throw ConfigError(join(path, "means"), "is required");
  MixtureSpec m;
  const auto& means = j.at("means");
  if (!means.is_array() || means.empty()) throw ConfigError(join(path, "means"), "must be a non-empty array");
  for (std::size_t i = 0; i < means.size(); ++i) {
    const auto p = join(path, "means") + "[" + std::to_string(i) + "]";
    if (means[i].is_number()) {
      m.means.push_back({means[i].get<double>()});
    } else if (means[i].is_array()) {
      try {
        m.means.push_back(means[i].get<Point>());
      } catch (const json::exception&) {
        throw ConfigError(p, "must be a number or an array of numbers");
      }
    } else {
      throw ConfigError(p, "must be a number or an array of numbers");
    }
  }
  if (j.contains("sigma") && j.at("sigma").is_number()) {
    m.sigmas.assign(m.means.size(), j.at("sigma").get<double>());
  } else {
    m.sigmas = read<std::vector<double>>(j, "sigma", path, std::vector<double>(m.means.size(), 1.0));
  }
  m.weights = read<std::vector<double>>(j, "weights", path,
                                        std::vector<double>(m.means.size(), 1.0 / static_cast<double>(m.means.size())));
  return m;
}

json mixture_json(const MixtureSpec& m) {
  return json{{"means", m.means}, {"sigma", m.sigmas}, {"weights", m.weights}};
}

GaussianMixture mixture_from_spec(const MixtureSpec& m) {
  std::vector<GaussianComponent> comps;
  for (std::size_t i = 0; i < m.means.size(); ++i) comps.push_back({m.means[i], m.sigmas[i]});
  return GaussianMixture(std::move(comps), m.weights);
}

class Stopwatch {
 public:
  double lap() {
    const auto now = std::chrono::steady_clock::now();
    const double s = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    return s;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
};

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot open " + path.string() + " for writing");
  out << bytes;
  if (!out) throw RuntimeError("failed writing " + path.string());
}

}  // namespace

std::string to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::kUnivariate4: return "univariate4";
    case ExperimentKind::kGrid25: return "grid25";
    case ExperimentKind::kCalibrationStudy: return "calibration_study";
  }
  return "grid25";
}

std::string to_string(SelectorKind kind) {
  switch (kind) {
    case SelectorKind::kNone: return "none";
    case SelectorKind::kMH: return "mh";
    case SelectorKind::kDRS: return "drs";
  }
  return "none";
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  const std::string root = "config";
  if (!j.is_object()) throw ConfigError(root, "must be a JSON object");
  reject_unknown(j, root,
                 {"experiment", "seed", "n_samples", "k", "selectors", "discriminator", "calibrator",
                  "isotonic_pseudo_count", "n_calibration", "n_real_pool", "drop", "bridge_weight", "missing",
                  "data_mixture", "restart_on_no_accept", "max_restarts", "threads", "gamma", "n_pilot",
                  "drs_max_draws", "capped_ratio", "write_traces", "trace_chains", "output_dir"});
  ExperimentConfig c;
  if (!j.contains("experiment")) throw ConfigError(join(root, "experiment"), "is required");
  c.experiment = experiment_from_string(read<std::string>(j, "experiment", root, ""), join(root, "experiment"));
  if (!j.contains("seed")) throw ConfigError(join(root, "seed"), "is required (there is no clock-based default)");
  const auto& seed_json = j.at("seed");
  if (!seed_json.is_number_integer() || (!seed_json.is_number_unsigned() && seed_json.get<std::int64_t>() < 0))
    throw ConfigError(join(root, "seed"), "must be a non-negative integer");
  c.seed = j.at("seed").get<std::uint64_t>();

  if (c.experiment == ExperimentKind::kCalibrationStudy) {
    c.discriminator.kind = DiscriminatorKind::kWarped;
    c.discriminator.warp_a = 3.0;
    c.discriminator.warp_b = 1.0;
    c.calibrator = CalibratorKind::kIsotonic;
    c.selectors = {SelectorKind::kNone};
  }

  c.n_samples = read_count(j, "n_samples", root, c.n_samples);
  c.k = read_count(j, "k", root, c.k);
  if (j.contains("selectors")) {
    const auto& s = j.at("selectors");
    const auto path = join(root, "selectors");
    if (!s.is_array()) throw ConfigError(path, "must be an array of selector names");
    c.selectors.clear();
    for (std::size_t i = 0; i < s.size(); ++i) {
      const auto p = path + "[" + std::to_string(i) + "]";
      if (!s[i].is_string()) throw ConfigError(p, "must be a string");
      c.selectors.push_back(selector_from_string(s[i].get<std::string>(), p));
    }
  }
  if (j.contains("discriminator"))
    c.discriminator = parse_discriminator(j.at("discriminator"), join(root, "discriminator"), c.discriminator);
  if (j.contains("calibrator")) {
    try {
      c.calibrator = calibrator_kind_from_string(read<std::string>(j, "calibrator", root, ""));
    } catch (const ConfigError&) {
      throw;
    } catch (const InvalidArgument& e) {
      throw ConfigError(join(root, "calibrator"), e.what());
    }
  }
  c.isotonic_pseudo_count = read(j, "isotonic_pseudo_count", root, c.isotonic_pseudo_count);
  c.n_calibration = read_count(j, "n_calibration", root, c.n_calibration);
  c.n_real_pool = read_count(j, "n_real_pool", root, c.n_real_pool);
  c.drop = read(j, "drop", root, c.drop);
  c.bridge_weight = read(j, "bridge_weight", root, c.bridge_weight);
  c.missing = read_count(j, "missing", root, c.missing);
  if (j.contains("data_mixture")) c.data_mixture = parse_mixture(j.at("data_mixture"), join(root, "data_mixture"));
  c.restart_on_no_accept = read(j, "restart_on_no_accept", root, c.restart_on_no_accept);
  c.max_restarts = read_count(j, "max_restarts", root, c.max_restarts);
  c.threads = read_count(j, "threads", root, c.threads);
  c.gamma = read(j, "gamma", root, c.gamma);
  c.n_pilot = read_count(j, "n_pilot", root, c.n_pilot);
  c.drs_max_draws = read_count(j, "drs_max_draws", root, c.drs_max_draws);
  c.capped_ratio = read(j, "capped_ratio", root, c.capped_ratio);
  c.write_traces = read(j, "write_traces", root, c.write_traces);
  c.trace_chains = read_count(j, "trace_chains", root, c.trace_chains);
  c.output_dir = read(j, "output_dir", root, c.output_dir);
  c.validate();
  return c;
}

void ExperimentConfig::validate() const {
  const std::string root = "config";
  if (n_samples == 0) throw ConfigError(join(root, "n_samples"), "must be >= 1");
  if (k == 0) throw ConfigError(join(root, "k"), "must be >= 1");
  if (selectors.empty()) throw ConfigError(join(root, "selectors"), "must name at least one selector");
  if (std::set<SelectorKind>(selectors.begin(), selectors.end()).size() != selectors.size())
    throw ConfigError(join(root, "selectors"), "lists a selector twice");

  const auto dpath = join(root, "discriminator");
  if (discriminator.kind == DiscriminatorKind::kWarped) {
    if (!std::isfinite(discriminator.warp_a) || discriminator.warp_a == 0.0)
      throw ConfigError(join(dpath, "a"), "must be finite and non-zero");
    if (!std::isfinite(discriminator.warp_b)) throw ConfigError(join(dpath, "b"), "must be finite");
  }
  if (discriminator.kind == DiscriminatorKind::kMlp) {
    const auto& t = discriminator.train;
    if (discriminator.n_train == 0) throw ConfigError(join(dpath, "n_train"), "must be >= 1");
    if (t.epochs == 0) throw ConfigError(join(dpath, "epochs"), "must be >= 1");
    if (t.batch_size == 0) throw ConfigError(join(dpath, "batch_size"), "must be >= 1");
    if (!(t.learning_rate > 0.0)) throw ConfigError(join(dpath, "learning_rate"), "must be > 0");
    if (!(t.beta1 >= 0.0 && t.beta1 < 1.0)) throw ConfigError(join(dpath, "beta1"), "must be in [0,1)");
    if (!(t.beta2 >= 0.0 && t.beta2 < 1.0)) throw ConfigError(join(dpath, "beta2"), "must be in [0,1)");
    if (!(t.adam_epsilon > 0.0)) throw ConfigError(join(dpath, "adam_epsilon"), "must be > 0");
  }
  if (!(isotonic_pseudo_count >= 0.0))
    throw ConfigError(join(root, "isotonic_pseudo_count"), "must be >= 0");
  if (n_calibration < 4 || n_calibration % 2 != 0)
    throw ConfigError(join(root, "n_calibration"), "must be even and >= 4 (half real, half fake)");
  if (n_real_pool == 0) throw ConfigError(join(root, "n_real_pool"), "must be >= 1");

  if (experiment == ExperimentKind::kGrid25) {
    if (data_mixture) throw ConfigError(join(root, "data_mixture"), "is only supported for univariate4 and calibration_study");
    for (std::size_t i = 0; i < drop.size(); ++i)
      if (drop[i] >= 25) throw ConfigError(join(root, "drop") + "[" + std::to_string(i) + "]", "must be in 0..24");
    if (std::set<std::size_t>(drop.begin(), drop.end()).size() >= 25)
      throw ConfigError(join(root, "drop"), "cannot drop all 25 modes");
    if (!(bridge_weight >= 0.0 && bridge_weight < 1.0))
      throw ConfigError(join(root, "bridge_weight"), "must be in [0,1)");
  } else {
    const std::size_t modes = data_mixture ? data_mixture->means.size() : 4;
    if (modes < 2) throw ConfigError(join(root, "data_mixture.means"), "needs at least 2 components");
    if (missing >= modes)
      throw ConfigError(join(root, "missing"), "must be a component index below " + std::to_string(modes));
    if (data_mixture) {
      const auto mpath = join(root, "data_mixture");
      if (data_mixture->sigmas.size() != modes)
        throw ConfigError(join(mpath, "sigma"), "needs one value per mean");
      if (data_mixture->weights.size() != modes)
        throw ConfigError(join(mpath, "weights"), "needs one value per mean");
      try {
        (void)mixture_from_spec(*data_mixture);
      } catch (const InvalidArgument& e) {
        throw ConfigError(mpath, e.what());
      }
    }
  }
  if (threads == 0) throw ConfigError(join(root, "threads"), "must be >= 1");
  if (!std::isfinite(gamma)) throw ConfigError(join(root, "gamma"), "must be finite");
  if (n_pilot == 0) throw ConfigError(join(root, "n_pilot"), "must be >= 1");
  if (drs_max_draws == 0) throw ConfigError(join(root, "drs_max_draws"), "must be >= 1");
  if (output_dir.empty()) throw ConfigError(join(root, "output_dir"), "must be non-empty");
}

json ExperimentConfig::to_json() const {
  std::vector<std::string> sel;
  for (auto s : selectors) sel.push_back(to_string(s));
  const auto& t = discriminator.train;
  json d{{"type", to_string(discriminator.kind)}};
  if (discriminator.kind == DiscriminatorKind::kWarped) {
    d["a"] = discriminator.warp_a;
    d["b"] = discriminator.warp_b;
  }
  if (discriminator.kind == DiscriminatorKind::kMlp) {
    d["n_train"] = discriminator.n_train;
    d["epochs"] = t.epochs;
    d["batch_size"] = t.batch_size;
    d["learning_rate"] = t.learning_rate;
    d["optimizer"] = t.optimizer == Optimizer::kAdam ? "adam" : "sgd";
    d["beta1"] = t.beta1;
    d["beta2"] = t.beta2;
    d["adam_epsilon"] = t.adam_epsilon;
  }
  json j{{"experiment", to_string(experiment)},
         {"seed", seed},
         {"n_samples", n_samples},
         {"k", k},
         {"selectors", sel},
         {"discriminator", d},
         {"calibrator", std::string(mhgan::to_string(calibrator))},
         {"isotonic_pseudo_count", isotonic_pseudo_count},
         {"n_calibration", n_calibration},
         {"n_real_pool", n_real_pool},
         {"restart_on_no_accept", restart_on_no_accept},
         {"max_restarts", max_restarts},
         {"threads", threads},
         {"gamma", gamma},
         {"n_pilot", n_pilot},
         {"drs_max_draws", drs_max_draws},
         {"capped_ratio", capped_ratio},
         {"write_traces", write_traces},
         {"trace_chains", trace_chains},
         {"output_dir", output_dir}};
  if (experiment == ExperimentKind::kGrid25) {
    j["drop"] = drop;
    j["bridge_weight"] = bridge_weight;
  } else {
    j["missing"] = missing;
    if (data_mixture) j["data_mixture"] = mixture_json(*data_mixture);
  }
  return j;
}

Pipeline build_pipeline(const ExperimentConfig& cfg) {
  Stopwatch clock;
  std::vector<std::pair<std::string, double>> timings;

  std::optional<GaussianMixture> data;
  std::optional<Generator> gen;
  if (cfg.experiment == ExperimentKind::kGrid25) {
    data = make_grid25();
    gen = imperfect_grid_generator(std::set<std::size_t>(cfg.drop.begin(), cfg.drop.end()), cfg.bridge_weight);
  } else {
    data = cfg.data_mixture ? mixture_from_spec(*cfg.data_mixture) : make_univariate4();
    gen = Generator::from_mixture(data->without(cfg.missing));
  }
  timings.emplace_back("models", clock.lap());

  std::optional<Discriminator> raw;
  std::optional<double> train_loss;
  switch (cfg.discriminator.kind) {
    case DiscriminatorKind::kOracle:
      raw = oracle_discriminator(*data, *gen);
      break;
    case DiscriminatorKind::kWarped:
      raw = warp_discriminator(oracle_discriminator(*data, *gen), cfg.discriminator.warp_a, cfg.discriminator.warp_b);
      break;
    case DiscriminatorKind::kMlp: {
      Rng rng = substream(cfg.seed, kTrainData);
      const auto real = data->sample(cfg.discriminator.n_train, rng);
      const auto fake = gen->draw(cfg.discriminator.n_train, rng);
      Rng init = substream(cfg.seed, kNetInit);
      auto net = MLPNet::initialized(MLPNet::discriminator_widths(data->dim()), init);
      TrainConfig tc = cfg.discriminator.train;
      tc.seed = derive_seed(cfg.seed, kTrainShuffle);
      auto trained = mlp_train(std::move(net), real, fake, tc);
      train_loss = trained.final_loss;
      raw = mlp_discriminator(std::move(trained.net));
      break;
    }
  }
  timings.emplace_back("discriminator", clock.lap());

  const std::size_t half = cfg.n_calibration / 2;
  Rng cal_rng = substream(cfg.seed, kCalibrationData);
  const auto cal_real = data->sample(half, cal_rng);
  const auto cal_fake = gen->draw(half, cal_rng);
  const auto cs = make_calibration_set(cal_real, cal_fake, *raw, cal_rng);
  const Calibrator calibrator = fit_calibrator(cfg.calibrator, cs, cfg.isotonic_pseudo_count);
  Discriminator selector_d = calibrated(*raw, calibrator);
  timings.emplace_back("calibration", clock.lap());

  // Z and AUC on a disjoint balanced set.
  Rng held_rng = substream(cfg.seed, kHeldOutData);
  const auto held_real = data->sample(half, held_rng);
  const auto held_fake = gen->draw(half, held_rng);
  const auto s_real = raw->score_batch(held_real);
  const auto s_fake = raw->score_batch(held_fake);
  std::vector<int> labels(half, 1);
  labels.resize(2 * half, 0);
  std::vector<double> raw_probs(s_real), cal_probs;
  raw_probs.insert(raw_probs.end(), s_fake.begin(), s_fake.end());
  for (double s : raw_probs) cal_probs.push_back(calibrator.apply(s));
  std::optional<double> z_raw;
  if (raw->is_probability()) {
    try {
      z_raw = z_statistic(raw_probs, labels);
    } catch (const InvalidArgument&) {
      z_raw = std::numeric_limits<double>::quiet_NaN();
    }
  }
  const double z_cal = z_statistic(cal_probs, labels);
  const double auc = roc_auc(s_real, s_fake);
  timings.emplace_back("diagnostics", clock.lap());

  Rng pool_rng = substream(cfg.seed, kRealPool);
  auto pool = data->sample(cfg.n_real_pool, pool_rng);

  return Pipeline{std::move(*data), std::move(*gen),  std::move(*raw), calibrator, std::move(selector_d),
                  std::move(pool),  z_raw,             z_cal,           auc,        train_loss,
                  std::move(timings)};
}

SelectorRun run_selector(const ExperimentConfig& cfg, const Pipeline& p, SelectorKind selector, std::size_t k) {
  SelectorRun run;
  MetricsRow& m = run.metrics;
  m.experiment = to_string(cfg.experiment);
  m.selector = to_string(selector);
  m.k = selector == SelectorKind::kMH ? k : 0;
  m.seed = cfg.seed;
  m.n_samples = cfg.n_samples;
  m.z_raw = p.z_raw;
  m.z_calibrated = p.z_calibrated;

  switch (selector) {
    case SelectorKind::kNone: {
      Rng rng = substream(cfg.seed, kRawSamples);
      run.samples = p.generator.draw(cfg.n_samples, rng);
      m.acceptance_rate = 1.0;
      m.mean_generator_draws = 1.0;
      break;
    }
    case SelectorKind::kMH: {
      MHConfig mc;
      mc.k = k;
      mc.restart_on_no_accept = cfg.restart_on_no_accept;
      mc.max_restarts = cfg.max_restarts;
      mc.seed = derive_seed(cfg.seed, kMHSeed);
      mc.record_trace = cfg.write_traces;
      mc.threads = cfg.threads;
      auto r = mh_sample_iid(p.generator, p.selector_d, p.real_pool, cfg.n_samples, mc);
      run.samples = std::move(r.samples);
      run.chains = std::move(r.chains);
      m.acceptance_rate = r.acceptance_rate;
      m.restart_rate = r.restart_rate;
      m.mean_generator_draws = r.mean_generator_draws;
      break;
    }
    case SelectorKind::kDRS: {
      DRSConfig dc;
      dc.n_pilot = cfg.n_pilot;
      dc.gamma = cfg.gamma;
      dc.max_draws = cfg.drs_max_draws;
      dc.seed = derive_seed(cfg.seed, kDRSSeed);
      dc.capped_ratio = cfg.capped_ratio;
      auto r = drs_sample_iid(p.generator, p.selector_d, cfg.n_samples, dc);
      run.samples = std::move(r.samples);
      m.mean_generator_draws = r.mean_draws;
      m.acceptance_rate = r.mean_draws > 0.0 ? 1.0 / r.mean_draws : 0.0;
      break;
    }
  }

  const auto a = assign_modes(run.samples, p.data);
  m.high_quality_rate = high_quality_rate(a);
  m.mode_jsd = mode_jsd(a);
  try {
    m.within_mode_std = within_mode_std(run.samples, a, p.data);
  } catch (const InvalidArgument&) {
    m.within_mode_std = std::numeric_limits<double>::quiet_NaN();
  }
  return run;
}

std::string metrics_csv_header() {
  return "experiment,selector,k,seed,n_samples,high_quality_rate,mode_jsd,within_mode_std,"
         "acceptance_rate,restart_rate,mean_generator_draws,z_raw,z_calibrated\n";
}

std::string metrics_csv_row(const MetricsRow& r) {
  std::ostringstream out;
  out << r.experiment << ',' << r.selector << ',' << r.k << ',' << r.seed << ',' << r.n_samples << ','
      << fmt(r.high_quality_rate) << ',' << fmt(r.mode_jsd) << ',' << fmt(r.within_mode_std) << ','
      << fmt(r.acceptance_rate) << ',' << fmt(r.restart_rate) << ',' << fmt(r.mean_generator_draws) << ','
      << (r.z_raw ? fmt(*r.z_raw) : "") << ',' << fmt(r.z_calibrated) << '\n';
  return out.str();
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw RuntimeError("SHA-256 digest failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

json RunManifest::to_json() const {
  json t = json::object(), d = json::object(), m = json::array();
  for (const auto& [stage, seconds] : timings) t[stage] = seconds;
  for (const auto& [file, digest] : digests) d[file] = digest;
  for (const auto& r : metrics) {
    json row{{"selector", r.selector},
             {"k", r.k},
             {"high_quality_rate", r.high_quality_rate},
             {"mode_jsd", r.mode_jsd},
             {"acceptance_rate", r.acceptance_rate},
             {"restart_rate", r.restart_rate},
             {"mean_generator_draws", r.mean_generator_draws},
             {"z_calibrated", r.z_calibrated}};
    row["within_mode_std"] = std::isnan(r.within_mode_std) ? json(nullptr) : json(r.within_mode_std);
    row["z_raw"] = r.z_raw && !std::isnan(*r.z_raw) ? json(*r.z_raw) : json(nullptr);
    m.push_back(row);
  }
  return json{{"version", version}, {"config", config}, {"timings", t}, {"digests", d}, {"metrics", m}};
}

RunManifest run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  RunManifest manifest;
  manifest.config = cfg.to_json();

  Pipeline p = build_pipeline(cfg);
  manifest.timings = p.timings;

  std::ostringstream samples, metrics, traces;
  samples << "selector,index";
  for (std::size_t j = 0; j < p.data.dim(); ++j) samples << ",x" << j;
  samples << ",mode\n";
  metrics << metrics_csv_header();
  traces << "chain_id,step,d_current,d_proposal,alpha,accepted\n";

  Stopwatch clock;
  for (auto selector : cfg.selectors) {
    auto run = run_selector(cfg, p, selector, cfg.k);
    manifest.timings.emplace_back("select_" + to_string(selector), clock.lap());

    const auto a = assign_modes(run.samples, p.data);
    for (std::size_t i = 0; i < run.samples.size(); ++i) {
      samples << run.metrics.selector << ',' << i;
      for (double v : run.samples[i]) samples << ',' << fmt(v);
      samples << ',' << (a.category[i] == ModeAssignment::kUnassigned ? std::string("-1") : std::to_string(a.category[i]))
              << '\n';
    }
    metrics << metrics_csv_row(run.metrics);
    if (cfg.write_traces) {
      const std::size_t chains = std::min(cfg.trace_chains, run.chains.size());
      for (std::size_t c = 0; c < chains; ++c)
        for (const auto& t : run.chains[c].trace)
          traces << c << ',' << (t.pass * cfg.k + t.step) << ',' << fmt(t.d_current) << ',' << fmt(t.d_proposal)
                 << ',' << fmt(t.alpha) << ',' << (t.accepted ? 1 : 0) << '\n';
    }
    manifest.metrics.push_back(run.metrics);
  }

  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  std::vector<std::pair<std::string, std::string>> files{{"samples.csv", samples.str()},
                                                         {"metrics.csv", metrics.str()}};
  if (cfg.write_traces) files.emplace_back("traces.csv", traces.str());
  for (const auto& [name, bytes] : files) {
    write_file(dir / name, bytes);
    manifest.digests.emplace_back(name, sha256_hex(bytes));
  }
  manifest.timings.emplace_back("write", clock.lap());
  write_file(dir / "manifest.json", manifest.to_json().dump(2) + "\n");
  return manifest;
}

std::vector<MetricsRow> sweep_k(const ExperimentConfig& cfg, const std::vector<std::size_t>& k_values) {
  cfg.validate();
  if (k_values.empty()) throw ConfigError("k_values", "must be non-empty");
  for (std::size_t i = 0; i < k_values.size(); ++i) {
    if (k_values[i] == 0) throw ConfigError("k_values[" + std::to_string(i) + "]", "must be >= 1");
    if (i > 0 && k_values[i] <= k_values[i - 1])
      throw ConfigError("k_values[" + std::to_string(i) + "]", "must be strictly ascending");
  }
  ExperimentConfig c = cfg;
  c.write_traces = false;
  const Pipeline p = build_pipeline(c);
  std::vector<MetricsRow> rows;
  for (auto k : k_values)
    for (auto selector : c.selectors) {
      auto m = run_selector(c, p, selector, k).metrics;
      m.k = k;
      rows.push_back(std::move(m));
    }
  if (!c.output_dir.empty()) {
    std::string csv = metrics_csv_header();
    for (const auto& r : rows) csv += metrics_csv_row(r);
    std::filesystem::create_directories(c.output_dir);
    write_file(std::filesystem::path(c.output_dir) / "sweep_k.csv", csv);
  }
  return rows;
}

}  // namespace mhgan
