#include "pcomm/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <map>
#include <random>
#include <sstream>

#include "pcomm/errors.hpp"
#include "pcomm/stats.hpp"

namespace pcomm::bench {

using strategies::StrategyKind;

std::vector<Bytes> ExperimentConfig::default_sizes() {
  std::vector<Bytes> out;
  for (Bytes s = 64; s <= 64 * units::kMiB; s *= 2) out.push_back(s);
  return out;
}

void ExperimentConfig::validate() const {
  if (strategies.empty()) throw ConfigError("no strategy selected");
  if (sizes.empty()) throw ConfigError("no message size selected");
  if (n_threads < 1) throw ConfigError("n_threads must be >= 1");
  if (theta < 1) throw ConfigError("theta must be >= 1");
  if (gamma < 0) throw ConfigError("gamma must be >= 0");
  if (warmup < 0 || iterations <= warmup) throw ConfigError("require iterations > warmup >= 0");
  if (iterations - warmup < 2) throw ConfigError("need at least two measured iterations");
  if (!(confidence > 0 && confidence < 1)) throw ConfigError("confidence must be in (0, 1)");
  if (max_half_width_frac < 0) throw ConfigError("max_half_width_frac must be >= 0");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (channels < 1) throw ConfigError("num_channels must be >= 1");
  timing.validate();
  if (delay_model) {
    try {
      delay_model->validate();
    } catch (const DomainError& e) {
      throw ConfigError(e.what());
    }
  }
}

SecondsPerByte ExperimentConfig::effective_gamma() const {
  if (!delay_model) return gamma;
  perfmodel::DelayModel d = *delay_model;
  d.partitions_per_thread = theta;
  return perfmodel::delay_rate(d);
}

namespace {

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

void apply_config(config::KeyValues kv, ExperimentConfig& cfg) {
  config::take_timing(kv, cfg.timing);
  auto take = [&](const char* key) -> std::optional<std::string> {
    auto it = kv.find(key);
    if (it == kv.end()) return std::nullopt;
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  if (auto v = take("strategies")) {
    cfg.strategies.clear();
    for (const auto& name : split_list(*v)) {
      auto k = strategies::parse_strategy(name);
      if (!k) throw ConfigError("unknown strategy '" + name + "'");
      cfg.strategies.push_back(*k);
    }
  }
  if (auto v = take("sizes")) {
    cfg.sizes.clear();
    for (const auto& s : split_list(*v))
      cfg.sizes.push_back(static_cast<Bytes>(config::to_int("sizes", s)));
  }
  if (auto v = take("n_threads")) cfg.n_threads = config::to_int("n_threads", *v);
  if (auto v = take("theta")) cfg.theta = config::to_int("theta", *v);
  if (auto v = take("gamma")) cfg.gamma = config::to_double("gamma", *v);
  if (auto v = take("mu")) {
    perfmodel::DelayModel d = cfg.delay_model.value_or(perfmodel::DelayModel{});
    d.mu = config::to_double("mu", *v);
    cfg.delay_model = d;
  }
  if (auto v = take("system_noise")) {
    perfmodel::DelayModel d = cfg.delay_model.value_or(perfmodel::DelayModel{});
    d.system_noise = config::to_double("system_noise", *v);
    cfg.delay_model = d;
  }
  if (auto v = take("algorithmic_imbalance")) {
    perfmodel::DelayModel d = cfg.delay_model.value_or(perfmodel::DelayModel{});
    d.algorithmic_imbalance = config::to_double("algorithmic_imbalance", *v);
    cfg.delay_model = d;
  }
  if (auto v = take("iterations")) cfg.iterations = config::to_int("iterations", *v);
  if (auto v = take("warmup")) cfg.warmup = config::to_int("warmup", *v);
  if (auto v = take("confidence")) cfg.confidence = config::to_double("confidence", *v);
  if (auto v = take("max_half_width_frac"))
    cfg.max_half_width_frac = config::to_double("max_half_width_frac", *v);
  if (auto v = take("max_retries")) cfg.max_retries = config::to_int("max_retries", *v);
  if (auto v = take("seed")) cfg.seed = static_cast<std::uint64_t>(config::to_int("seed", *v));
  if (auto v = take("num_channels"))
    cfg.channels = static_cast<int>(config::to_int("num_channels", *v));
  if (auto v = take("part_aggr_size"))
    cfg.part.part_aggr_size = static_cast<Bytes>(config::to_int("part_aggr_size", *v));
  if (auto v = take("reserved_tag_space"))
    cfg.part.reserved_tag_space = config::to_int("reserved_tag_space", *v);
  if (auto v = take("legacy_am")) cfg.part.legacy_am = config::to_bool("legacy_am", *v);
  if (!kv.empty()) throw ConfigError("unknown config key '" + kv.begin()->first + "'");
}

void apply_environment(ExperimentConfig& cfg) {
  if (const char* v = std::getenv("MPIR_CVAR_PART_AGGR_SIZE"))
    cfg.part.part_aggr_size = static_cast<Bytes>(config::to_int("MPIR_CVAR_PART_AGGR_SIZE", v));
  if (const char* v = std::getenv("MPIR_CVAR_NUM_VCIS"))
    cfg.channels = static_cast<int>(config::to_int("MPIR_CVAR_NUM_VCIS", v));
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t size_index, std::uint64_t attempt,
                          std::uint64_t iteration) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ size_index);
  h = splitmix64(h ^ attempt);
  return splitmix64(h ^ iteration);
}

std::vector<Seconds> ready_offsets(const ExperimentConfig& cfg, Bytes size,
                                   std::uint64_t stream_seed) {
  const std::int64_t n = cfg.n_threads * cfg.theta;
  const double s = static_cast<double>(size);
  if (!cfg.delay_model) return perfmodel::last_partition_delay_schedule(n, cfg.gamma, s);

  // Each thread computes its partitions back to back, in partition order.
  std::mt19937_64 rng(stream_seed);
  std::vector<Seconds> out(static_cast<std::size_t>(n));
  std::vector<Seconds> clock(static_cast<std::size_t>(cfg.n_threads), 0.0);
  for (std::int64_t p = 0; p < n; ++p) {
    auto& c = clock[static_cast<std::size_t>(strategies::owner_thread(p, cfg.n_threads))];
    c += perfmodel::sample_compute_time(rng, *cfg.delay_model, s);
    out[static_cast<std::size_t>(p)] = c;
  }
  return out;
}

RunStats run_cell(const ExperimentConfig& cfg, StrategyKind strategy, std::size_t size_index) {
  cfg.validate();
  const Bytes size = cfg.sizes.at(size_index);

  strategies::StrategySpec spec;
  spec.kind = strategy;
  spec.n_threads = cfg.n_threads;
  spec.partitions_per_thread = cfg.theta;
  spec.buffer_bytes = size * static_cast<Bytes>(cfg.n_threads * cfg.theta);
  spec.channels = cfg.channels;
  spec.part = cfg.part;

  RunStats stats;
  stats.strategy = strategy;
  stats.size = size;
  stats.model = perfmodel::predict_pipeline(cfg.n_threads, cfg.theta, static_cast<double>(size),
                                            cfg.timing.bandwidth, cfg.effective_gamma());

  for (std::int64_t attempt = 0;; ++attempt) {
    strategies::StrategySession session(spec, cfg.timing);
    std::vector<double> samples;
    std::int64_t data_messages = 0;
    for (std::int64_t it = 0; it < cfg.iterations; ++it) {
      const auto offsets = ready_offsets(
          cfg, size,
          derive_seed(cfg.seed, size_index, static_cast<std::uint64_t>(attempt),
                      static_cast<std::uint64_t>(it)));
      const auto trace = session.run_iteration(offsets);
      if (it < cfg.warmup) continue;
      // Differences below 1 fs are rounding of the absolute clock, not signal.
      samples.push_back(std::round(trace.elapsed * 1e15) / 1e15);
      data_messages = trace.data_messages();
    }
    const auto ci = student_t_ci(samples, cfg.confidence);
    stats.mean = ci.mean;
    stats.ci_half_width = ci.half_width;
    stats.samples = std::move(samples);
    stats.data_messages = data_messages;
    stats.retries = attempt;
    stats.ci_satisfied = ci.half_width <= cfg.max_half_width_frac * ci.mean;
    if (stats.ci_satisfied || attempt >= cfg.max_retries) break;
  }
  return stats;
}

std::vector<RunStats> run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  std::map<std::size_t, RunStats> baseline;
  auto baseline_of = [&](std::size_t i) -> const RunStats& {
    auto it = baseline.find(i);
    if (it == baseline.end()) it = baseline.emplace(i, run_cell(cfg, StrategyKind::p2p_single, i)).first;
    return it->second;
  };

  std::vector<RunStats> out;
  for (StrategyKind k : cfg.strategies) {
    for (std::size_t i = 0; i < cfg.sizes.size(); ++i) {
      RunStats s = k == StrategyKind::p2p_single ? baseline_of(i) : run_cell(cfg, k, i);
      const double base = baseline_of(i).mean;
      s.measured_eta = s.mean > 0 ? base / s.mean : 0.0;
      out.push_back(std::move(s));
    }
  }
  return out;
}

const char* to_string(ModelRegime r) { return r == ModelRegime::large ? "large" : "small"; }

ModelRegime model_regime(const ExperimentConfig& cfg, Bytes size) {
  const double wire = static_cast<double>(size) / cfg.timing.bandwidth;
  return wire >= 10.0 * cfg.timing.latency_short ? ModelRegime::large : ModelRegime::small;
}

double model_eta(const ExperimentConfig& cfg, Bytes size, std::int64_t data_messages) {
  if (data_messages <= 1) return 1.0;
  if (model_regime(cfg, size) == ModelRegime::large)
    return perfmodel::predict_eta_large(cfg.n_threads, cfg.theta, cfg.effective_gamma(),
                                        cfg.timing.bandwidth);
  return 1.0 / static_cast<double>(data_messages);
}

std::vector<ComparisonRow> compare_with_model(const std::vector<RunStats>& stats,
                                              const ExperimentConfig& cfg) {
  std::map<Bytes, double> baseline;
  for (const auto& s : stats)
    if (s.strategy == StrategyKind::p2p_single) baseline[s.size] = s.mean;

  std::vector<ComparisonRow> rows;
  for (const auto& s : stats) {
    auto it = baseline.find(s.size);
    if (it == baseline.end())
      throw ConfigError("no p2p-single baseline for size " + std::to_string(s.size));
    ComparisonRow r;
    r.strategy = s.strategy;
    r.size = s.size;
    r.mean = s.mean;
    r.measured_eta = s.mean > 0 ? it->second / s.mean : 0.0;
    r.regime = model_regime(cfg, s.size);
    r.model_eta = model_eta(cfg, s.size, s.data_messages);
    r.rel_deviation = (r.measured_eta - r.model_eta) / r.model_eta;
    r.model = s.model;
    rows.push_back(r);
  }
  return rows;
}

}  // namespace pcomm::bench
