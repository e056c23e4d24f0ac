#pragma once

// Sweeps of (strategy, partition size) cells with the measurement protocol
// of the benchmark: warm-up excluded, Student-t confidence interval, whole
// cell rerun while the interval is too wide.

#include <cstdint>
#include <optional>
#include <vector>

#include "pcomm/config.hpp"
#include "pcomm/partcomm.hpp"
#include "pcomm/perfmodel.hpp"
#include "pcomm/simnet.hpp"
#include "pcomm/strategies.hpp"

namespace pcomm::bench {

struct ExperimentConfig {
  std::vector<strategies::StrategyKind> strategies = {strategies::StrategyKind::part,
                                                      strategies::StrategyKind::p2p_single};
  // Partition sizes; the buffer holds n_threads * theta partitions.
  std::vector<Bytes> sizes = default_sizes();
  std::int64_t n_threads = 1;
  std::int64_t theta = 1;
  // Fixed delay of the last partition, gamma * size (ignored when
  // delay_model is set).
  SecondsPerByte gamma = 0.0;
  // Stochastic compute times per partition when set.
  std::optional<perfmodel::DelayModel> delay_model;

  // Total iterations per attempt, warm-up included.
  std::int64_t iterations = 150;
  std::int64_t warmup = 1;
  double confidence = 0.90;
  double max_half_width_frac = 0.05;
  std::int64_t max_retries = 50;
  std::uint64_t seed = 1;

  simnet::TimingModel timing;
  int channels = 1;
  partcomm::PartConfig part;

  // 64 B to 64 MiB, doubling.
  static std::vector<Bytes> default_sizes();
  void validate() const;
  SecondsPerByte effective_gamma() const;
};

// Applies experiment and timing keys; leftover keys are a ConfigError.
void apply_config(config::KeyValues kv, ExperimentConfig& cfg);
// MPIR_CVAR_PART_AGGR_SIZE and MPIR_CVAR_NUM_VCIS, when set.
void apply_environment(ExperimentConfig& cfg);

struct RunStats {
  strategies::StrategyKind strategy = strategies::StrategyKind::part;
  Bytes size = 0;
  double mean = 0.0;
  double ci_half_width = 0.0;
  std::int64_t retries = 0;
  bool ci_satisfied = true;
  std::vector<double> samples;
  std::int64_t data_messages = 0;  // per measured iteration
  perfmodel::PipelinePrediction model;
  double measured_eta = 0.0;  // p2p-single mean / this mean
};

// Deterministic stream seed for (seed, size index, attempt, iteration).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t size_index, std::uint64_t attempt,
                          std::uint64_t iteration);

// Ready offsets of one iteration.
std::vector<Seconds> ready_offsets(const ExperimentConfig& cfg, Bytes size,
                                   std::uint64_t stream_seed);

// One (strategy, size) cell with retries; measured_eta is left at 0.
RunStats run_cell(const ExperimentConfig& cfg, strategies::StrategyKind strategy,
                  std::size_t size_index);

// Every cell, ordered by (strategy as listed, size as listed). The p2p-single
// baseline is run for each size even when not listed.
std::vector<RunStats> run_experiment(const ExperimentConfig& cfg);

enum class ModelRegime { large, small };

struct ComparisonRow {
  strategies::StrategyKind strategy = strategies::StrategyKind::part;
  Bytes size = 0;
  double mean = 0.0;
  double measured_eta = 0.0;
  double model_eta = 0.0;
  ModelRegime regime = ModelRegime::large;
  double rel_deviation = 0.0;  // (measured - model) / model
  perfmodel::PipelinePrediction model;
};

const char* to_string(ModelRegime r);

// Large-message formula when size/beta >= 10x latency_short, small-message
// formula otherwise. Throws ConfigError when a size has no p2p-single row.
std::vector<ComparisonRow> compare_with_model(const std::vector<RunStats>& stats,
                                              const ExperimentConfig& cfg);

ModelRegime model_regime(const ExperimentConfig& cfg, Bytes size);
double model_eta(const ExperimentConfig& cfg, Bytes size, std::int64_t data_messages);

}  // namespace pcomm::bench
