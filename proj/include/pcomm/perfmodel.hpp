#pragma once

// Closed-form predictions for bulk vs pipelined transfers, the delay-rate
// model of compute noise, and the stochastic compute-time generator used by
// the benchmark harness.

#include <cstdint>
#include <random>
#include <vector>

#include "pcomm/units.hpp"

namespace pcomm::perfmodel {

struct WorkloadSpec {
  double arithmetic_intensity = 1.0;     // flop / byte
  double communication_intensity = 1.0;  // bytes sent / bytes touched
  double cpu_frequency = 3.5e9;          // cycles / s
  double flops_per_cycle = 8.0;

  void validate() const;
};

// Distributed FFT: AI ~ 5, CI = 1, no algorithmic imbalance.
WorkloadSpec fft_workload();
// 64^3 block with two ghost layers, 4th-order stencil.
WorkloadSpec stencil_workload();

struct DelayModel {
  SecondsPerByte mu = 0.0;
  double system_noise = 0.0;           // epsilon
  double algorithmic_imbalance = 0.0;  // delta
  std::int64_t partitions_per_thread = 1;

  // Relative standard deviation of one partition's compute time.
  double sigma() const { return 0.5 * (system_noise + algorithmic_imbalance); }
  void validate() const;
};

struct PipelinePrediction {
  Seconds t_bulk = 0.0;
  Seconds t_pipelined = 0.0;
  Seconds delay = 0.0;
  double eta = 1.0;
};

// Average compute cost per byte of partition: (AI / CI) / (flops_per_cycle * F).
SecondsPerByte compute_mu(const WorkloadSpec& w);

// Delay between the first and the last ready partition, per byte:
// mu * (theta + sigma * (sqrt(theta) + 1) - 1).
SecondsPerByte delay_rate(const DelayModel& d);

Seconds predict_t_bulk(std::int64_t n_part, double s_part, BytesPerSecond beta);

// The delay hides at most the first n_part - 1 transfers; the last one is
// always exposed.
Seconds predict_t_pipelined(std::int64_t n_part, double s_part, BytesPerSecond beta,
                            Seconds delay);

double predict_eta_large(std::int64_t n_threads, std::int64_t theta, SecondsPerByte gamma,
                         BytesPerSecond beta);

double predict_eta_small(std::int64_t n_threads, std::int64_t theta);

// T_b, T_p, D and their ratio for n_threads * theta partitions of s_part bytes.
PipelinePrediction predict_pipeline(std::int64_t n_threads, std::int64_t theta, double s_part,
                                    BytesPerSecond beta, SecondsPerByte gamma);

// One draw of mu * s_part * N(1, sigma), redrawn while negative.
Seconds sample_compute_time(std::mt19937_64& rng, const DelayModel& d, double s_part);

// Ready offsets emulating a delay rate with one partition per thread: every
// partition is ready at 0 except the last, which waits gamma * s_part.
std::vector<Seconds> last_partition_delay_schedule(std::int64_t n_part, SecondsPerByte gamma,
                                                   double s_part);

}  // namespace pcomm::perfmodel
