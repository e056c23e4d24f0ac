#include "pcomm/perfmodel.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pcomm/errors.hpp"

namespace pcomm::perfmodel {

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw DomainError(what);
}

}  // namespace

void WorkloadSpec::validate() const {
  require(arithmetic_intensity > 0, "arithmetic_intensity must be > 0");
  require(communication_intensity > 0, "communication_intensity must be > 0");
  require(cpu_frequency > 0, "cpu_frequency must be > 0");
  require(flops_per_cycle > 0, "flops_per_cycle must be > 0");
}

void DelayModel::validate() const {
  require(mu >= 0, "mu must be >= 0");
  require(system_noise >= 0, "system_noise must be >= 0");
  require(algorithmic_imbalance >= 0, "algorithmic_imbalance must be >= 0");
  require(partitions_per_thread >= 1, "partitions_per_thread must be >= 1");
}

WorkloadSpec fft_workload() { return {5.0, 1.0, 3.5e9, 8.0}; }

WorkloadSpec stencil_workload() {
  const double ghost = 66.0 / 64.0;
  return {1.0 / 13.0, ghost * ghost * ghost - 1.0, 3.5e9, 8.0};
}

SecondsPerByte compute_mu(const WorkloadSpec& w) {
  w.validate();
  return (w.arithmetic_intensity / w.communication_intensity) /
         (w.flops_per_cycle * w.cpu_frequency);
}

SecondsPerByte delay_rate(const DelayModel& d) {
  d.validate();
  const double theta = static_cast<double>(d.partitions_per_thread);
  return d.mu * (theta + d.sigma() * (std::sqrt(theta) + 1.0) - 1.0);
}

Seconds predict_t_bulk(std::int64_t n_part, double s_part, BytesPerSecond beta) {
  require(n_part >= 1, "n_part must be >= 1");
  require(s_part >= 0, "s_part must be >= 0");
  require(beta > 0, "beta must be > 0");
  return static_cast<double>(n_part) * s_part / beta;
}

Seconds predict_t_pipelined(std::int64_t n_part, double s_part, BytesPerSecond beta,
                            Seconds delay) {
  require(n_part >= 1, "n_part must be >= 1");
  require(s_part >= 0, "s_part must be >= 0");
  require(beta > 0, "beta must be > 0");
  require(delay >= 0, "delay must be >= 0");
  const double one = s_part / beta;
  return std::max(static_cast<double>(n_part - 1) * one - delay, 0.0) + one;
}

double predict_eta_large(std::int64_t n_threads, std::int64_t theta, SecondsPerByte gamma,
                         BytesPerSecond beta) {
  require(n_threads >= 1, "n_threads must be >= 1");
  require(theta >= 1, "theta must be >= 1");
  require(gamma >= 0, "gamma must be >= 0");
  require(beta > 0, "beta must be > 0");
  const double n_part = static_cast<double>(n_threads * theta);
  return n_part / std::max(n_part - gamma * beta, 1.0);
}

double predict_eta_small(std::int64_t n_threads, std::int64_t theta) {
  require(n_threads >= 1, "n_threads must be >= 1");
  require(theta >= 1, "theta must be >= 1");
  return 1.0 / static_cast<double>(n_threads * theta);
}

PipelinePrediction predict_pipeline(std::int64_t n_threads, std::int64_t theta, double s_part,
                                    BytesPerSecond beta, SecondsPerByte gamma) {
  require(gamma >= 0, "gamma must be >= 0");
  PipelinePrediction p;
  const std::int64_t n_part = n_threads * theta;
  p.delay = gamma * s_part;
  p.t_bulk = predict_t_bulk(n_part, s_part, beta);
  p.t_pipelined = predict_t_pipelined(n_part, s_part, beta, p.delay);
  p.eta = p.t_pipelined > 0 ? p.t_bulk / p.t_pipelined
                            : predict_eta_large(n_threads, theta, gamma, beta);
  return p;
}

Seconds sample_compute_time(std::mt19937_64& rng, const DelayModel& d, double s_part) {
  d.validate();
  const double mean = d.mu * s_part;
  const double sd = mean * d.sigma();
  if (sd == 0.0) return mean;
  std::normal_distribution<double> normal(mean, sd);
  double t = normal(rng);
  while (t < 0.0) t = normal(rng);
  return t;
}

std::vector<Seconds> last_partition_delay_schedule(std::int64_t n_part, SecondsPerByte gamma,
                                                   double s_part) {
  require(n_part >= 1, "n_part must be >= 1");
  std::vector<Seconds> offsets(static_cast<std::size_t>(n_part), 0.0);
  offsets.back() = gamma * s_part;
  return offsets;
}

}  // namespace pcomm::perfmodel
