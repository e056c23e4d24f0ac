// pcomm_cli: performance model tables and simulated benchmark sweeps.
//
// Exit codes: 0 success, 2 configuration or usage error, 3 deadlock or
// protocol error, 1 anything else.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pcomm/config.hpp"
#include "pcomm/errors.hpp"
#include "pcomm/experiment.hpp"
#include "pcomm/perfmodel.hpp"
#include "pcomm/report.hpp"

namespace {

using namespace pcomm;

constexpr int kExitConfig = 2;
constexpr int kExitProtocol = 3;

struct ModelOptions {
  std::string workload = "all";
  std::optional<double> ai, ci, frequency, flops_per_cycle, noise, imbalance;
  std::int64_t threads = 8;
  std::vector<std::int64_t> thetas = {1, 2, 8};
  double bandwidth_gbs = 25.0;
  std::string format = "text";
};

struct ExperimentOptions {
  std::string config_file;
  std::string timing_file;
  std::vector<std::string> strategies;
  std::vector<Bytes> sizes;
  Bytes size = 0;
  std::int64_t threads = 1, theta = 1;
  double gamma_us_mb = 0, mu_us_mb = 0, noise = 0, imbalance = 0;
  std::int64_t iterations = 0, warmup = 0, max_retries = 0;
  double confidence = 0, max_half_width = 0;
  std::uint64_t seed = 0;
  int channels = 1;
  Bytes aggr_size = 0;
  bool legacy_am = false;
  bool ideal_network = false;
  double bandwidth_gbs = 0;
  std::string format = "csv";
  std::string output;
};

struct Workload {
  std::string name;
  perfmodel::WorkloadSpec spec;
  double noise;
  double imbalance;
};

std::vector<Workload> select_workloads(const ModelOptions& o) {
  std::vector<Workload> out;
  if (o.workload == "fft" || o.workload == "all")
    out.push_back({"fft", perfmodel::fft_workload(), 0.04, 0.0});
  if (o.workload == "stencil" || o.workload == "all")
    out.push_back({"stencil", perfmodel::stencil_workload(), 0.04, 0.5});
  if (o.workload == "custom") out.push_back({"custom", perfmodel::WorkloadSpec{}, 0.0, 0.0});
  for (auto& w : out) {
    if (o.ai) w.spec.arithmetic_intensity = *o.ai;
    if (o.ci) w.spec.communication_intensity = *o.ci;
    if (o.frequency) w.spec.cpu_frequency = *o.frequency * 1e9;
    if (o.flops_per_cycle) w.spec.flops_per_cycle = *o.flops_per_cycle;
    if (o.noise) w.noise = *o.noise;
    if (o.imbalance) w.imbalance = *o.imbalance;
  }
  return out;
}

int run_model(const ModelOptions& o) {
  const double beta = units::from_gb_per_s(o.bandwidth_gbs);
  nlohmann::ordered_json json = nlohmann::ordered_json::array();
  if (o.format == "csv") std::cout << "workload,theta,threads,gamma_us_per_mb,eta_large,eta_small\n";
  for (const auto& w : select_workloads(o)) {
    w.spec.validate();
    perfmodel::DelayModel d;
    d.mu = perfmodel::compute_mu(w.spec);
    d.system_noise = w.noise;
    d.algorithmic_imbalance = w.imbalance;
    if (o.format == "text") {
      std::printf("workload %s: mu = %.6f us/MB, sigma = %.4f, N = %lld, beta = %g GB/s\n",
                  w.name.c_str(), units::to_us_per_mb(d.mu), d.sigma(),
                  static_cast<long long>(o.threads), o.bandwidth_gbs);
      std::printf("%8s %18s %10s %10s\n", "theta", "gamma[us/MB]", "eta", "eta_small");
    }
    for (std::int64_t theta : o.thetas) {
      d.partitions_per_thread = theta;
      d.validate();
      const double gamma = perfmodel::delay_rate(d);
      const double eta = perfmodel::predict_eta_large(o.threads, theta, gamma, beta);
      const double eta_small = perfmodel::predict_eta_small(o.threads, theta);
      if (o.format == "text") {
        std::printf("%8lld %18.6f %10.6f %10.6f\n", static_cast<long long>(theta),
                    units::to_us_per_mb(gamma), eta, eta_small);
      } else if (o.format == "csv") {
        std::cout << w.name << ',' << theta << ',' << o.threads << ','
                  << bench::format_number(units::to_us_per_mb(gamma)) << ','
                  << bench::format_number(eta) << ',' << bench::format_number(eta_small) << '\n';
      } else {
        json.push_back({{"workload", w.name},
                        {"theta", theta},
                        {"threads", o.threads},
                        {"gamma_us_per_mb", units::to_us_per_mb(gamma)},
                        {"eta_large", eta},
                        {"eta_small", eta_small}});
      }
    }
  }
  if (o.format == "json") std::cout << json.dump(2) << '\n';
  return 0;
}

void add_experiment_options(CLI::App* sub, ExperimentOptions& o, bool single_size) {
  sub->add_option("--config", o.config_file, "key = value file (SI units)")
      ->check(CLI::ExistingFile);
  sub->add_option("--timing", o.timing_file, "network timing file (SI units)")
      ->check(CLI::ExistingFile);
  sub->add_option("--strategy", o.strategies, "comma separated strategies, or all")->delimiter(',');
  if (single_size)
    sub->add_option("--size", o.size, "partition size in bytes")->required();
  else
    sub->add_option("--sizes", o.sizes, "comma separated partition sizes in bytes")
        ->delimiter(',');
  sub->add_option("--threads", o.threads, "threads N")->check(CLI::PositiveNumber);
  sub->add_option("--theta", o.theta, "partitions per thread")->check(CLI::PositiveNumber);
  sub->add_option("--gamma", o.gamma_us_mb, "delay rate of the last partition, us/MB")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--mu", o.mu_us_mb, "enable stochastic compute: mean cost in us/MB")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--noise", o.noise, "system noise epsilon")->check(CLI::NonNegativeNumber);
  sub->add_option("--imbalance", o.imbalance, "algorithmic imbalance delta")
      ->check(CLI::NonNegativeNumber);
  sub->add_option("--iterations", o.iterations, "iterations per attempt, warm-up included");
  sub->add_option("--warmup", o.warmup, "warm-up iterations");
  sub->add_option("--confidence", o.confidence, "confidence level of the interval");
  sub->add_option("--max-half-width", o.max_half_width, "retry threshold, fraction of mean");
  sub->add_option("--max-retries", o.max_retries, "retry cap");
  sub->add_option("--seed", o.seed, "random seed");
  sub->add_option("--channels", o.channels, "communication channels")
      ->check(CLI::PositiveNumber);
  sub->add_option("--aggr-size", o.aggr_size, "aggregation threshold in bytes, 0 disables");
  sub->add_flag("--legacy-am", o.legacy_am, "single active message per iteration");
  sub->add_option("--bandwidth", o.bandwidth_gbs, "wire bandwidth in GB/s")
      ->check(CLI::PositiveNumber);
  sub->add_flag("--ideal-network", o.ideal_network, "zero latencies and injection overhead");
  sub->add_option("--format", o.format, "output format")->check(CLI::IsMember({"csv", "json"}));
  sub->add_option("-o,--output", o.output, "output file, stdout by default");
}

bool given(const CLI::App* sub, const char* name) { return sub->count(name) > 0; }

bench::ExperimentConfig build_config(const CLI::App* sub, const ExperimentOptions& o,
                                     bool single_size) {
  bench::ExperimentConfig cfg;
  if (!o.timing_file.empty()) cfg.timing = config::load_timing_model(o.timing_file);
  if (!o.config_file.empty()) bench::apply_config(config::load_key_values(o.config_file), cfg);
  bench::apply_environment(cfg);

  if (given(sub, "--strategy")) {
    cfg.strategies.clear();
    for (const auto& name : o.strategies) {
      if (name == "all") {
        const auto& every = strategies::all_strategies();
        cfg.strategies.insert(cfg.strategies.end(), every.begin(), every.end());
        continue;
      }
      auto k = strategies::parse_strategy(name);
      if (!k) throw UsageError("unknown strategy '" + name + "'");
      cfg.strategies.push_back(*k);
    }
  }
  if (single_size) cfg.sizes = {o.size};
  else if (given(sub, "--sizes")) cfg.sizes = o.sizes;
  if (given(sub, "--threads")) cfg.n_threads = o.threads;
  if (given(sub, "--theta")) cfg.theta = o.theta;
  if (given(sub, "--gamma")) cfg.gamma = units::from_us_per_mb(o.gamma_us_mb);
  if (given(sub, "--mu") || given(sub, "--noise") || given(sub, "--imbalance")) {
    auto d = cfg.delay_model.value_or(perfmodel::DelayModel{});
    if (given(sub, "--mu")) d.mu = units::from_us_per_mb(o.mu_us_mb);
    if (given(sub, "--noise")) d.system_noise = o.noise;
    if (given(sub, "--imbalance")) d.algorithmic_imbalance = o.imbalance;
    cfg.delay_model = d;
  }
  if (given(sub, "--iterations")) cfg.iterations = o.iterations;
  if (given(sub, "--warmup")) cfg.warmup = o.warmup;
  if (given(sub, "--confidence")) cfg.confidence = o.confidence;
  if (given(sub, "--max-half-width")) cfg.max_half_width_frac = o.max_half_width;
  if (given(sub, "--max-retries")) cfg.max_retries = o.max_retries;
  if (given(sub, "--seed")) cfg.seed = o.seed;
  if (given(sub, "--channels")) cfg.channels = o.channels;
  if (given(sub, "--aggr-size")) cfg.part.part_aggr_size = o.aggr_size;
  if (o.legacy_am) cfg.part.legacy_am = true;
  if (given(sub, "--bandwidth")) cfg.timing.bandwidth = units::from_gb_per_s(o.bandwidth_gbs);
  if (o.ideal_network) cfg.timing = cfg.timing.without_latency();
  cfg.validate();
  return cfg;
}

int run_experiment_command(const CLI::App* sub, const ExperimentOptions& o, bool single_size,
                           bool compare) {
  auto cfg = build_config(sub, o, single_size);
  if (compare &&
      std::find(cfg.strategies.begin(), cfg.strategies.end(),
                strategies::StrategyKind::p2p_single) == cfg.strategies.end())
    cfg.strategies.push_back(strategies::StrategyKind::p2p_single);
  const auto stats = bench::run_experiment(cfg);

  std::ofstream file;
  if (!o.output.empty()) {
    file.open(o.output, std::ios::binary);
    if (!file) throw ConfigError("cannot open " + o.output);
  }
  std::ostream& out = o.output.empty() ? std::cout : file;
  if (compare) {
    if (o.format == "json") bench::write_comparison_json(out, stats, cfg);
    else bench::write_comparison_csv(out, stats, cfg);
  } else {
    if (o.format == "json") bench::write_json(out, stats, cfg);
    else bench::write_csv(out, stats, cfg);
  }
  for (const auto& s : stats)
    if (!s.ci_satisfied)
      std::cerr << "warning: " << strategies::to_string(s.strategy) << " at " << s.size
                << " B did not reach the requested interval width after " << s.retries
                << " retries\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partitioned communication model and simulated benchmarks"};
  app.require_subcommand(1);

  ModelOptions mo;
  auto* model = app.add_subcommand("model", "print delay-rate and gain tables");
  model->add_option("--workload", mo.workload, "workload preset")
      ->check(CLI::IsMember({"fft", "stencil", "all", "custom"}));
  model->add_option("--ai", mo.ai, "arithmetic intensity, flop/byte");
  model->add_option("--ci", mo.ci, "communication intensity");
  model->add_option("--frequency", mo.frequency, "CPU frequency in GHz");
  model->add_option("--flops-per-cycle", mo.flops_per_cycle, "flops per cycle");
  model->add_option("--noise", mo.noise, "system noise epsilon");
  model->add_option("--imbalance", mo.imbalance, "algorithmic imbalance delta");
  model->add_option("--threads", mo.threads, "threads N")->check(CLI::PositiveNumber);
  model->add_option("--theta", mo.thetas, "comma separated partitions per thread")
      ->delimiter(',');
  model->add_option("--bandwidth", mo.bandwidth_gbs, "bandwidth in GB/s")
      ->check(CLI::PositiveNumber);
  model->add_option("--format", mo.format, "output format")
      ->check(CLI::IsMember({"text", "csv", "json"}));

  ExperimentOptions bo, so, co;
  auto* bench_cmd = app.add_subcommand("bench", "run a single (strategy, size) cell");
  add_experiment_options(bench_cmd, bo, true);
  auto* sweep = app.add_subcommand("sweep", "run the full strategy x size grid");
  add_experiment_options(sweep, so, false);
  auto* compare = app.add_subcommand("compare", "sweep with model prediction columns");
  add_experiment_options(compare, co, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  }

  try {
    if (*model) return run_model(mo);
    if (*bench_cmd) return run_experiment_command(bench_cmd, bo, true, false);
    if (*sweep) return run_experiment_command(sweep, so, false, false);
    if (*compare) return run_experiment_command(compare, co, false, true);
  } catch (const DeadlockError& e) {
    std::cerr << "deadlock: " << e.what() << '\n';
    return kExitProtocol;
  } catch (const ProtocolError& e) {
    std::cerr << "protocol error: " << e.what() << '\n';
    return kExitProtocol;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n\n" << app.help();
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DomainError& e) {
    std::cerr << "invalid value: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
