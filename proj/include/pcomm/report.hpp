#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "pcomm/experiment.hpp"

namespace pcomm::bench {

inline constexpr const char* kCsvHeader =
    "strategy,size_bytes,mean_s,ci_half_s,retries,eta_measured,eta_model";

// Decimal float with 12 significant digits, locale independent.
std::string format_number(double v);

void write_csv(std::ostream& out, const std::vector<RunStats>& stats,
               const ExperimentConfig& cfg);
void write_json(std::ostream& out, const std::vector<RunStats>& stats,
                const ExperimentConfig& cfg);

// Comparison table: CSV columns plus t_bulk_model_s, t_pipe_model_s, regime
// and rel_dev. Throws ConfigError without a p2p-single baseline.
void write_comparison_csv(std::ostream& out, const std::vector<RunStats>& stats,
                          const ExperimentConfig& cfg);
void write_comparison_json(std::ostream& out, const std::vector<RunStats>& stats,
                           const ExperimentConfig& cfg);

}  // namespace pcomm::bench
