#include "pcomm/report.hpp"

#include <charconv>

#include "json.hpp"

namespace pcomm::bench {

std::string format_number(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return std::string(buf, r.ptr);
}

namespace {

void csv_prefix(std::ostream& out, const RunStats& s) {
  out << strategies::to_string(s.strategy) << ',' << s.size << ',' << format_number(s.mean)
      << ',' << format_number(s.ci_half_width) << ',' << s.retries << ','
      << format_number(s.measured_eta);
}

nlohmann::ordered_json json_row(const RunStats& s) {
  nlohmann::ordered_json j;
  j["strategy"] = strategies::to_string(s.strategy);
  j["size_bytes"] = s.size;
  j["mean_s"] = s.mean;
  j["ci_half_s"] = s.ci_half_width;
  j["retries"] = s.retries;
  j["ci_satisfied"] = s.ci_satisfied;
  j["data_messages"] = s.data_messages;
  j["eta_measured"] = s.measured_eta;
  return j;
}

}  // namespace

void write_csv(std::ostream& out, const std::vector<RunStats>& stats,
               const ExperimentConfig& cfg) {
  out << kCsvHeader << '\n';
  for (const auto& s : stats) {
    csv_prefix(out, s);
    out << ',' << format_number(model_eta(cfg, s.size, s.data_messages)) << '\n';
  }
}

void write_json(std::ostream& out, const std::vector<RunStats>& stats,
                const ExperimentConfig& cfg) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& s : stats) {
    auto row = json_row(s);
    row["eta_model"] = model_eta(cfg, s.size, s.data_messages);
    arr.push_back(std::move(row));
  }
  out << arr.dump(2) << '\n';
}

void write_comparison_csv(std::ostream& out, const std::vector<RunStats>& stats,
                          const ExperimentConfig& cfg) {
  const auto rows = compare_with_model(stats, cfg);
  out << kCsvHeader << ",t_bulk_model_s,t_pipe_model_s,regime,rel_dev\n";
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    csv_prefix(out, stats[i]);
    out << ',' << format_number(r.model_eta) << ',' << format_number(r.model.t_bulk) << ','
        << format_number(r.model.t_pipelined) << ',' << to_string(r.regime) << ','
        << format_number(r.rel_deviation) << '\n';
  }
}

void write_comparison_json(std::ostream& out, const std::vector<RunStats>& stats,
                           const ExperimentConfig& cfg) {
  const auto rows = compare_with_model(stats, cfg);
  auto arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    auto row = json_row(stats[i]);
    row["eta_model"] = r.model_eta;
    row["t_bulk_model_s"] = r.model.t_bulk;
    row["t_pipe_model_s"] = r.model.t_pipelined;
    row["regime"] = to_string(r.regime);
    row["rel_dev"] = r.rel_deviation;
    arr.push_back(std::move(row));
  }
  out << arr.dump(2) << '\n';
}

}  // namespace pcomm::bench
