#pragma once

// Flat `key = value` configuration files. Lines starting with '#' are
// comments; values are SI (seconds, bytes, bytes per second).

#include <cstdint>
#include <istream>
#include <map>
#include <string>

#include "pcomm/simnet.hpp"

namespace pcomm::config {

using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::istream& in);
KeyValues load_key_values(const std::string& path);

double to_double(const std::string& key, const std::string& value);
std::int64_t to_int(const std::string& key, const std::string& value);
bool to_bool(const std::string& key, const std::string& value);

// Moves every TimingModel field found in `kv` into `t` and erases it from
// `kv`, so callers can reject whatever is left over.
void take_timing(KeyValues& kv, simnet::TimingModel& t);

// Whole-file TimingModel; unknown keys are a ConfigError.
simnet::TimingModel load_timing_model(const std::string& path);
simnet::TimingModel parse_timing_model(std::istream& in);

std::string format_timing_model(const simnet::TimingModel& t);

}  // namespace pcomm::config
