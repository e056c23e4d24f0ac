#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "pcomm/config.hpp"
#include "pcomm/errors.hpp"

namespace pcomm::config {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty key");
    if (kv.count(key)) throw ConfigError("duplicate key '" + key + "'");
    kv.emplace(std::move(key), std::move(value));
  }
  return kv;
}

KeyValues load_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_key_values(in);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': not a number: '" + value + "'");
  }
}

std::int64_t to_int(const std::string& key, const std::string& value) {
  std::int64_t v = 0;
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ConfigError("key '" + key + "': not an integer: '" + value + "'");
  return v;
}

bool to_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "yes" || value == "on") return true;
  if (value == "0" || value == "false" || value == "no" || value == "off") return false;
  throw ConfigError("key '" + key + "': not a boolean: '" + value + "'");
}

void take_timing(KeyValues& kv, simnet::TimingModel& t) {
  auto take_d = [&](const char* key, double& field) {
    if (auto it = kv.find(key); it != kv.end()) {
      field = to_double(key, it->second);
      kv.erase(it);
    }
  };
  auto take_b = [&](const char* key, Bytes& field) {
    if (auto it = kv.find(key); it != kv.end()) {
      const auto v = to_int(key, it->second);
      if (v < 0) throw ConfigError(std::string("key '") + key + "' must be >= 0");
      field = static_cast<Bytes>(v);
      kv.erase(it);
    }
  };
  take_d("bandwidth", t.bandwidth);
  take_d("latency_short", t.latency_short);
  take_d("latency_bcopy", t.latency_bcopy);
  take_d("latency_zcopy", t.latency_zcopy);
  take_d("rendezvous_rtt", t.rendezvous_rtt);
  take_b("short_threshold", t.short_threshold);
  take_b("rendezvous_threshold", t.rendezvous_threshold);
  take_d("injection_overhead", t.injection_overhead);
  take_d("put_discount", t.put_discount);
}

simnet::TimingModel parse_timing_model(std::istream& in) {
  KeyValues kv = parse_key_values(in);
  simnet::TimingModel t;
  take_timing(kv, t);
  if (!kv.empty()) throw ConfigError("unknown timing key '" + kv.begin()->first + "'");
  t.validate();
  return t;
}

simnet::TimingModel load_timing_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_timing_model(in);
}

std::string format_timing_model(const simnet::TimingModel& t) {
  std::ostringstream out;
  char buf[64];
  auto put = [&](const char* key, double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << key << " = " << buf << '\n';
  };
  put("bandwidth", t.bandwidth);
  put("latency_short", t.latency_short);
  put("latency_bcopy", t.latency_bcopy);
  put("latency_zcopy", t.latency_zcopy);
  put("rendezvous_rtt", t.rendezvous_rtt);
  out << "short_threshold = " << t.short_threshold << '\n';
  out << "rendezvous_threshold = " << t.rendezvous_threshold << '\n';
  put("injection_overhead", t.injection_overhead);
  put("put_discount", t.put_discount);
  return out.str();
}

}  // namespace pcomm::config
