#include "pcomm/mapping.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "pcomm/errors.hpp"

namespace pcomm::partcomm {

std::int64_t MessageMap::send_partitions_of(std::int64_t m) const {
  return std::count(send_to_message.begin(), send_to_message.end(), m);
}

Bytes partition_offset(std::int64_t index, std::int64_t n_partitions, Bytes buffer_bytes) {
  // floor(i*B/n) without forming i*B: i*q + floor(i*r/n), with i*r < n*n.
  const auto n = static_cast<Bytes>(n_partitions);
  const auto i = static_cast<Bytes>(index);
  return i * (buffer_bytes / n) + i * (buffer_bytes % n) / n;
}

std::vector<std::int64_t> partitions_to_messages(std::int64_t n_partitions,
                                                 std::int64_t base_messages,
                                                 const std::vector<std::int64_t>& group_starts) {
  if (base_messages < 1 || n_partitions % base_messages != 0)
    throw ProtocolError("partition count " + std::to_string(n_partitions) +
                        " is not a multiple of the base message count " +
                        std::to_string(base_messages));
  if (group_starts.size() < 2 || group_starts.front() != 0 ||
      group_starts.back() != base_messages ||
      !std::is_sorted(group_starts.begin(), group_starts.end()) ||
      std::adjacent_find(group_starts.begin(), group_starts.end()) != group_starts.end())
    throw ProtocolError("malformed message grouping");
  const std::int64_t per_base = n_partitions / base_messages;
  std::vector<std::int64_t> map(static_cast<std::size_t>(n_partitions));
  for (std::int64_t p = 0; p < n_partitions; ++p) {
    const std::int64_t base = p / per_base;
    const auto it = std::upper_bound(group_starts.begin(), group_starts.end(), base);
    map[static_cast<std::size_t>(p)] = static_cast<std::int64_t>(it - group_starts.begin()) - 1;
  }
  return map;
}

std::vector<Bytes> message_offsets(std::int64_t base_messages,
                                   const std::vector<std::int64_t>& group_starts,
                                   Bytes buffer_bytes) {
  std::vector<Bytes> out;
  out.reserve(group_starts.size());
  for (auto j : group_starts) out.push_back(partition_offset(j, base_messages, buffer_bytes));
  return out;
}

MessageMap map_partitions_to_messages(std::int64_t n_send, std::int64_t n_recv,
                                      Bytes buffer_bytes, Bytes aggr_threshold) {
  if (n_send < 1 || n_recv < 1) throw DomainError("partition counts must be >= 1");
  const std::int64_t g = std::gcd(n_send, n_recv);

  MessageMap map;
  map.base_messages = g;
  map.group_starts.push_back(0);
  Bytes group = 0;
  for (std::int64_t j = 0; j < g; ++j) {
    const Bytes size =
        partition_offset(j + 1, g, buffer_bytes) - partition_offset(j, g, buffer_bytes);
    if (j > 0 && aggr_threshold > 0 && group + size <= aggr_threshold) {
      group += size;
    } else {
      if (j > 0) map.group_starts.push_back(j);
      group = size;
    }
  }
  map.group_starts.push_back(g);
  map.n_messages = static_cast<std::int64_t>(map.group_starts.size()) - 1;
  map.offsets = message_offsets(g, map.group_starts, buffer_bytes);
  map.send_to_message = partitions_to_messages(n_send, g, map.group_starts);
  map.recv_to_message = partitions_to_messages(n_recv, g, map.group_starts);
  return map;
}

std::vector<int> assign_channels(std::int64_t n_messages, int n_channels) {
  if (n_channels < 1) throw DomainError("n_channels must be >= 1");
  std::vector<int> out(static_cast<std::size_t>(n_messages));
  for (std::int64_t i = 0; i < n_messages; ++i)
    out[static_cast<std::size_t>(i)] = static_cast<int>(i % n_channels);
  return out;
}

TagPlan::TagPlan(std::int64_t reserved_tag_space) : reserved_(reserved_tag_space) {
  if (reserved_ < 0) throw ConfigError("reserved_tag_space must be >= 0");
}

std::int64_t TagPlan::tags_in_use(simnet::Rank peer) const {
  auto it = blocks_.find(peer);
  if (it == blocks_.end()) return 0;
  std::int64_t used = 0;
  for (const auto& [base, len] : it->second) used += len;
  return used;
}

std::optional<simnet::Tag> TagPlan::allocate(simnet::Rank peer, std::int64_t n_tags) {
  if (n_tags < 1) return std::nullopt;
  auto& blocks = blocks_[peer];
  simnet::Tag cursor = 0;
  for (const auto& [base, len] : blocks) {
    if (base - cursor >= n_tags) break;
    cursor = base + len;
  }
  if (cursor + n_tags > reserved_) return std::nullopt;
  blocks.emplace(cursor, n_tags);
  return cursor;
}

void TagPlan::release(simnet::Rank peer, simnet::Tag base) {
  auto it = blocks_.find(peer);
  if (it != blocks_.end()) it->second.erase(base);
}

std::optional<simnet::Tag> allocate_tags(TagPlan& plan, std::int64_t n_messages,
                                         simnet::Rank peer) {
  return plan.allocate(peer, n_messages);
}

}  // namespace pcomm::partcomm
