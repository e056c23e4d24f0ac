#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "pcomm/simnet.hpp"
#include "pcomm/units.hpp"

namespace pcomm::partcomm {

// Wire layout agreed by both sides of a partitioned request.
//
// Partition i of n covers bytes [floor(i*B/n), floor((i+1)*B/n)). With
// g = gcd(n_send, n_recv) every base message is a union of whole partitions
// on both sides, so a partition never straddles two messages.
struct MessageMap {
  std::int64_t n_messages = 0;
  std::int64_t base_messages = 0;             // gcd(n_send, n_recv)
  std::vector<std::int64_t> group_starts;     // n_messages + 1, in base messages
  std::vector<std::int64_t> send_to_message;  // sender partition -> message
  std::vector<std::int64_t> recv_to_message;  // receiver partition -> message
  std::vector<Bytes> offsets;                 // n_messages + 1 byte boundaries

  Bytes message_bytes(std::int64_t m) const {
    return offsets[static_cast<std::size_t>(m + 1)] - offsets[static_cast<std::size_t>(m)];
  }
  // Number of sender partitions feeding message m.
  std::int64_t send_partitions_of(std::int64_t m) const;
};

Bytes partition_offset(std::int64_t index, std::int64_t n_partitions, Bytes buffer_bytes);

// A threshold of 0 disables aggregation (n_messages = gcd). Otherwise
// adjacent base messages are merged left to right while the merged size
// stays <= aggr_threshold.
MessageMap map_partitions_to_messages(std::int64_t n_send, std::int64_t n_recv,
                                      Bytes buffer_bytes, Bytes aggr_threshold);

// Partition -> message lookup for one side, given the base message count and
// the group boundaries (what the CTS carries). n_partitions must be a
// multiple of base_messages.
std::vector<std::int64_t> partitions_to_messages(std::int64_t n_partitions,
                                                 std::int64_t base_messages,
                                                 const std::vector<std::int64_t>& group_starts);

std::vector<Bytes> message_offsets(std::int64_t base_messages,
                                   const std::vector<std::int64_t>& group_starts,
                                   Bytes buffer_bytes);

// Message i goes to channel i mod n_channels.
std::vector<int> assign_channels(std::int64_t n_messages, int n_channels);

// Per-peer tag space reserved for partitioned traffic. Each request takes a
// contiguous block; when no block fits, the caller falls back to the
// single-message active-message path.
class TagPlan {
 public:
  explicit TagPlan(std::int64_t reserved_tag_space = 4096);

  std::int64_t reserved_tag_space() const { return reserved_; }
  std::int64_t tags_in_use(simnet::Rank peer) const;

  // First-fit block of n_tags tags; nullopt means fallback.
  std::optional<simnet::Tag> allocate(simnet::Rank peer, std::int64_t n_tags);
  void release(simnet::Rank peer, simnet::Tag base);

  // Request ids name the control traffic (RTS, CTS, AM data) of a request.
  std::int64_t next_request_id() { return next_request_++; }

 private:
  std::int64_t reserved_;
  std::int64_t next_request_ = 0;
  std::map<simnet::Rank, std::map<simnet::Tag, std::int64_t>> blocks_;  // base -> len
};

std::optional<simnet::Tag> allocate_tags(TagPlan& plan, std::int64_t n_messages,
                                         simnet::Rank peer);

// Internal control tags live below zero, away from the reserved block.
namespace control_tag {
inline constexpr simnet::Tag kRts = -1;
inline constexpr simnet::Tag cts(std::int64_t request) { return -2 - 2 * request; }
inline constexpr simnet::Tag am_data(std::int64_t request) { return -3 - 2 * request; }
}  // namespace control_tag

}  // namespace pcomm::partcomm
