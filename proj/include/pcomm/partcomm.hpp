#pragma once

// Partitioned point-to-point requests on top of simnet.
//
// Init: the sender posts a 0-byte RTS carrying its partition count, buffer
// size, base tag and channel count. The receiver decides the wire layout
// (gcd of both partition counts, then aggregation under part_aggr_size),
// pre-posts one receive per wire message and answers with a CTS carrying
// the layout. Each wire message owns a counter initialized to the number of
// sender partitions feeding it; the pready that brings it to zero injects
// the message. Tag-matched requests need the CTS only on the first
// iteration. When no tag block is left (or legacy_am is forced) the request
// degrades to one active message per iteration whose counter starts at
// n_partitions + 1, the extra unit being that iteration's CTS.

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "pcomm/mapping.hpp"
#include "pcomm/simnet.hpp"

namespace pcomm::partcomm {

struct PartConfig {
  Bytes part_aggr_size = 0;  // 0 disables aggregation
  int num_channels = 1;
  std::int64_t reserved_tag_space = 4096;
  bool legacy_am = false;
};

enum class SendMode { tag_matched, legacy_am };

const char* to_string(SendMode m);

class PartitionedSend {
 public:
  PartitionedSend(simnet::Network& net, TagPlan& tags, simnet::Rank self, simnet::Rank peer,
                  std::int64_t n_partitions, Bytes buffer_bytes, const PartConfig& cfg,
                  Seconds init_time);
  ~PartitionedSend();

  PartitionedSend(const PartitionedSend&) = delete;
  PartitionedSend& operator=(const PartitionedSend&) = delete;

  void start(Seconds when);
  // Marks `partition` ready at simulated time ready_time (>= now).
  void pready(std::int64_t partition, Seconds ready_time);
  // Drives the network to idle; returns the last send completion.
  Seconds wait();

  SendMode mode() const { return mode_; }
  std::int64_t id() const { return id_; }
  std::optional<simnet::Tag> base_tag() const { return base_tag_; }
  std::int64_t n_partitions() const { return n_partitions_; }
  Bytes buffer_bytes() const { return buffer_bytes_; }
  bool cts_received() const { return layout_known_; }
  std::optional<Seconds> first_cts_time() const { return first_cts_time_; }
  std::int64_t iteration() const { return iteration_; }
  // 0 until the first CTS arrives.
  std::int64_t n_messages() const { return static_cast<std::int64_t>(initial_counts_.size()); }
  const std::vector<std::int64_t>& partition_to_message() const { return part_to_msg_; }
  const std::vector<int>& channel_of_message() const { return channel_of_msg_; }
  // Initial counter value per message for an iteration.
  const std::vector<std::int64_t>& initial_counters() const { return initial_counts_; }
  std::vector<std::int64_t> counters() const;
  // Messages injected in the current iteration, indexed by message.
  const std::vector<simnet::Transfer>& messages() const { return messages_; }
  std::int64_t injections_this_iteration() const { return injections_; }

 private:
  void on_cts(const simnet::ReceiveRecord& r);
  void on_ready(std::int64_t partition);
  void decrement(std::int64_t message);
  void inject(std::int64_t message);
  void arm_counters();

  simnet::Network& net_;
  TagPlan& tags_;
  simnet::Rank self_;
  simnet::Rank peer_;
  std::int64_t n_partitions_;
  Bytes buffer_bytes_;
  PartConfig cfg_;
  std::int64_t id_;
  SendMode mode_ = SendMode::tag_matched;
  std::optional<simnet::Tag> base_tag_;

  bool layout_known_ = false;
  std::optional<Seconds> first_cts_time_;
  std::vector<std::int64_t> part_to_msg_;
  std::vector<int> channel_of_msg_;
  std::vector<Bytes> msg_offsets_;
  std::vector<std::int64_t> initial_counts_;
  std::unique_ptr<std::atomic<std::int64_t>[]> counters_;

  std::int64_t iteration_ = 0;
  bool active_ = false;
  bool counters_armed_ = false;
  bool legacy_cts_pending_ = false;  // CTS arrived before start
  std::int64_t injections_ = 0;
  std::vector<bool> ready_called_;
  std::vector<bool> ready_done_;
  std::vector<simnet::Obligation> partition_pending_;
  simnet::Obligation cts_pending_;
  std::vector<simnet::Transfer> messages_;
};

class PartitionedRecv {
 public:
  PartitionedRecv(simnet::Network& net, simnet::Rank self, simnet::Rank peer,
                  std::int64_t n_partitions, Bytes buffer_bytes, const PartConfig& cfg,
                  Seconds init_time);

  PartitionedRecv(const PartitionedRecv&) = delete;
  PartitionedRecv& operator=(const PartitionedRecv&) = delete;

  void start(Seconds when);
  // True once the wire message covering `partition` has been received in the
  // current iteration, as of the current simulated time.
  bool parrived(std::int64_t partition) const;
  std::optional<Seconds> arrival_time(std::int64_t partition) const;
  // Drives the network to idle; returns the last message arrival.
  Seconds wait();

  SendMode mode() const { return mode_; }
  bool rts_received() const { return layout_known_; }
  std::int64_t iteration() const { return iteration_; }
  std::int64_t n_messages() const { return layout_.n_messages; }
  const MessageMap& layout() const { return layout_; }
  const std::vector<int>& channel_of_message() const { return channel_of_msg_; }
  Bytes aggregation_threshold() const { return cfg_.part_aggr_size; }
  const std::vector<simnet::Receive>& receives() const { return recvs_; }

 private:
  void on_rts(const simnet::ReceiveRecord& r);
  void post_receives(Seconds when);
  void send_cts(Seconds when);

  simnet::Network& net_;
  simnet::Rank self_;
  simnet::Rank peer_;
  std::int64_t n_partitions_;
  Bytes buffer_bytes_;
  PartConfig cfg_;

  bool layout_known_ = false;
  SendMode mode_ = SendMode::tag_matched;
  std::int64_t request_ = -1;
  simnet::Tag base_tag_ = 0;
  MessageMap layout_;
  std::vector<int> channel_of_msg_;

  std::int64_t iteration_ = 0;
  bool active_ = false;
  std::vector<simnet::Receive> recvs_;
};

std::unique_ptr<PartitionedSend> psend_init(simnet::Network& net, TagPlan& tags,
                                            simnet::Rank self, simnet::Rank peer,
                                            std::int64_t n_partitions, Bytes buffer_bytes,
                                            const PartConfig& cfg, Seconds init_time);

std::unique_ptr<PartitionedRecv> precv_init(simnet::Network& net, simnet::Rank self,
                                            simnet::Rank peer, std::int64_t n_partitions,
                                            Bytes buffer_bytes, const PartConfig& cfg,
                                            Seconds init_time);

}  // namespace pcomm::partcomm
