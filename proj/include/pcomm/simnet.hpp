#pragma once

// Deterministic discrete-event transport between simulated ranks.
//
// A message first waits for its sending channel (per-rank, per-channel FIFO,
// busy for injection_overhead per message), then for the shared wire of its
// direction (busy for size / bandwidth), then pays its protocol latency.
// Tagged messages at or above the rendezvous threshold additionally wait for
// the matching receive and one rendezvous round-trip before using the wire.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "pcomm/units.hpp"

namespace pcomm::simnet {

using Rank = int;
using Tag = std::int64_t;

enum class MessageKind { tagged, put, control };
enum class Regime { short_eager, bcopy, zcopy };

const char* to_string(MessageKind k);
const char* to_string(Regime r);

struct TimingModel {
  BytesPerSecond bandwidth = 25e9;
  Seconds latency_short = 1.22e-6;
  Seconds latency_bcopy = 1.8e-6;
  Seconds latency_zcopy = 1.22e-6;
  Seconds rendezvous_rtt = 2.44e-6;
  Bytes short_threshold = 2048;
  Bytes rendezvous_threshold = 16384;
  // Calibration knobs, not measured values.
  Seconds injection_overhead = 1.0e-6;
  Seconds put_discount = 0.3e-6;

  void validate() const;
  Regime regime(Bytes size) const;

  // All latencies and the injection overhead set to zero; the wire is then
  // purely bandwidth-bound.
  TimingModel without_latency() const;
};

// Latency part of transfer_time, i.e. everything except size / bandwidth.
Seconds latency_term(const TimingModel& t, Bytes size, MessageKind kind);

// Unloaded point-to-point cost of one message, excluding injection overhead.
Seconds transfer_time(const TimingModel& t, Bytes size, MessageKind kind);

struct SimMessage {
  Rank src = 0;
  Rank dst = 1;
  int channel = 0;
  std::optional<Tag> tag;  // none for one-sided puts
  Bytes size = 0;
  Seconds inject_time = 0.0;
  MessageKind kind = MessageKind::tagged;
  std::vector<std::int64_t> payload;  // control words (RTS/CTS contents)
  std::string label;
};

struct TransferRecord {
  std::uint64_t id = 0;
  SimMessage msg;
  bool rendezvous = false;
  std::optional<Seconds> inject_start;
  std::optional<Seconds> injected;
  std::optional<Seconds> matched;
  std::optional<Seconds> wire_start;
  std::optional<Seconds> send_complete;
  std::optional<Seconds> delivered;
};

struct ReceiveRecord {
  std::uint64_t id = 0;
  Rank rank = 1;
  Rank src = 0;
  Tag tag = 0;
  int channel = 0;
  Seconds post_time = 0.0;
  std::optional<Seconds> completed;
  std::optional<std::uint64_t> transfer_id;
  std::vector<std::int64_t> payload;  // copied from the matched message
};

using TransferCallback = std::function<void(const TransferRecord&)>;
using ReceiveCallback = std::function<void(const ReceiveRecord&)>;

struct TransferCallbacks {
  TransferCallback on_send_complete;
  TransferCallback on_delivered;
};

// Observable view of a posted message.
class Transfer {
 public:
  Transfer() = default;
  const TransferRecord& record() const { return *rec_; }
  std::uint64_t id() const { return rec_->id; }
  bool send_completed() const { return rec_->send_complete.has_value(); }
  bool delivered() const { return rec_->delivered.has_value(); }
  Seconds send_complete_time() const { return rec_->send_complete.value(); }
  Seconds delivery_time() const { return rec_->delivered.value(); }
  explicit operator bool() const { return rec_ != nullptr; }

 private:
  friend class Network;
  explicit Transfer(std::shared_ptr<const TransferRecord> r) : rec_(std::move(r)) {}
  std::shared_ptr<const TransferRecord> rec_;
};

// Observable view of a posted receive.
class Receive {
 public:
  Receive() = default;
  const ReceiveRecord& record() const { return *rec_; }
  bool completed() const { return rec_->completed.has_value(); }
  Seconds completion_time() const { return rec_->completed.value(); }
  explicit operator bool() const { return rec_ != nullptr; }

 private:
  friend class Network;
  explicit Receive(std::shared_ptr<const ReceiveRecord> r) : rec_(std::move(r)) {}
  std::shared_ptr<const ReceiveRecord> rec_;
};

// Bookkeeping for work the network itself cannot see (a counter that still
// waits for partitions). Unfulfilled obligations are reported as stuck.
class Obligation {
 public:
  Obligation() = default;
  bool fulfilled() const { return state_ && state_->done; }
  explicit operator bool() const { return state_ != nullptr; }

 private:
  friend class Network;
  struct State {
    std::string label;
    bool done = false;
  };
  std::shared_ptr<State> state_;
};

class EventQueue {
 public:
  using Action = std::function<void()>;

  Seconds clock() const { return clock_; }
  bool empty() const { return heap_.empty(); }
  std::size_t size() const { return heap_.size(); }

  // Throws ConfigError when `at` lies in the past.
  void schedule(Seconds at, Action action);

  // Pops and runs the earliest event. Returns false when empty.
  bool step();

 private:
  struct Entry {
    Seconds time;
    std::uint64_t seq;
    Action action;
  };
  struct Later {
    bool operator()(const Entry& a, const Entry& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  Seconds clock_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::vector<Entry> heap_;  // min-heap under Later
};

enum class TraceKind {
  inject_start,
  injected,
  matched,
  wire_start,
  send_complete,
  delivered,
  recv_posted,
  recv_completed,
};

const char* to_string(TraceKind k);

struct TraceEvent {
  Seconds time = 0.0;
  TraceKind kind = TraceKind::inject_start;
  std::uint64_t id = 0;  // transfer id, or receive id for recv_* events
  int channel = 0;
  Bytes size = 0;
  MessageKind msg_kind = MessageKind::tagged;

  bool operator==(const TraceEvent&) const = default;
};

class Network {
 public:
  Network(TimingModel timing, int n_channels, int n_ranks = 2);

  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;

  Seconds now() const { return queue_.clock(); }
  const TimingModel& timing() const { return timing_; }
  int channels() const { return n_channels_; }
  int ranks() const { return n_ranks_; }

  // Requires msg.inject_time >= now(). Throws ConfigError on an unknown
  // rank or channel, a tagged/control message without tag, or a sized
  // control message.
  Transfer post_message(SimMessage msg, TransferCallbacks callbacks = {});

  // Receive for (src, tag, channel) at `rank`, becoming active at post_time.
  // Matching is FIFO per (src, tag, channel) on both sides.
  Receive post_recv(Rank rank, Rank src, Tag tag, int channel, Seconds post_time,
                    ReceiveCallback on_complete = {});

  // Runs `action` at simulated time `time` (used by actors).
  void at(Seconds time, std::function<void()> action);

  Obligation open_obligation(std::string label);
  void fulfill(Obligation& ob);

  // Processes every pending event. Throws DeadlockError when the queue drains
  // while receives, rendezvous sends or obligations are still outstanding.
  Seconds advance_until_idle();

  const std::vector<TraceEvent>& trace() const { return trace_; }
  const std::vector<std::shared_ptr<TransferRecord>>& transfers() const { return transfers_; }

 private:
  struct RecvSlot {
    std::shared_ptr<ReceiveRecord> rec;
    ReceiveCallback on_complete;
  };
  struct TransferSlot {
    std::shared_ptr<TransferRecord> rec;
    TransferCallbacks callbacks;
  };
  using MatchKey = std::tuple<Rank, Rank, Tag, int>;  // (dst, src, tag, channel)

  void check_rank(Rank r) const;
  void enqueue_on_channel(std::size_t slot);
  void on_injected(std::size_t slot);
  void reserve_wire(std::size_t slot, Seconds ready);
  void on_wire_done(std::size_t slot);
  void on_delivered(std::size_t slot);
  void on_recv_posted(std::size_t recv);
  void start_rendezvous(std::size_t slot, std::size_t recv);
  void complete_recv(std::size_t recv, std::size_t slot);
  void record(TraceKind kind, std::uint64_t id, const SimMessage& m);
  static MatchKey key_of(const SimMessage& m);

  TimingModel timing_;
  int n_channels_;
  int n_ranks_;
  EventQueue queue_;

  std::vector<std::shared_ptr<TransferRecord>> transfers_;
  std::vector<TransferSlot> slots_;
  std::vector<RecvSlot> recvs_;
  std::vector<std::shared_ptr<Obligation::State>> obligations_;

  std::map<std::pair<Rank, int>, Seconds> channel_free_;
  std::map<std::pair<Rank, Rank>, Seconds> wire_free_;
  std::map<MatchKey, std::deque<std::size_t>> posted_;      // recv indices
  std::map<MatchKey, std::deque<std::size_t>> unexpected_;  // transfer slots
  std::map<std::size_t, std::size_t> rendezvous_match_;     // slot -> recv

  std::vector<TraceEvent> trace_;
};

}  // namespace pcomm::simnet
