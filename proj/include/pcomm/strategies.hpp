#pragma once

// The seven ways of shipping N*theta partitions from rank 0 to rank 1,
// each following the benchmark template init / start / compute+ready / wait.
// Communicator duplicates, windows and VCIs all collapse to channel choice.

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pcomm/partcomm.hpp"
#include "pcomm/simnet.hpp"

namespace pcomm::strategies {

enum class StrategyKind {
  part,
  p2p_single,
  p2p_multi,
  rma_passive_single,
  rma_passive_multi,
  rma_active_single,
  rma_active_multi,
};

const char* to_string(StrategyKind k);
std::optional<StrategyKind> parse_strategy(std::string_view name);
const std::vector<StrategyKind>& all_strategies();

struct StrategySpec {
  StrategyKind kind = StrategyKind::part;
  std::int64_t n_threads = 1;
  std::int64_t partitions_per_thread = 1;
  Bytes buffer_bytes = 0;
  int channels = 1;
  // Only read by the part strategy; num_channels is taken from `channels`.
  partcomm::PartConfig part;

  std::int64_t total_partitions() const { return n_threads * partitions_per_thread; }
  partcomm::PartConfig part_config() const;
  void validate() const;
};

// Partitions are handed to threads round-robin: partition p belongs to
// thread p mod N.
inline std::int64_t owner_thread(std::int64_t partition, std::int64_t n_threads) {
  return partition % n_threads;
}

struct MessageTrace {
  std::uint64_t id = 0;
  simnet::MessageKind kind = simnet::MessageKind::tagged;
  int channel = 0;
  Bytes size = 0;
  Seconds posted = 0.0;        // time the operation was issued
  Seconds inject_start = 0.0;  // channel acquired
  Seconds delivered = 0.0;
  std::string label;

  bool is_data() const { return kind != simnet::MessageKind::control; }
};

struct IterationTrace {
  std::int64_t iteration = 0;
  Seconds start_time = 0.0;
  std::vector<Seconds> ready_times;  // absolute
  std::vector<MessageTrace> messages;
  Seconds sender_done = 0.0;
  Seconds receiver_done = 0.0;
  // Start to receiver completion, minus the longest compute offset.
  Seconds elapsed = 0.0;

  std::int64_t data_messages() const;
  std::int64_t control_messages() const;
};

struct MessageCount {
  std::int64_t data = 0;
  std::int64_t control = 0;
};

// Wire traffic of one iteration. `first_iteration` adds the RTS/CTS handshake
// of the part strategy.
MessageCount strategy_message_count(const StrategySpec& spec, bool first_iteration = false);

// A strategy bound to its own network. Construction performs the init
// column (for part: psend_init/precv_init at t = 0). Iterations run in lock
// step: each starts once the previous one has completed on both sides.
class StrategySession {
 public:
  StrategySession(StrategySpec spec, const simnet::TimingModel& timing);
  ~StrategySession();

  StrategySession(const StrategySession&) = delete;
  StrategySession& operator=(const StrategySession&) = delete;

  // ready_offsets[p] is the compute time before partition p is ready,
  // measured from the end of the sender's start step.
  IterationTrace run_iteration(std::span<const Seconds> ready_offsets);

  const StrategySpec& spec() const { return spec_; }
  simnet::Network& network() { return net_; }
  const simnet::Network& network() const { return net_; }

  // Non-null for the part strategy only.
  const partcomm::PartitionedSend* part_sender() const { return send_.get(); }
  const partcomm::PartitionedRecv* part_receiver() const { return recv_.get(); }

 private:
  struct Outcome {
    Seconds sender_done = 0.0;
    Seconds receiver_done = 0.0;
    Seconds compute_origin = 0.0;  // when the sender's compute phase began
  };

  Outcome run_part(Seconds t0, std::span<const Seconds> off);
  Outcome run_p2p_single(Seconds t0, std::span<const Seconds> off);
  Outcome run_p2p_multi(Seconds t0, std::span<const Seconds> off);
  Outcome run_rma_epoch(Seconds t0, std::span<const Seconds> off, bool multi_window,
                        simnet::Tag open_tag, simnet::Tag close_tag);
  Outcome run_rma_active_multi(Seconds t0, std::span<const Seconds> off);

  Bytes partition_bytes(std::int64_t p) const;
  int thread_channel(std::int64_t p) const;
  int window_channel(std::int64_t p) const;

  StrategySpec spec_;
  simnet::Network net_;
  partcomm::TagPlan tags_;
  std::unique_ptr<partcomm::PartitionedSend> send_;
  std::unique_ptr<partcomm::PartitionedRecv> recv_;
  std::int64_t iteration_ = 0;
  std::size_t traced_upto_ = 0;
};

}  // namespace pcomm::strategies
