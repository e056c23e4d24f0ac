#include "pcomm/partcomm.hpp"

#include <algorithm>
#include <string>

#include "pcomm/errors.hpp"

namespace pcomm::partcomm {

using simnet::MessageKind;
using simnet::SimMessage;

const char* to_string(SendMode m) {
  return m == SendMode::tag_matched ? "tag-matched" : "legacy-am";
}

namespace {

// RTS words: n_partitions, buffer_bytes, base tag (-1 = legacy), channels, request id.
constexpr std::size_t kRtsWords = 5;

std::string request_label(std::int64_t id) { return "psend #" + std::to_string(id); }

}  // namespace

PartitionedSend::PartitionedSend(simnet::Network& net, TagPlan& tags, simnet::Rank self,
                                 simnet::Rank peer, std::int64_t n_partitions,
                                 Bytes buffer_bytes, const PartConfig& cfg, Seconds init_time)
    : net_(net),
      tags_(tags),
      self_(self),
      peer_(peer),
      n_partitions_(n_partitions),
      buffer_bytes_(buffer_bytes),
      cfg_(cfg),
      id_(tags.next_request_id()) {
  if (n_partitions_ < 1) throw DomainError("n_partitions must be >= 1");
  if (cfg_.num_channels < 1 || cfg_.num_channels > net_.channels())
    throw ConfigError("num_channels must be in [1, network channels]");
  if (!cfg_.legacy_am) base_tag_ = allocate_tags(tags_, n_partitions_, peer_);
  mode_ = base_tag_ ? SendMode::tag_matched : SendMode::legacy_am;

  const auto n = static_cast<std::size_t>(n_partitions_);
  ready_called_.assign(n, false);
  ready_done_.assign(n, false);

  if (mode_ == SendMode::legacy_am) {
    // One active message covering the whole buffer; the CTS is the +1.
    layout_known_ = true;
    part_to_msg_.assign(n, 0);
    channel_of_msg_ = {0};
    msg_offsets_ = {0, buffer_bytes_};
    initial_counts_ = {n_partitions_ + 1};
    counters_ = std::make_unique<std::atomic<std::int64_t>[]>(1);
  }

  cts_pending_ = net_.open_obligation(request_label(id_) + ": CTS never arrived");
  net_.post_recv(self_, peer_, control_tag::cts(id_), 0, init_time,
                 [this](const simnet::ReceiveRecord& r) { on_cts(r); });

  SimMessage rts;
  rts.src = self_;
  rts.dst = peer_;
  rts.channel = 0;
  rts.tag = control_tag::kRts;
  rts.size = 0;
  rts.inject_time = init_time;
  rts.kind = MessageKind::control;
  rts.payload = {n_partitions_, static_cast<std::int64_t>(buffer_bytes_),
                 base_tag_ ? *base_tag_ : -1, cfg_.num_channels, id_};
  rts.label = request_label(id_) + " RTS";
  net_.post_message(std::move(rts));
}

PartitionedSend::~PartitionedSend() {
  if (base_tag_) tags_.release(peer_, *base_tag_);
}

std::vector<std::int64_t> PartitionedSend::counters() const {
  std::vector<std::int64_t> out;
  if (!counters_) return out;
  for (std::size_t m = 0; m < initial_counts_.size(); ++m)
    out.push_back(counters_[m].load(std::memory_order_acquire));
  return out;
}

void PartitionedSend::on_cts(const simnet::ReceiveRecord& r) {
  net_.fulfill(cts_pending_);
  if (!first_cts_time_) first_cts_time_ = net_.now();

  if (mode_ == SendMode::legacy_am) {
    if (active_ && counters_armed_) {
      decrement(0);
    } else {
      legacy_cts_pending_ = true;
    }
    return;
  }

  if (layout_known_) return;  // tag-matched requests get exactly one CTS
  const auto& w = r.payload;
  if (w.size() < 4) throw ProtocolError(request_label(id_) + ": truncated CTS");
  const std::int64_t n_messages = w[0];
  const std::int64_t base_messages = w[1];
  std::vector<std::int64_t> starts(w.begin() + 2, w.end());
  if (static_cast<std::int64_t>(starts.size()) != n_messages + 1)
    throw ProtocolError(request_label(id_) + ": CTS message count disagrees with layout");
  if (n_messages > n_partitions_)
    throw ProtocolError(request_label(id_) + ": more messages than reserved tags");

  part_to_msg_ = partitions_to_messages(n_partitions_, base_messages, starts);
  msg_offsets_ = message_offsets(base_messages, starts, buffer_bytes_);
  channel_of_msg_ = assign_channels(n_messages, cfg_.num_channels);
  initial_counts_.assign(static_cast<std::size_t>(n_messages), 0);
  for (auto m : part_to_msg_) ++initial_counts_[static_cast<std::size_t>(m)];
  counters_ = std::make_unique<std::atomic<std::int64_t>[]>(static_cast<std::size_t>(n_messages));
  layout_known_ = true;

  // Partitions readied before the CTS are replayed now, so deferred messages
  // leave at CTS arrival.
  if (active_) arm_counters();
}

void PartitionedSend::arm_counters() {
  const std::size_t n_messages = initial_counts_.size();
  for (std::size_t m = 0; m < n_messages; ++m)
    counters_[m].store(initial_counts_[m], std::memory_order_release);
  counters_armed_ = true;
  messages_.assign(n_messages, simnet::Transfer{});
  if (mode_ == SendMode::legacy_am && legacy_cts_pending_) {
    legacy_cts_pending_ = false;
    decrement(0);
  }
  for (std::int64_t p = 0; p < n_partitions_; ++p) {
    if (ready_done_[static_cast<std::size_t>(p)]) decrement(part_to_msg_[static_cast<std::size_t>(p)]);
  }
}

void PartitionedSend::start(Seconds when) {
  if (active_) throw LifecycleError(request_label(id_) + ": start before the previous wait");
  if (when < net_.now()) throw LifecycleError(request_label(id_) + ": start in the past");
  ++iteration_;
  active_ = true;
  counters_armed_ = false;
  injections_ = 0;
  std::fill(ready_called_.begin(), ready_called_.end(), false);
  std::fill(ready_done_.begin(), ready_done_.end(), false);
  partition_pending_.clear();
  for (std::int64_t p = 0; p < n_partitions_; ++p) {
    partition_pending_.push_back(net_.open_obligation(
        request_label(id_) + " iteration " + std::to_string(iteration_) + ": partition " +
        std::to_string(p) + " never marked ready"));
  }
  messages_.clear();

  if (mode_ == SendMode::legacy_am && iteration_ > 1) {
    cts_pending_ = net_.open_obligation(request_label(id_) + " iteration " +
                                        std::to_string(iteration_) + ": CTS never arrived");
    net_.post_recv(self_, peer_, control_tag::cts(id_), 0, when,
                   [this](const simnet::ReceiveRecord& r) { on_cts(r); });
  }
  if (layout_known_) arm_counters();
}

void PartitionedSend::pready(std::int64_t partition, Seconds ready_time) {
  if (!active_) throw LifecycleError(request_label(id_) + ": pready outside start/wait");
  if (partition < 0 || partition >= n_partitions_)
    throw DomainError(request_label(id_) + ": partition " + std::to_string(partition) +
                      " out of range");
  auto idx = static_cast<std::size_t>(partition);
  if (ready_called_[idx])
    throw UsageError(request_label(id_) + ": partition " + std::to_string(partition) +
                     " marked ready twice");
  ready_called_[idx] = true;
  net_.at(ready_time, [this, partition] { on_ready(partition); });
}

void PartitionedSend::on_ready(std::int64_t partition) {
  const auto idx = static_cast<std::size_t>(partition);
  ready_done_[idx] = true;
  net_.fulfill(partition_pending_[idx]);
  if (counters_armed_) decrement(part_to_msg_[idx]);
}

void PartitionedSend::decrement(std::int64_t message) {
  const auto prev =
      counters_[static_cast<std::size_t>(message)].fetch_sub(1, std::memory_order_acq_rel);
  if (prev <= 0) throw ProtocolError(request_label(id_) + ": counter underflow");
  if (prev == 1) inject(message);
}

void PartitionedSend::inject(std::int64_t message) {
  const auto m = static_cast<std::size_t>(message);
  SimMessage msg;
  msg.src = self_;
  msg.dst = peer_;
  msg.channel = channel_of_msg_[m];
  msg.tag = mode_ == SendMode::legacy_am ? control_tag::am_data(id_) : *base_tag_ + message;
  msg.size = msg_offsets_[m + 1] - msg_offsets_[m];
  msg.inject_time = net_.now();
  msg.kind = MessageKind::tagged;
  msg.label = request_label(id_) + " iteration " + std::to_string(iteration_) + " message " +
              std::to_string(message);
  messages_[m] = net_.post_message(std::move(msg));
  ++injections_;
}

Seconds PartitionedSend::wait() {
  if (!active_) throw LifecycleError(request_label(id_) + ": wait without start");
  net_.advance_until_idle();
  active_ = false;
  Seconds done = 0.0;
  for (const auto& t : messages_) done = std::max(done, t.send_complete_time());
  return done;
}

// ---------------------------------------------------------------------------

PartitionedRecv::PartitionedRecv(simnet::Network& net, simnet::Rank self, simnet::Rank peer,
                                 std::int64_t n_partitions, Bytes buffer_bytes,
                                 const PartConfig& cfg, Seconds init_time)
    : net_(net),
      self_(self),
      peer_(peer),
      n_partitions_(n_partitions),
      buffer_bytes_(buffer_bytes),
      cfg_(cfg) {
  if (n_partitions_ < 1) throw DomainError("n_partitions must be >= 1");
  net_.post_recv(self_, peer_, control_tag::kRts, 0, init_time,
                 [this](const simnet::ReceiveRecord& r) { on_rts(r); });
}

void PartitionedRecv::on_rts(const simnet::ReceiveRecord& r) {
  const auto& w = r.payload;
  if (w.size() != kRtsWords) throw ProtocolError("precv: malformed RTS");
  const std::int64_t n_send = w[0];
  const auto sender_bytes = static_cast<Bytes>(w[1]);
  const simnet::Tag base = w[2];
  const int channels = static_cast<int>(w[3]);
  request_ = w[4];
  if (sender_bytes != buffer_bytes_) {
    throw ProtocolError("precv: RTS announces " + std::to_string(sender_bytes) +
                        " B but the receive buffer holds " + std::to_string(buffer_bytes_) +
                        " B");
  }

  if (base < 0) {
    mode_ = SendMode::legacy_am;
    layout_.n_messages = 1;
    layout_.base_messages = 1;
    layout_.group_starts = {0, 1};
    layout_.offsets = {0, buffer_bytes_};
    layout_.send_to_message.assign(static_cast<std::size_t>(n_send), 0);
    layout_.recv_to_message.assign(static_cast<std::size_t>(n_partitions_), 0);
    channel_of_msg_ = {0};
  } else {
    mode_ = SendMode::tag_matched;
    base_tag_ = base;
    layout_ = map_partitions_to_messages(n_send, n_partitions_, buffer_bytes_, cfg_.part_aggr_size);
    channel_of_msg_ = assign_channels(layout_.n_messages, channels);
  }
  layout_known_ = true;
  if (active_) post_receives(net_.now());
  send_cts(net_.now());
}

void PartitionedRecv::post_receives(Seconds when) {
  recvs_.clear();
  for (std::int64_t m = 0; m < layout_.n_messages; ++m) {
    const simnet::Tag tag =
        mode_ == SendMode::legacy_am ? control_tag::am_data(request_) : base_tag_ + m;
    recvs_.push_back(
        net_.post_recv(self_, peer_, tag, channel_of_msg_[static_cast<std::size_t>(m)], when));
  }
}

void PartitionedRecv::send_cts(Seconds when) {
  SimMessage cts;
  cts.src = self_;
  cts.dst = peer_;
  cts.channel = 0;
  cts.tag = control_tag::cts(request_);
  cts.size = 0;
  cts.inject_time = when;
  cts.kind = MessageKind::control;
  cts.payload = {layout_.n_messages, layout_.base_messages};
  cts.payload.insert(cts.payload.end(), layout_.group_starts.begin(), layout_.group_starts.end());
  cts.label = "precv CTS for psend #" + std::to_string(request_);
  net_.post_message(std::move(cts));
}

void PartitionedRecv::start(Seconds when) {
  if (active_) throw LifecycleError("precv: start before the previous wait");
  if (when < net_.now()) throw LifecycleError("precv: start in the past");
  ++iteration_;
  active_ = true;
  recvs_.clear();
  if (layout_known_) {
    post_receives(when);
    if (mode_ == SendMode::legacy_am && iteration_ > 1) send_cts(when);
  }
}

bool PartitionedRecv::parrived(std::int64_t partition) const {
  return arrival_time(partition).has_value();
}

std::optional<Seconds> PartitionedRecv::arrival_time(std::int64_t partition) const {
  if (iteration_ == 0) throw LifecycleError("precv: parrived before start");
  if (partition < 0 || partition >= n_partitions_)
    throw DomainError("precv: partition " + std::to_string(partition) + " out of range");
  if (!layout_known_ || recvs_.empty()) return std::nullopt;
  const auto m = layout_.recv_to_message[static_cast<std::size_t>(partition)];
  const auto& r = recvs_[static_cast<std::size_t>(m)];
  if (!r.completed()) return std::nullopt;
  return r.completion_time();
}

Seconds PartitionedRecv::wait() {
  if (!active_) throw LifecycleError("precv: wait without start");
  net_.advance_until_idle();
  active_ = false;
  Seconds done = 0.0;
  for (const auto& r : recvs_) done = std::max(done, r.completion_time());
  return done;
}

std::unique_ptr<PartitionedSend> psend_init(simnet::Network& net, TagPlan& tags,
                                            simnet::Rank self, simnet::Rank peer,
                                            std::int64_t n_partitions, Bytes buffer_bytes,
                                            const PartConfig& cfg, Seconds init_time) {
  return std::make_unique<PartitionedSend>(net, tags, self, peer, n_partitions, buffer_bytes,
                                           cfg, init_time);
}

std::unique_ptr<PartitionedRecv> precv_init(simnet::Network& net, simnet::Rank self,
                                            simnet::Rank peer, std::int64_t n_partitions,
                                            Bytes buffer_bytes, const PartConfig& cfg,
                                            Seconds init_time) {
  return std::make_unique<PartitionedRecv>(net, self, peer, n_partitions, buffer_bytes, cfg,
                                           init_time);
}

}  // namespace pcomm::partcomm
