#include "pcomm/strategies.hpp"

#include <algorithm>
#include <memory>
#include <string>

#include "pcomm/errors.hpp"

namespace pcomm::strategies {

using simnet::MessageKind;
using simnet::SimMessage;

namespace {

constexpr simnet::Rank kSender = 0;
constexpr simnet::Rank kReceiver = 1;

// Synchronization tags of the one-sided strategies.
constexpr simnet::Tag kExposure = -(simnet::Tag{1} << 40);
constexpr simnet::Tag kEpochDone = kExposure - 1;
constexpr simnet::Tag kPostBase = kExposure - (simnet::Tag{1} << 20);
constexpr simnet::Tag kCompleteBase = kExposure - (simnet::Tag{1} << 30);

struct Named {
  StrategyKind kind;
  const char* name;
};

constexpr Named kNames[] = {
    {StrategyKind::part, "part"},
    {StrategyKind::p2p_single, "p2p-single"},
    {StrategyKind::p2p_multi, "p2p-multi"},
    {StrategyKind::rma_passive_single, "rma-passive-single"},
    {StrategyKind::rma_passive_multi, "rma-passive-multi"},
    {StrategyKind::rma_active_single, "rma-active-single"},
    {StrategyKind::rma_active_multi, "rma-active-multi"},
};

SimMessage make_message(simnet::Rank src, simnet::Rank dst, int channel,
                        std::optional<simnet::Tag> tag, Bytes size, Seconds when,
                        MessageKind kind, std::string label) {
  SimMessage m;
  m.src = src;
  m.dst = dst;
  m.channel = channel;
  m.tag = tag;
  m.size = size;
  m.inject_time = when;
  m.kind = kind;
  m.label = std::move(label);
  return m;
}

}  // namespace

const char* to_string(StrategyKind k) {
  for (const auto& n : kNames)
    if (n.kind == k) return n.name;
  return "?";
}

std::optional<StrategyKind> parse_strategy(std::string_view name) {
  for (const auto& n : kNames)
    if (name == n.name) return n.kind;
  return std::nullopt;
}

const std::vector<StrategyKind>& all_strategies() {
  static const std::vector<StrategyKind> all = [] {
    std::vector<StrategyKind> v;
    for (const auto& n : kNames) v.push_back(n.kind);
    return v;
  }();
  return all;
}

partcomm::PartConfig StrategySpec::part_config() const {
  partcomm::PartConfig cfg = part;
  cfg.num_channels = channels;
  return cfg;
}

void StrategySpec::validate() const {
  if (n_threads < 1) throw ConfigError("n_threads must be >= 1");
  if (partitions_per_thread < 1) throw ConfigError("partitions_per_thread must be >= 1");
  if (channels < 1) throw ConfigError("channels must be >= 1");
}

std::int64_t IterationTrace::data_messages() const {
  return std::count_if(messages.begin(), messages.end(),
                       [](const MessageTrace& m) { return m.is_data(); });
}

std::int64_t IterationTrace::control_messages() const {
  return static_cast<std::int64_t>(messages.size()) - data_messages();
}

MessageCount strategy_message_count(const StrategySpec& spec, bool first_iteration) {
  const std::int64_t n = spec.total_partitions();
  switch (spec.kind) {
    case StrategyKind::p2p_single: return {1, 0};
    case StrategyKind::p2p_multi: return {n, 0};
    case StrategyKind::rma_passive_single:
    case StrategyKind::rma_passive_multi:
    case StrategyKind::rma_active_single: return {n, 2};
    case StrategyKind::rma_active_multi: return {n, 2 * n};
    case StrategyKind::part: {
      const auto cfg = spec.part_config();
      const bool legacy = cfg.legacy_am || cfg.reserved_tag_space < n;
      if (legacy) return {1, first_iteration ? 2 : 1};
      const auto map =
          partcomm::map_partitions_to_messages(n, n, spec.buffer_bytes, cfg.part_aggr_size);
      return {map.n_messages, first_iteration ? 2 : 0};
    }
  }
  return {};
}

// ---------------------------------------------------------------------------

StrategySession::StrategySession(StrategySpec spec, const simnet::TimingModel& timing)
    : spec_(std::move(spec)),
      net_(timing, spec_.channels),
      tags_(spec_.part.reserved_tag_space) {
  spec_.validate();
  if (spec_.kind == StrategyKind::part) {
    const auto cfg = spec_.part_config();
    const auto n = spec_.total_partitions();
    recv_ = partcomm::precv_init(net_, kReceiver, kSender, n, spec_.buffer_bytes, cfg, 0.0);
    send_ =
        partcomm::psend_init(net_, tags_, kSender, kReceiver, n, spec_.buffer_bytes, cfg, 0.0);
  }
}

StrategySession::~StrategySession() = default;

Bytes StrategySession::partition_bytes(std::int64_t p) const {
  const auto n = spec_.total_partitions();
  return partcomm::partition_offset(p + 1, n, spec_.buffer_bytes) -
         partcomm::partition_offset(p, n, spec_.buffer_bytes);
}

int StrategySession::thread_channel(std::int64_t p) const {
  return static_cast<int>(owner_thread(p, spec_.n_threads) % spec_.channels);
}

int StrategySession::window_channel(std::int64_t p) const {
  return static_cast<int>(p % spec_.channels);
}

IterationTrace StrategySession::run_iteration(std::span<const Seconds> ready_offsets) {
  const auto n = spec_.total_partitions();
  if (static_cast<std::int64_t>(ready_offsets.size()) != n)
    throw ConfigError("need one ready offset per partition (" + std::to_string(n) + ")");
  for (Seconds o : ready_offsets)
    if (o < 0) throw ConfigError("ready offsets must be >= 0");

  const Seconds t0 = net_.now();
  ++iteration_;

  Outcome out;
  switch (spec_.kind) {
    case StrategyKind::part: out = run_part(t0, ready_offsets); break;
    case StrategyKind::p2p_single: out = run_p2p_single(t0, ready_offsets); break;
    case StrategyKind::p2p_multi: out = run_p2p_multi(t0, ready_offsets); break;
    case StrategyKind::rma_passive_single:
      out = run_rma_epoch(t0, ready_offsets, false, kExposure, kEpochDone);
      break;
    case StrategyKind::rma_passive_multi:
      out = run_rma_epoch(t0, ready_offsets, true, kExposure, kEpochDone);
      break;
    case StrategyKind::rma_active_single:
      out = run_rma_epoch(t0, ready_offsets, false, kPostBase, kCompleteBase);
      break;
    case StrategyKind::rma_active_multi: out = run_rma_active_multi(t0, ready_offsets); break;
  }

  IterationTrace trace;
  trace.iteration = iteration_;
  trace.start_time = t0;
  for (Seconds o : ready_offsets) trace.ready_times.push_back(out.compute_origin + o);
  const auto& transfers = net_.transfers();
  for (std::size_t i = traced_upto_; i < transfers.size(); ++i) {
    const auto& t = *transfers[i];
    trace.messages.push_back(MessageTrace{t.id, t.msg.kind, t.msg.channel, t.msg.size,
                                          t.msg.inject_time, t.inject_start.value(),
                                          t.delivered.value(), t.msg.label});
  }
  traced_upto_ = transfers.size();
  trace.sender_done = out.sender_done;
  trace.receiver_done = out.receiver_done;
  const Seconds longest = *std::max_element(ready_offsets.begin(), ready_offsets.end());
  trace.elapsed = out.receiver_done - t0 - longest;
  return trace;
}

StrategySession::Outcome StrategySession::run_part(Seconds t0, std::span<const Seconds> off) {
  recv_->start(t0);
  send_->start(t0);
  for (std::size_t p = 0; p < off.size(); ++p)
    send_->pready(static_cast<std::int64_t>(p), t0 + off[p]);
  Outcome out;
  out.compute_origin = t0;
  out.sender_done = send_->wait();
  out.receiver_done = recv_->wait();
  return out;
}

// Bulk synchronization: thread barrier after the slowest compute, then one
// persistent send of the whole buffer.
StrategySession::Outcome StrategySession::run_p2p_single(Seconds t0,
                                                         std::span<const Seconds> off) {
  const Seconds barrier = t0 + *std::max_element(off.begin(), off.end());
  auto recv = net_.post_recv(kReceiver, kSender, 0, 0, t0);
  auto send = net_.post_message(make_message(kSender, kReceiver, 0, simnet::Tag{0},
                                             spec_.buffer_bytes, barrier, MessageKind::tagged,
                                             "p2p-single"));
  net_.advance_until_idle();
  return {send.send_complete_time(), recv.completion_time(), t0};
}

// One persistent request per partition on the owning thread's duplicated
// communicator.
StrategySession::Outcome StrategySession::run_p2p_multi(Seconds t0,
                                                        std::span<const Seconds> off) {
  std::vector<simnet::Receive> recvs;
  std::vector<simnet::Transfer> sends;
  for (std::size_t i = 0; i < off.size(); ++i) {
    const auto p = static_cast<std::int64_t>(i);
    const int ch = thread_channel(p);
    recvs.push_back(net_.post_recv(kReceiver, kSender, p, ch, t0));
    sends.push_back(net_.post_message(make_message(kSender, kReceiver, ch, p, partition_bytes(p),
                                                   t0 + off[i], MessageKind::tagged,
                                                   "p2p-multi partition " + std::to_string(p))));
  }
  net_.advance_until_idle();
  Outcome out;
  out.compute_origin = t0;
  for (const auto& s : sends) out.sender_done = std::max(out.sender_done, s.send_complete_time());
  for (const auto& r : recvs)
    out.receiver_done = std::max(out.receiver_done, r.completion_time());
  return out;
}

// Shared shape of rma-passive-{single,multi} and rma-active-single: the
// target opens the exposure with a 0-byte message (MPI_Send, or MPI_Post),
// the origin waits for it in its start step (MPI_Recv, or MPI_Start), threads
// put as they become ready, and the epoch is closed with a 0-byte message
// once every put is remotely complete (flush + MPI_Send, or MPI_Complete).
// The passive lock uses MPI_MODE_NOCHECK and therefore sends nothing.
StrategySession::Outcome StrategySession::run_rma_epoch(Seconds t0, std::span<const Seconds> off,
                                                        bool multi_window, simnet::Tag open_tag,
                                                        simnet::Tag close_tag) {
  struct State {
    std::size_t delivered = 0;
    Seconds compute_origin = 0.0;
    simnet::Transfer close;
  };
  auto st = std::make_shared<State>();
  const std::string name = to_string(spec_.kind);

  net_.post_message(make_message(kReceiver, kSender, 0, open_tag, 0, t0, MessageKind::control,
                                 name + " open"));
  auto close_recv = net_.post_recv(kReceiver, kSender, close_tag, 0, t0);

  const std::vector<Seconds> offsets(off.begin(), off.end());
  net_.post_recv(kSender, kReceiver, open_tag, 0, t0,
                 [this, st, offsets, multi_window, close_tag, name](const simnet::ReceiveRecord&) {
    const Seconds origin = net_.now();
    st->compute_origin = origin;
    const Seconds barrier = origin + *std::max_element(offsets.begin(), offsets.end());
    for (std::size_t i = 0; i < offsets.size(); ++i) {
      const auto p = static_cast<std::int64_t>(i);
      const int ch = multi_window ? window_channel(p) : 0;
      simnet::TransferCallbacks cb;
      cb.on_delivered = [this, st, n = offsets.size(), barrier, close_tag,
                         name](const simnet::TransferRecord&) {
        if (++st->delivered < n) return;
        st->close = net_.post_message(make_message(kSender, kReceiver, 0, close_tag, 0,
                                                   std::max(net_.now(), barrier),
                                                   MessageKind::control, name + " close"));
      };
      net_.post_message(make_message(kSender, kReceiver, ch, std::nullopt, partition_bytes(p),
                                     origin + offsets[i], MessageKind::put,
                                     name + " put " + std::to_string(p)),
                        std::move(cb));
    }
  });

  net_.advance_until_idle();
  return {st->close.send_complete_time(), close_recv.completion_time(), st->compute_origin};
}

// One window (and one post/start/put/complete epoch) per partition; each
// thread opens its access epoch in the ready step, right after computing.
StrategySession::Outcome StrategySession::run_rma_active_multi(Seconds t0,
                                                               std::span<const Seconds> off) {
  const std::string name = to_string(spec_.kind);
  std::vector<simnet::Receive> completes;
  auto closes = std::make_shared<std::vector<simnet::Transfer>>(off.size());

  for (std::size_t i = 0; i < off.size(); ++i) {
    const auto w = static_cast<std::int64_t>(i);
    const int ch = window_channel(w);
    net_.post_message(make_message(kReceiver, kSender, ch, kPostBase - w, 0, t0,
                                   MessageKind::control, name + " post " + std::to_string(w)));
    completes.push_back(net_.post_recv(kReceiver, kSender, kCompleteBase - w, ch, t0));
  }
  for (std::size_t i = 0; i < off.size(); ++i) {
    const auto w = static_cast<std::int64_t>(i);
    const int ch = window_channel(w);
    net_.post_recv(kSender, kReceiver, kPostBase - w, ch, t0 + off[i],
                   [this, w, ch, name, closes](const simnet::ReceiveRecord&) {
      simnet::TransferCallbacks cb;
      cb.on_delivered = [this, w, ch, name, closes](const simnet::TransferRecord&) {
        (*closes)[static_cast<std::size_t>(w)] = net_.post_message(
            make_message(kSender, kReceiver, ch, kCompleteBase - w, 0, net_.now(),
                         MessageKind::control, name + " complete " + std::to_string(w)));
      };
      net_.post_message(make_message(kSender, kReceiver, ch, std::nullopt, partition_bytes(w),
                                     net_.now(), MessageKind::put,
                                     name + " put " + std::to_string(w)),
                        std::move(cb));
    });
  }

  net_.advance_until_idle();
  Outcome out;
  out.compute_origin = t0;
  for (const auto& c : *closes) out.sender_done = std::max(out.sender_done, c.send_complete_time());
  for (const auto& r : completes)
    out.receiver_done = std::max(out.receiver_done, r.completion_time());
  return out;
}

}  // namespace pcomm::strategies
