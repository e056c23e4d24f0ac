#include "pcomm/simnet.hpp"

#include <algorithm>
#include <string>

#include "pcomm/errors.hpp"

namespace pcomm::simnet {

const char* to_string(MessageKind k) {
  switch (k) {
    case MessageKind::tagged: return "tagged";
    case MessageKind::put: return "put";
    case MessageKind::control: return "control";
  }
  return "?";
}

const char* to_string(Regime r) {
  switch (r) {
    case Regime::short_eager: return "short";
    case Regime::bcopy: return "bcopy";
    case Regime::zcopy: return "zcopy";
  }
  return "?";
}

const char* to_string(TraceKind k) {
  switch (k) {
    case TraceKind::inject_start: return "inject_start";
    case TraceKind::injected: return "injected";
    case TraceKind::matched: return "matched";
    case TraceKind::wire_start: return "wire_start";
    case TraceKind::send_complete: return "send_complete";
    case TraceKind::delivered: return "delivered";
    case TraceKind::recv_posted: return "recv_posted";
    case TraceKind::recv_completed: return "recv_completed";
  }
  return "?";
}

void TimingModel::validate() const {
  if (!(bandwidth > 0)) throw ConfigError("bandwidth must be > 0");
  if (short_threshold == 0 || short_threshold >= rendezvous_threshold)
    throw ConfigError("require 0 < short_threshold < rendezvous_threshold");
  for (Seconds v : {latency_short, latency_bcopy, latency_zcopy, rendezvous_rtt,
                    injection_overhead, put_discount}) {
    if (v < 0) throw ConfigError("latencies and overheads must be >= 0");
  }
  if (latency_short > latency_bcopy)
    throw ConfigError("latency_short must not exceed latency_bcopy");
}

Regime TimingModel::regime(Bytes size) const {
  if (size < short_threshold) return Regime::short_eager;
  if (size < rendezvous_threshold) return Regime::bcopy;
  return Regime::zcopy;
}

TimingModel TimingModel::without_latency() const {
  TimingModel t = *this;
  t.latency_short = t.latency_bcopy = t.latency_zcopy = 0.0;
  t.rendezvous_rtt = 0.0;
  t.injection_overhead = 0.0;
  t.put_discount = 0.0;
  return t;
}

Seconds latency_term(const TimingModel& t, Bytes size, MessageKind kind) {
  if (kind == MessageKind::control) return t.latency_short;
  Seconds alpha = 0.0;
  switch (t.regime(size)) {
    case Regime::short_eager: alpha = t.latency_short; break;
    case Regime::bcopy: alpha = t.latency_bcopy; break;
    case Regime::zcopy: alpha = t.latency_zcopy + t.rendezvous_rtt; break;
  }
  if (kind == MessageKind::put) alpha = std::max(alpha - t.put_discount, 0.0);
  return alpha;
}

Seconds transfer_time(const TimingModel& t, Bytes size, MessageKind kind) {
  if (kind == MessageKind::control) return t.latency_short;
  return latency_term(t, size, kind) + static_cast<double>(size) / t.bandwidth;
}

// ---------------------------------------------------------------------------

void EventQueue::schedule(Seconds at, Action action) {
  if (at < clock_) {
    throw ConfigError("event scheduled in the past (" + std::to_string(at) + " < " +
                      std::to_string(clock_) + ")");
  }
  heap_.push_back(Entry{at, next_seq_++, std::move(action)});
  std::push_heap(heap_.begin(), heap_.end(), Later{});
}

bool EventQueue::step() {
  if (heap_.empty()) return false;
  std::pop_heap(heap_.begin(), heap_.end(), Later{});
  Entry e = std::move(heap_.back());
  heap_.pop_back();
  clock_ = e.time;
  e.action();
  return true;
}

// ---------------------------------------------------------------------------

Network::Network(TimingModel timing, int n_channels, int n_ranks)
    : timing_(timing), n_channels_(n_channels), n_ranks_(n_ranks) {
  timing_.validate();
  if (n_channels_ < 1) throw ConfigError("need at least one channel");
  if (n_ranks_ < 2) throw ConfigError("need at least two ranks");
}

void Network::check_rank(Rank r) const {
  if (r < 0 || r >= n_ranks_) throw ConfigError("unknown rank " + std::to_string(r));
}

Network::MatchKey Network::key_of(const SimMessage& m) {
  return {m.dst, m.src, m.tag.value_or(0), m.channel};
}

void Network::record(TraceKind kind, std::uint64_t id, const SimMessage& m) {
  trace_.push_back(TraceEvent{now(), kind, id, m.channel, m.size, m.kind});
}

Transfer Network::post_message(SimMessage msg, TransferCallbacks callbacks) {
  check_rank(msg.src);
  check_rank(msg.dst);
  if (msg.src == msg.dst) throw ConfigError("source and destination rank must differ");
  if (msg.channel < 0 || msg.channel >= n_channels_)
    throw ConfigError("unknown channel " + std::to_string(msg.channel));
  if (msg.kind != MessageKind::put && !msg.tag)
    throw ConfigError("tagged and control messages need a tag");
  if (msg.kind == MessageKind::put && msg.tag)
    throw ConfigError("puts are not tag-matched");
  if (msg.kind == MessageKind::control && msg.size != 0)
    throw ConfigError("control messages carry no data");
  if (msg.inject_time < now()) throw ConfigError("inject_time lies before the current clock");

  auto rec = std::make_shared<TransferRecord>();
  rec->id = transfers_.size();
  rec->rendezvous =
      msg.kind == MessageKind::tagged && timing_.regime(msg.size) == Regime::zcopy;
  rec->msg = std::move(msg);
  transfers_.push_back(rec);
  slots_.push_back(TransferSlot{rec, std::move(callbacks)});
  const std::size_t slot = slots_.size() - 1;
  queue_.schedule(rec->msg.inject_time, [this, slot] { enqueue_on_channel(slot); });
  return Transfer(rec);
}

void Network::enqueue_on_channel(std::size_t slot) {
  auto& rec = *slots_[slot].rec;
  Seconds& free_at = channel_free_[{rec.msg.src, rec.msg.channel}];
  const Seconds start = std::max(now(), free_at);
  free_at = start + timing_.injection_overhead;
  rec.inject_start = start;
  trace_.push_back(TraceEvent{start, TraceKind::inject_start, rec.id, rec.msg.channel,
                              rec.msg.size, rec.msg.kind});
  queue_.schedule(free_at, [this, slot] { on_injected(slot); });
}

void Network::on_injected(std::size_t slot) {
  auto& rec = *slots_[slot].rec;
  rec.injected = now();
  record(TraceKind::injected, rec.id, rec.msg);
  if (!rec.rendezvous) {
    reserve_wire(slot, now());
    return;
  }
  auto it = posted_.find(key_of(rec.msg));
  if (it != posted_.end() && !it->second.empty()) {
    const std::size_t recv = it->second.front();
    it->second.pop_front();
    start_rendezvous(slot, recv);
  } else {
    unexpected_[key_of(rec.msg)].push_back(slot);
  }
}

void Network::start_rendezvous(std::size_t slot, std::size_t recv) {
  auto& rec = *slots_[slot].rec;
  rec.matched = now();
  record(TraceKind::matched, rec.id, rec.msg);
  rendezvous_match_[slot] = recv;
  const Seconds ready = now() + timing_.rendezvous_rtt;
  queue_.schedule(ready, [this, slot] { reserve_wire(slot, now()); });
}

void Network::reserve_wire(std::size_t slot, Seconds ready) {
  auto& rec = *slots_[slot].rec;
  Seconds& free_at = wire_free_[{rec.msg.src, rec.msg.dst}];
  const Seconds start = std::max(ready, free_at);
  free_at = start + static_cast<double>(rec.msg.size) / timing_.bandwidth;
  rec.wire_start = start;
  trace_.push_back(TraceEvent{start, TraceKind::wire_start, rec.id, rec.msg.channel,
                              rec.msg.size, rec.msg.kind});
  queue_.schedule(free_at, [this, slot] { on_wire_done(slot); });
}

void Network::on_wire_done(std::size_t slot) {
  auto& s = slots_[slot];
  auto& rec = *s.rec;
  Seconds latency = latency_term(timing_, rec.msg.size, rec.msg.kind);
  if (rec.rendezvous) {
    latency = timing_.latency_zcopy;  // the round-trip was paid before the wire
  } else {
    rec.send_complete = now();
    record(TraceKind::send_complete, rec.id, rec.msg);
    if (s.callbacks.on_send_complete) s.callbacks.on_send_complete(rec);
  }
  queue_.schedule(now() + latency, [this, slot] { on_delivered(slot); });
}

void Network::on_delivered(std::size_t slot) {
  auto& s = slots_[slot];
  auto& rec = *s.rec;
  rec.delivered = now();
  record(TraceKind::delivered, rec.id, rec.msg);
  if (rec.rendezvous) {
    rec.send_complete = now();
    record(TraceKind::send_complete, rec.id, rec.msg);
    if (s.callbacks.on_send_complete) s.callbacks.on_send_complete(rec);
    if (s.callbacks.on_delivered) s.callbacks.on_delivered(rec);
    const std::size_t recv = rendezvous_match_.at(slot);
    rendezvous_match_.erase(slot);
    complete_recv(recv, slot);
    return;
  }
  if (s.callbacks.on_delivered) s.callbacks.on_delivered(rec);
  if (rec.msg.kind == MessageKind::put) return;

  auto it = posted_.find(key_of(rec.msg));
  if (it != posted_.end() && !it->second.empty()) {
    const std::size_t recv = it->second.front();
    it->second.pop_front();
    complete_recv(recv, slot);
  } else {
    unexpected_[key_of(rec.msg)].push_back(slot);
  }
}

Receive Network::post_recv(Rank rank, Rank src, Tag tag, int channel, Seconds post_time,
                           ReceiveCallback on_complete) {
  check_rank(rank);
  check_rank(src);
  if (channel < 0 || channel >= n_channels_)
    throw ConfigError("unknown channel " + std::to_string(channel));
  if (post_time < now()) throw ConfigError("receive posted before the current clock");

  auto rec = std::make_shared<ReceiveRecord>();
  rec->id = recvs_.size();
  rec->rank = rank;
  rec->src = src;
  rec->tag = tag;
  rec->channel = channel;
  rec->post_time = post_time;
  recvs_.push_back(RecvSlot{rec, std::move(on_complete)});
  const std::size_t idx = recvs_.size() - 1;
  queue_.schedule(post_time, [this, idx] { on_recv_posted(idx); });
  return Receive(rec);
}

void Network::on_recv_posted(std::size_t recv) {
  const auto& r = *recvs_[recv].rec;
  trace_.push_back(
      TraceEvent{now(), TraceKind::recv_posted, r.id, r.channel, 0, MessageKind::tagged});
  const MatchKey key{r.rank, r.src, r.tag, r.channel};
  auto it = unexpected_.find(key);
  if (it != unexpected_.end() && !it->second.empty()) {
    const std::size_t slot = it->second.front();
    it->second.pop_front();
    if (slots_[slot].rec->rendezvous) {
      start_rendezvous(slot, recv);
    } else {
      complete_recv(recv, slot);
    }
    return;
  }
  posted_[key].push_back(recv);
}

void Network::complete_recv(std::size_t recv, std::size_t slot) {
  auto& r = recvs_[recv];
  const auto& t = *slots_[slot].rec;
  r.rec->completed = now();
  r.rec->transfer_id = t.id;
  r.rec->payload = t.msg.payload;
  trace_.push_back(TraceEvent{now(), TraceKind::recv_completed, r.rec->id, r.rec->channel,
                              t.msg.size, t.msg.kind});
  if (r.on_complete) r.on_complete(*r.rec);
}

void Network::at(Seconds time, std::function<void()> action) {
  queue_.schedule(time, std::move(action));
}

Obligation Network::open_obligation(std::string label) {
  Obligation ob;
  ob.state_ = std::make_shared<Obligation::State>();
  ob.state_->label = std::move(label);
  obligations_.push_back(ob.state_);
  return ob;
}

void Network::fulfill(Obligation& ob) {
  if (ob.state_) ob.state_->done = true;
}

Seconds Network::advance_until_idle() {
  while (queue_.step()) {
  }
  std::vector<std::string> stuck;
  for (const auto& t : transfers_) {
    if (!t->delivered) {
      stuck.push_back("message #" + std::to_string(t->id) + " (" + to_string(t->msg.kind) +
                      ", " + std::to_string(t->msg.size) + " B, channel " +
                      std::to_string(t->msg.channel) +
                      (t->msg.label.empty() ? "" : ", " + t->msg.label) +
                      ") never delivered");
    }
  }
  for (const auto& r : recvs_) {
    if (!r.rec->completed) {
      stuck.push_back("receive #" + std::to_string(r.rec->id) + " (rank " +
                      std::to_string(r.rec->rank) + ", tag " + std::to_string(r.rec->tag) +
                      ", channel " + std::to_string(r.rec->channel) + ") never matched");
    }
  }
  for (const auto& o : obligations_) {
    if (!o->done) stuck.push_back(o->label);
  }
  if (!stuck.empty()) throw DeadlockError(std::move(stuck));
  return now();
}

}  // namespace pcomm::simnet
