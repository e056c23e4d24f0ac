#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "pcomm/errors.hpp"
#include "pcomm/partcomm.hpp"

using namespace pcomm;
using namespace pcomm::partcomm;
using simnet::Network;
using simnet::TimingModel;

namespace {

struct Pair {
  Network net;
  TagPlan tags;
  std::unique_ptr<PartitionedRecv> recv;
  std::unique_ptr<PartitionedSend> send;

  Pair(std::int64_t n_send, std::int64_t n_recv, Bytes buffer, PartConfig cfg, int channels = 4,
       TimingModel t = {})
      : net(t, channels), tags(cfg.reserved_tag_space) {
    recv = precv_init(net, 1, 0, n_recv, buffer, cfg, 0.0);
    send = psend_init(net, tags, 0, 1, n_send, buffer, cfg, 0.0);
  }

  // One iteration with the given ready offsets, pready issued in `order`.
  void iterate(const std::vector<Seconds>& offsets, const std::vector<std::int64_t>& order) {
    const Seconds t0 = net.now();
    recv->start(t0);
    send->start(t0);
    for (auto p : order) send->pready(p, t0 + offsets[static_cast<std::size_t>(p)]);
    send->wait();
    recv->wait();
  }

  void iterate(const std::vector<Seconds>& offsets) {
    std::vector<std::int64_t> order(offsets.size());
    std::iota(order.begin(), order.end(), 0);
    iterate(offsets, order);
  }
};

std::vector<Seconds> random_offsets(std::mt19937_64& rng, std::int64_t n, double spread) {
  std::uniform_real_distribution<double> d(0.0, spread);
  std::vector<Seconds> out(static_cast<std::size_t>(n));
  for (auto& o : out) o = d(rng);
  return out;
}

// Data messages posted in [from, end) of the transfer log.
std::map<simnet::Tag, int> data_tags(const Network& net, std::size_t from) {
  std::map<simnet::Tag, int> out;
  const auto& ts = net.transfers();
  for (std::size_t i = from; i < ts.size(); ++i)
    if (ts[i]->msg.kind == simnet::MessageKind::tagged) ++out[*ts[i]->msg.tag];
  return out;
}

}  // namespace

TEST(PartComm, HandshakeAgreesOnLayout) {
  PartConfig cfg;
  cfg.num_channels = 3;
  Pair p(6, 4, 6000, cfg);
  std::vector<Seconds> off(6, 0.0);
  p.iterate(off);
  EXPECT_EQ(p.send->mode(), SendMode::tag_matched);
  EXPECT_TRUE(p.send->cts_received());
  EXPECT_TRUE(p.recv->rts_received());
  EXPECT_EQ(p.send->n_messages(), 2);
  EXPECT_EQ(p.recv->n_messages(), 2);
  EXPECT_EQ(p.send->partition_to_message(), p.recv->layout().send_to_message);
  EXPECT_EQ(p.send->channel_of_message(), p.recv->channel_of_message());
  EXPECT_EQ(p.send->channel_of_message(), assign_channels(2, 3));
  EXPECT_EQ(p.send->initial_counters(), (std::vector<std::int64_t>{3, 3}));
}

TEST(PartComm, ExactlyOnceInjectionUnderRandomOrders) {
  std::mt19937_64 rng(1234);
  for (int trial = 0; trial < 60; ++trial) {
    std::uniform_int_distribution<std::int64_t> count(1, 12);
    const auto ns = count(rng), nr = count(rng);
    PartConfig cfg;
    cfg.num_channels = static_cast<int>(count(rng) % 4) + 1;
    cfg.part_aggr_size = (trial % 3 == 0) ? 16384 : 0;
    const Bytes buffer = static_cast<Bytes>(rng() % 200000);
    Pair p(ns, nr, buffer, cfg);
    for (int it = 0; it < 3; ++it) {
      const std::size_t before = p.net.transfers().size();
      auto off = random_offsets(rng, ns, 2e-5);
      std::vector<std::int64_t> order(static_cast<std::size_t>(ns));
      std::iota(order.begin(), order.end(), 0);
      std::shuffle(order.begin(), order.end(), rng);
      p.iterate(off, order);
      const auto tags = data_tags(p.net, before);
      ASSERT_EQ(static_cast<std::int64_t>(tags.size()), p.send->n_messages());
      for (const auto& [tag, n] : tags) EXPECT_EQ(n, 1) << "tag " << tag;
      EXPECT_EQ(p.send->injections_this_iteration(), p.send->n_messages());
      for (std::int64_t q = 0; q < nr; ++q) EXPECT_TRUE(p.recv->parrived(q));
    }
  }
}

TEST(PartComm, CounterConservation) {
  PartConfig cfg;
  cfg.num_channels = 2;
  Pair p(8, 8, 8 * 4096, cfg);
  p.iterate(std::vector<Seconds>(8, 0.0));  // handshake out of the way

  std::mt19937_64 rng(7);
  const auto off = random_offsets(rng, 8, 1e-5);
  const Seconds t0 = p.net.now();
  p.recv->start(t0);
  p.send->start(t0);
  const auto init = p.send->initial_counters();
  EXPECT_EQ(std::accumulate(init.begin(), init.end(), std::int64_t{0}), 8);
  for (std::int64_t q = 0; q < 8; ++q) p.send->pready(q, t0 + off[static_cast<std::size_t>(q)]);

  // Sample the counters between every pair of ready events.
  std::vector<Seconds> sorted(off.begin(), off.end());
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
    const Seconds mid = t0 + 0.5 * (sorted[k] + sorted[k + 1]);
    p.net.at(mid, [&, k] {
      const auto c = p.send->counters();
      const auto sum = std::accumulate(c.begin(), c.end(), std::int64_t{0});
      EXPECT_EQ(sum, 8 - static_cast<std::int64_t>(k + 1));
      for (auto v : c) EXPECT_GE(v, 0);
    });
  }
  p.send->wait();
  p.recv->wait();
  for (auto v : p.send->counters()) EXPECT_EQ(v, 0);
}

TEST(PartComm, ParrivedIsMonotone) {
  PartConfig cfg;
  cfg.num_channels = 2;
  Pair p(8, 8, 8 << 14, cfg);
  std::mt19937_64 rng(99);
  for (int it = 0; it < 3; ++it) {
    const auto off = random_offsets(rng, 8, 5e-5);
    const Seconds t0 = p.net.now();
    p.recv->start(t0);
    p.send->start(t0);
    for (std::int64_t q = 0; q < 8; ++q) p.send->pready(q, t0 + off[static_cast<std::size_t>(q)]);
    auto seen = std::make_shared<std::vector<bool>>(8, false);
    for (int k = 0; k < 400; ++k) {
      const Seconds t = t0 + k * 0.5e-6;
      p.net.at(t, [&, seen, t] {
        for (std::int64_t q = 0; q < 8; ++q) {
          const bool now = p.recv->parrived(q);
          if ((*seen)[static_cast<std::size_t>(q)]) {
            EXPECT_TRUE(now);
          }
          if (now) {
            EXPECT_LE(*p.recv->arrival_time(q), t);
          }
          (*seen)[static_cast<std::size_t>(q)] = now;
        }
      });
    }
    p.send->wait();
    p.recv->wait();
    for (std::int64_t q = 0; q < 8; ++q) EXPECT_TRUE(p.recv->parrived(q));
  }
}

TEST(PartComm, PreadyCallOrderDoesNotMatter) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    PartConfig cfg;
    cfg.num_channels = 1 + trial % 4;
    const auto off = random_offsets(rng, 12, 3e-5);
    auto run = [&](std::vector<std::int64_t> order) {
      Pair p(12, 6, 12 * 3000, cfg);
      p.iterate(off, order);
      p.iterate(off, order);
      return p.net.trace();
    };
    std::vector<std::int64_t> order(12);
    std::iota(order.begin(), order.end(), 0);
    const auto ref = run(order);
    std::shuffle(order.begin(), order.end(), rng);
    EXPECT_EQ(run(order), ref);
  }
}

TEST(PartComm, SimultaneousReadyOrderKeepsCompletionTime) {
  auto run = [](std::vector<std::int64_t> order) {
    PartConfig cfg;
    Pair p(8, 8, 8 * 1024, cfg, 1);
    p.iterate(std::vector<Seconds>(8, 0.0), order);
    const Seconds t0 = p.net.now();
    p.iterate(std::vector<Seconds>(8, 1e-6), order);
    Seconds done = 0;
    for (const auto& r : p.recv->receives()) done = std::max(done, r.completion_time());
    return done - t0;
  };
  std::vector<std::int64_t> order(8);
  std::iota(order.begin(), order.end(), 0);
  const Seconds ref = run(order);
  std::reverse(order.begin(), order.end());
  EXPECT_DOUBLE_EQ(run(order), ref);
}

TEST(PartComm, PreadyBeforeCtsIsReplayed) {
  PartConfig cfg;
  Pair p(4, 4, 4096, cfg);
  p.recv->start(0.0);
  p.send->start(0.0);
  for (std::int64_t q = 0; q < 4; ++q) p.send->pready(q, 0.0);
  p.send->wait();
  p.recv->wait();
  ASSERT_TRUE(p.send->first_cts_time());
  for (const auto& m : p.send->messages())
    EXPECT_GE(m.record().msg.inject_time, *p.send->first_cts_time());
}

TEST(PartComm, TagMatchedNeedsNoControlAfterFirstIteration) {
  PartConfig cfg;
  Pair p(4, 4, 4096, cfg);
  p.iterate(std::vector<Seconds>(4, 0.0));
  const std::size_t before = p.net.transfers().size();
  p.iterate(std::vector<Seconds>(4, 0.0));
  p.iterate(std::vector<Seconds>(4, 0.0));
  const auto& ts = p.net.transfers();
  for (std::size_t i = before; i < ts.size(); ++i)
    EXPECT_NE(ts[i]->msg.kind, simnet::MessageKind::control);
}

TEST(PartComm, LegacyModeGatesEveryIterationOnCts) {
  PartConfig cfg;
  cfg.legacy_am = true;
  Pair p(4, 4, 4096, cfg);
  EXPECT_EQ(p.send->mode(), SendMode::legacy_am);
  EXPECT_EQ(p.send->initial_counters(), (std::vector<std::int64_t>{5}));
  for (int it = 0; it < 4; ++it) {
    const std::size_t before = p.net.transfers().size();
    const Seconds t0 = p.net.now();
    p.iterate(std::vector<Seconds>(4, 0.0));
    const auto& ts = p.net.transfers();
    std::optional<Seconds> cts_delivered, data_inject;
    int data = 0;
    for (std::size_t i = before; i < ts.size(); ++i) {
      if (*ts[i]->msg.tag == control_tag::cts(p.send->id())) cts_delivered = ts[i]->delivered;
      if (ts[i]->msg.kind == simnet::MessageKind::tagged) {
        ++data;
        data_inject = ts[i]->msg.inject_time;
      }
    }
    EXPECT_EQ(data, 1);
    ASSERT_TRUE(cts_delivered);
    ASSERT_TRUE(data_inject);
    EXPECT_GE(*data_inject, *cts_delivered);
    EXPECT_GT(*data_inject, t0);
  }
}

TEST(PartComm, LegacyDataWaitsForLateCtsEvenWhenPartitionsAreReady) {
  PartConfig cfg;
  cfg.legacy_am = true;
  Pair p(2, 2, 64, cfg);
  p.iterate({0.0, 0.0});
  // Receiver starts late, so its CTS is late too.
  const Seconds t0 = p.net.now();
  p.send->start(t0);
  p.send->pready(0, t0);
  p.send->pready(1, t0);
  p.net.at(t0 + 1e-4, [&] { p.recv->start(p.net.now()); });
  p.send->wait();
  EXPECT_GE(p.send->messages()[0].record().msg.inject_time, t0 + 1e-4);
}

TEST(PartComm, FallsBackWhenTagSpaceIsExhausted) {
  PartConfig cfg;
  cfg.reserved_tag_space = 8;
  Network net(TimingModel{}, 1);
  TagPlan tags(8);
  auto r1 = precv_init(net, 1, 0, 6, 600, cfg, 0.0);
  auto r2 = precv_init(net, 1, 0, 6, 600, cfg, 0.0);
  auto s1 = psend_init(net, tags, 0, 1, 6, 600, cfg, 0.0);
  auto s2 = psend_init(net, tags, 0, 1, 6, 600, cfg, 0.0);
  EXPECT_EQ(s1->mode(), SendMode::tag_matched);
  EXPECT_EQ(s2->mode(), SendMode::legacy_am);
  EXPECT_EQ(tags.tags_in_use(1), 6);
  for (auto* r : {r1.get(), r2.get()}) r->start(0.0);
  for (auto* s : {s1.get(), s2.get()}) {
    s->start(0.0);
    for (std::int64_t q = 0; q < 6; ++q) s->pready(q, 0.0);
  }
  s1->wait();
  EXPECT_EQ(r2->mode(), SendMode::legacy_am);
  EXPECT_TRUE(r1->parrived(5));
  EXPECT_TRUE(r2->parrived(5));
  s1.reset();
  EXPECT_EQ(tags.tags_in_use(1), 0);
}

TEST(PartComm, WithheldPreadyIsADeadlock) {
  PartConfig cfg;
  Pair p(4, 4, 4096, cfg);
  p.recv->start(0.0);
  p.send->start(0.0);
  for (std::int64_t q = 0; q < 3; ++q) p.send->pready(q, 0.0);
  try {
    p.send->wait();
    FAIL() << "expected deadlock";
  } catch (const DeadlockError& e) {
    const auto& s = e.stuck();
    EXPECT_TRUE(std::any_of(s.begin(), s.end(), [](const std::string& x) {
      return x.find("partition 3 never marked ready") != std::string::npos;
    }));
  }
}

TEST(PartComm, MissingReceiverIsADeadlock) {
  Network net(TimingModel{}, 1);
  TagPlan tags;
  auto s = psend_init(net, tags, 0, 1, 2, 128, PartConfig{}, 0.0);
  s->start(0.0);
  s->pready(0, 0.0);
  s->pready(1, 0.0);
  EXPECT_THROW(s->wait(), DeadlockError);
}

TEST(PartComm, LifecycleAndArgumentErrors) {
  PartConfig cfg;
  Pair p(4, 4, 4096, cfg);
  EXPECT_THROW(p.send->pready(0, 0.0), LifecycleError);
  EXPECT_THROW(p.send->wait(), LifecycleError);
  EXPECT_THROW(p.recv->parrived(0), LifecycleError);
  p.recv->start(0.0);
  p.send->start(0.0);
  EXPECT_THROW(p.send->start(0.0), LifecycleError);
  EXPECT_THROW(p.send->pready(4, 0.0), DomainError);
  EXPECT_THROW(p.recv->parrived(-1), DomainError);
  p.send->pready(1, 0.0);
  EXPECT_THROW(p.send->pready(1, 0.0), UsageError);
  EXPECT_FALSE(p.recv->parrived(0));
  EXPECT_THROW(precv_init(p.net, 1, 0, 0, 10, cfg, 0.0), DomainError);
  PartConfig wide;
  wide.num_channels = 9;
  EXPECT_THROW(psend_init(p.net, p.tags, 0, 1, 4, 10, wide, 0.0), ConfigError);
}

TEST(PartComm, BufferSizeMismatchIsAProtocolError) {
  Network net(TimingModel{}, 1);
  TagPlan tags;
  auto r = precv_init(net, 1, 0, 4, 2000, PartConfig{}, 0.0);
  auto s = psend_init(net, tags, 0, 1, 4, 1000, PartConfig{}, 0.0);
  EXPECT_THROW(net.advance_until_idle(), ProtocolError);
}

TEST(PartComm, AggregationSendsOneMessage) {
  PartConfig cfg;
  cfg.part_aggr_size = 16384;
  Pair p(32, 32, 32 * 512, cfg, 1);
  const std::size_t before = p.net.transfers().size();
  p.iterate(std::vector<Seconds>(32, 0.0));
  const auto tags = data_tags(p.net, before);
  ASSERT_EQ(tags.size(), 1u);
  EXPECT_EQ(p.send->initial_counters(), (std::vector<std::int64_t>{32}));
  EXPECT_EQ(p.send->messages()[0].record().msg.size, 16384u);
}

TEST(PartComm, ChannelsAreAssignedRoundRobin) {
  PartConfig cfg;
  cfg.num_channels = 3;
  Pair p(7, 7, 7000, cfg);
  p.iterate(std::vector<Seconds>(7, 0.0));
  for (std::int64_t m = 0; m < 7; ++m)
    EXPECT_EQ(p.send->messages()[static_cast<std::size_t>(m)].record().msg.channel, m % 3);
}
