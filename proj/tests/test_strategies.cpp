#include <gtest/gtest.h>

#include <random>

#include "pcomm/errors.hpp"
#include "pcomm/perfmodel.hpp"
#include "pcomm/strategies.hpp"

using namespace pcomm;
using namespace pcomm::strategies;
using simnet::TimingModel;

namespace {

StrategySpec make_spec(StrategyKind k, std::int64_t n_threads, std::int64_t theta, Bytes part_size,
                       int channels = 1) {
  StrategySpec s;
  s.kind = k;
  s.n_threads = n_threads;
  s.partitions_per_thread = theta;
  s.buffer_bytes = part_size * static_cast<Bytes>(n_threads * theta);
  s.channels = channels;
  return s;
}

// Elapsed time of the second iteration (handshakes excluded).
Seconds steady_elapsed(const StrategySpec& spec, const std::vector<Seconds>& off,
                       const TimingModel& t = {}) {
  StrategySession s(spec, t);
  s.run_iteration(off);
  return s.run_iteration(off).elapsed;
}

const TimingModel kT;
const double o = kT.injection_overhead;
const double Ls = kT.latency_short;
const double Lb = kT.latency_bcopy;
const double beta = kT.bandwidth;

}  // namespace

TEST(Strategies, NamesRoundTrip) {
  ASSERT_EQ(all_strategies().size(), 7u);
  for (auto k : all_strategies()) EXPECT_EQ(parse_strategy(to_string(k)), k);
  EXPECT_EQ(parse_strategy("rma-active-multi"), StrategyKind::rma_active_multi);
  EXPECT_EQ(parse_strategy("P2P-single"), std::nullopt);
  EXPECT_EQ(parse_strategy(""), std::nullopt);
}

TEST(Strategies, OwnerThreadIsRoundRobin) {
  EXPECT_EQ(owner_thread(0, 4), 0);
  EXPECT_EQ(owner_thread(5, 4), 1);
  EXPECT_EQ(owner_thread(7, 1), 0);
}

TEST(Strategies, TracedTrafficMatchesMessageCount) {
  for (auto k : all_strategies()) {
    for (auto [n, theta, ch] : {std::tuple{1, 1, 1}, {4, 1, 2}, {3, 3, 4}, {8, 2, 1}}) {
      auto spec = make_spec(k, n, theta, 4096, ch);
      StrategySession s(spec, kT);
      std::vector<Seconds> off(static_cast<std::size_t>(n * theta), 0.0);
      for (int it = 0; it < 3; ++it) {
        const auto trace = s.run_iteration(off);
        const auto want = strategy_message_count(spec, it == 0);
        EXPECT_EQ(trace.data_messages(), want.data) << to_string(k) << " it " << it;
        EXPECT_EQ(trace.control_messages(), want.control) << to_string(k) << " it " << it;
      }
    }
  }
}

TEST(Strategies, LegacyPartCountsOneMessagePlusCts) {
  auto spec = make_spec(StrategyKind::part, 4, 1, 1024);
  spec.part.legacy_am = true;
  StrategySession s(spec, kT);
  std::vector<Seconds> off(4, 0.0);
  const auto first = s.run_iteration(off);
  const auto second = s.run_iteration(off);
  EXPECT_EQ(first.data_messages(), 1);
  EXPECT_EQ(first.control_messages(), 2);
  EXPECT_EQ(second.control_messages(), 1);
  EXPECT_EQ(strategy_message_count(spec, false).control, 1);
}

TEST(Strategies, SmallMessageClosedForms) {
  // p2p-single: one message of N*64 bytes after the barrier.
  std::vector<Seconds> off(32, 0.0);
  EXPECT_NEAR(steady_elapsed(make_spec(StrategyKind::p2p_single, 32, 1, 64), off),
              o + Lb + 2048 / beta, 1e-15);
  // p2p-multi on one channel: injections serialize, the last one pays latency.
  EXPECT_NEAR(steady_elapsed(make_spec(StrategyKind::p2p_multi, 32, 1, 64), off),
              32 * o + Ls + 64 / beta, 1e-15);
  // One partition: only the open and close handshakes differ from p2p-single.
  std::vector<Seconds> one{0.0};
  const double single = steady_elapsed(make_spec(StrategyKind::p2p_single, 1, 1, 64), one);
  const double rma = steady_elapsed(make_spec(StrategyKind::rma_passive_single, 1, 1, 64), one);
  EXPECT_NEAR(single, o + Ls + 64 / beta, 1e-15);
  EXPECT_NEAR(rma - single, 2 * (o + Ls) - kT.put_discount, 1e-15);
  EXPECT_NEAR(steady_elapsed(make_spec(StrategyKind::part, 1, 1, 64), one), single, 1e-15);
}

TEST(Strategies, IdealNetworkReproducesPipelineModel) {
  const auto ideal = kT.without_latency();
  for (auto [n, g_us] : {std::pair{4, 100.0}, {8, 10.0}, {2, 600.0}, {16, 30.0}}) {
    const Bytes s = 1 << 20;
    const double gamma = units::from_us_per_mb(g_us);
    const auto off = perfmodel::last_partition_delay_schedule(n, gamma, static_cast<double>(s));
    const auto model = perfmodel::predict_pipeline(n, 1, static_cast<double>(s), beta, gamma);
    for (auto k : all_strategies()) {
      const double e = steady_elapsed(make_spec(k, n, 1, s, 2), off, ideal);
      const double want = k == StrategyKind::p2p_single ? model.t_bulk : model.t_pipelined;
      EXPECT_NEAR(e, want, want * 1e-9) << to_string(k) << " N=" << n;
    }
  }
}

TEST(Strategies, ChannelsRelieveSmallMessageContention) {
  std::vector<Seconds> off(32, 0.0);
  const double one = steady_elapsed(make_spec(StrategyKind::p2p_multi, 32, 1, 64, 1), off);
  const double many = steady_elapsed(make_spec(StrategyKind::p2p_multi, 32, 1, 64, 32), off);
  EXPECT_NEAR(many, o + Ls + 64 / beta + 31 * 64 / beta, 1e-15);
  EXPECT_GT(one / many, 10.0);
}

TEST(Strategies, P2pMultiUsesOwnerThreadChannel) {
  auto spec = make_spec(StrategyKind::p2p_multi, 3, 2, 64, 2);
  StrategySession s(spec, kT);
  const auto trace = s.run_iteration(std::vector<Seconds>(6, 0.0));
  ASSERT_EQ(trace.messages.size(), 6u);
  for (std::size_t p = 0; p < 6; ++p)
    EXPECT_EQ(trace.messages[p].channel, static_cast<int>(owner_thread(p, 3) % 2));
}

TEST(Strategies, IterationsRunInLockStep) {
  for (auto k : all_strategies()) {
    StrategySession s(make_spec(k, 4, 1, 8192, 2), kT);
    std::vector<Seconds> off{0.0, 1e-6, 3e-6, 2e-6};
    Seconds prev_end = 0.0;
    for (int it = 0; it < 4; ++it) {
      const auto t = s.run_iteration(off);
      EXPECT_GE(t.start_time, prev_end) << to_string(k);
      EXPECT_GE(t.elapsed, 0.0);
      prev_end = std::max(t.sender_done, t.receiver_done);
      for (const auto& m : t.messages) EXPECT_GE(m.posted, t.start_time);
    }
  }
}

TEST(Strategies, FirstPartIterationCarriesTheHandshake) {
  StrategySession s(make_spec(StrategyKind::part, 4, 1, 1024), kT);
  std::vector<Seconds> off(4, 0.0);
  const auto first = s.run_iteration(off);
  const auto second = s.run_iteration(off);
  const auto third = s.run_iteration(off);
  EXPECT_GT(first.elapsed, second.elapsed);
  EXPECT_NEAR(second.elapsed, third.elapsed, 1e-15);
}

TEST(Strategies, ElapsedMonotoneInSize) {
  // Non-decreasing only: for tiny puts the critical path can be the 0-byte
  // completion handshakes.
  for (auto k : all_strategies()) {
    double prev = 0.0, first = 0.0;
    for (Bytes s = 64; s <= (1 << 22); s *= 4) {
      const double e = steady_elapsed(make_spec(k, 4, 1, s, 2), std::vector<Seconds>(4, 0.0));
      EXPECT_GE(e + 1e-15, prev) << to_string(k) << " size " << s;
      if (first == 0.0) first = e;
      prev = e;
    }
    EXPECT_GT(prev, 10 * first) << to_string(k);
  }
}

TEST(Strategies, RejectsBadOffsets) {
  StrategySession s(make_spec(StrategyKind::p2p_multi, 2, 1, 64), kT);
  EXPECT_THROW(s.run_iteration(std::vector<Seconds>{0.0}), ConfigError);
  EXPECT_THROW(s.run_iteration(std::vector<Seconds>{0.0, -1.0}), ConfigError);
  EXPECT_THROW(StrategySession(make_spec(StrategyKind::part, 0, 1, 64), kT), ConfigError);
}

TEST(Strategies, DeterministicTraces) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> d(0, 1e-4);
  std::vector<Seconds> off(12);
  for (auto& x : off) x = d(rng);
  for (auto k : all_strategies()) {
    StrategySession a(make_spec(k, 6, 2, 50000, 3), kT);
    StrategySession b(make_spec(k, 6, 2, 50000, 3), kT);
    for (int it = 0; it < 2; ++it) {
      a.run_iteration(off);
      b.run_iteration(off);
    }
    EXPECT_EQ(a.network().trace(), b.network().trace()) << to_string(k);
  }
}
