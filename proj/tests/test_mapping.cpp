#include <gtest/gtest.h>

#include <numeric>

#include "pcomm/errors.hpp"
#include "pcomm/mapping.hpp"

using namespace pcomm;
using namespace pcomm::partcomm;

namespace {

// Independent byte-range check: every non-empty partition of one side lies
// inside the message it is mapped to, and messages cover partitions in order.
void check_side(const MessageMap& map, std::int64_t n, Bytes buffer,
                const std::vector<std::int64_t>& to_msg) {
  ASSERT_EQ(static_cast<std::int64_t>(to_msg.size()), n);
  EXPECT_TRUE(std::is_sorted(to_msg.begin(), to_msg.end()));
  EXPECT_EQ(to_msg.front(), 0);
  EXPECT_EQ(to_msg.back(), map.n_messages - 1);
  for (std::int64_t p = 0; p < n; ++p) {
    const Bytes lo = partition_offset(p, n, buffer);
    const Bytes hi = partition_offset(p + 1, n, buffer);
    const auto m = static_cast<std::size_t>(to_msg[static_cast<std::size_t>(p)]);
    EXPECT_LE(map.offsets[m], lo);
    EXPECT_LE(hi, map.offsets[m + 1]);
  }
  // Every message gets at least one partition and the same count on
  // each side scales with n / g.
  for (std::int64_t m = 0; m < map.n_messages; ++m)
    EXPECT_NE(std::find(to_msg.begin(), to_msg.end(), m), to_msg.end());
}

// Left-to-right greedy grouping of g equal-ish chunks under a threshold.
std::vector<std::int64_t> greedy_starts(std::int64_t g, Bytes buffer, Bytes threshold) {
  std::vector<std::int64_t> starts{0};
  Bytes acc = 0;
  for (std::int64_t j = 0; j < g; ++j) {
    const Bytes lo = static_cast<Bytes>(static_cast<long double>(j) * buffer / g);
    const Bytes hi = static_cast<Bytes>(static_cast<long double>(j + 1) * buffer / g);
    const Bytes s = hi - lo;
    if (j == 0) {
      acc = s;
    } else if (threshold != 0 && acc + s <= threshold) {
      acc += s;
    } else {
      starts.push_back(j);
      acc = s;
    }
  }
  starts.push_back(g);
  return starts;
}

}  // namespace

TEST(PartitionOffset, FloorDivision) {
  EXPECT_EQ(partition_offset(0, 3, 10), 0u);
  EXPECT_EQ(partition_offset(1, 3, 10), 3u);
  EXPECT_EQ(partition_offset(2, 3, 10), 6u);
  EXPECT_EQ(partition_offset(3, 3, 10), 10u);
  // No overflow for buffers close to 2^64.
  const Bytes big = ~Bytes{0} - 7;
  EXPECT_EQ(partition_offset(7, 7, big), big);
  EXPECT_EQ(partition_offset(1, 2, big), big / 2);
}

TEST(Mapping, EqualCountsWithoutAggregation) {
  const auto m = map_partitions_to_messages(4, 4, 4096, 0);
  EXPECT_EQ(m.n_messages, 4);
  EXPECT_EQ(m.base_messages, 4);
  EXPECT_EQ(m.send_to_message, (std::vector<std::int64_t>{0, 1, 2, 3}));
  EXPECT_EQ(m.offsets, (std::vector<Bytes>{0, 1024, 2048, 3072, 4096}));
  EXPECT_EQ(m.send_partitions_of(2), 1);
}

TEST(Mapping, GcdOfPartitionCounts) {
  const auto m = map_partitions_to_messages(6, 4, 1200, 0);
  EXPECT_EQ(m.n_messages, 2);
  EXPECT_EQ(m.send_to_message, (std::vector<std::int64_t>{0, 0, 0, 1, 1, 1}));
  EXPECT_EQ(m.recv_to_message, (std::vector<std::int64_t>{0, 0, 1, 1}));
  EXPECT_EQ(m.message_bytes(0), 600u);
  EXPECT_EQ(m.send_partitions_of(1), 3);
}

TEST(Mapping, CoprimeCountsGiveOneMessage) {
  const auto m = map_partitions_to_messages(7, 5, 1000, 0);
  EXPECT_EQ(m.n_messages, 1);
  EXPECT_EQ(m.message_bytes(0), 1000u);
}

TEST(Mapping, AggregationUnderThreshold) {
  EXPECT_EQ(map_partitions_to_messages(32, 32, 32 * 512, 16384).n_messages, 1);
  EXPECT_EQ(map_partitions_to_messages(32, 32, 32 * 512, 4096).n_messages, 4);
  EXPECT_EQ(map_partitions_to_messages(32, 32, 32 * 512, 1000).n_messages, 32);
  EXPECT_EQ(map_partitions_to_messages(32, 32, 32 * 512, 0).n_messages, 32);
  // Chunks above the threshold are never merged or split.
  EXPECT_EQ(map_partitions_to_messages(4, 4, 4 << 20, 16384).n_messages, 4);
}

TEST(Mapping, ReconstructionForAllSmallCounts) {
  const Bytes buffers[] = {0, 5, 12, 1000, 27720, 1 << 20};
  const Bytes thresholds[] = {0, 1, 100, 4096, 16384, 1 << 30};
  for (std::int64_t ns = 1; ns <= 12; ++ns) {
    for (std::int64_t nr = 1; nr <= 12; ++nr) {
      for (Bytes b : buffers) {
        for (Bytes th : thresholds) {
          SCOPED_TRACE(testing::Message() << ns << "x" << nr << " B=" << b << " th=" << th);
          const auto m = map_partitions_to_messages(ns, nr, b, th);
          const auto g = std::gcd(ns, nr);
          ASSERT_EQ(m.base_messages, g);
          EXPECT_EQ(m.group_starts, greedy_starts(g, b, th));
          ASSERT_EQ(m.offsets.size(), static_cast<std::size_t>(m.n_messages + 1));
          EXPECT_EQ(m.offsets.front(), 0u);
          EXPECT_EQ(m.offsets.back(), b);
          check_side(m, ns, b, m.send_to_message);
          check_side(m, nr, b, m.recv_to_message);
          // What the peer rebuilds from (g, group starts) matches.
          EXPECT_EQ(partitions_to_messages(ns, g, m.group_starts), m.send_to_message);
          EXPECT_EQ(partitions_to_messages(nr, g, m.group_starts), m.recv_to_message);
          EXPECT_EQ(message_offsets(g, m.group_starts, b), m.offsets);
          std::int64_t total = 0;
          for (std::int64_t k = 0; k < m.n_messages; ++k) {
            total += m.send_partitions_of(k);
            const auto width = m.group_starts[static_cast<std::size_t>(k + 1)] -
                               m.group_starts[static_cast<std::size_t>(k)];
            if (th > 0 && width > 1) {
              EXPECT_LE(m.message_bytes(k), th);
            }
          }
          EXPECT_EQ(total, ns);
        }
      }
    }
  }
}

TEST(Mapping, RejectsMalformedLayouts) {
  EXPECT_THROW(partitions_to_messages(5, 2, {0, 2}), ProtocolError);
  EXPECT_THROW(partitions_to_messages(4, 2, {0, 1}), ProtocolError);
  EXPECT_THROW(partitions_to_messages(4, 2, {0, 1, 1, 2}), ProtocolError);
  EXPECT_THROW(partitions_to_messages(4, 2, {1, 2}), ProtocolError);
  EXPECT_THROW(map_partitions_to_messages(0, 4, 10, 0), DomainError);
}

TEST(Channels, RoundRobin) {
  EXPECT_EQ(assign_channels(5, 2), (std::vector<int>{0, 1, 0, 1, 0}));
  EXPECT_EQ(assign_channels(3, 8), (std::vector<int>{0, 1, 2}));
  EXPECT_THROW(assign_channels(3, 0), DomainError);
}

TEST(TagPlan, FirstFitAndRelease) {
  TagPlan plan(100);
  EXPECT_EQ(plan.allocate(1, 40), 0);
  EXPECT_EQ(plan.allocate(1, 40), 40);
  EXPECT_EQ(plan.tags_in_use(1), 80);
  EXPECT_EQ(plan.allocate(1, 40), std::nullopt);
  EXPECT_EQ(plan.allocate(1, 20), 80);
  plan.release(1, 0);
  EXPECT_EQ(plan.allocate(1, 30), 0);
  EXPECT_EQ(plan.allocate(1, 10), 30);
  EXPECT_EQ(plan.allocate(1, 1), std::nullopt);
  // Other peers have their own space.
  EXPECT_EQ(plan.allocate(2, 100), 0);
  EXPECT_EQ(plan.tags_in_use(3), 0);
}

TEST(TagPlan, RequestIdsAndControlTagsAreDistinct) {
  TagPlan plan;
  EXPECT_EQ(plan.next_request_id(), 0);
  EXPECT_EQ(plan.next_request_id(), 1);
  for (std::int64_t r = 0; r < 50; ++r) {
    EXPECT_LT(control_tag::cts(r), 0);
    EXPECT_NE(control_tag::cts(r), control_tag::kRts);
    EXPECT_NE(control_tag::am_data(r), control_tag::kRts);
    for (std::int64_t q = 0; q < 50; ++q) EXPECT_NE(control_tag::cts(r), control_tag::am_data(q));
  }
}
