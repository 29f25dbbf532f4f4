#include <doctest.h>

#include <random>
#include <sstream>

#include "bulktx/depgraph.h"
#include "oracles.h"

using namespace bulktx;

namespace {

const DataItemId A{0, 1, 0}, B{0, 1, 1}, C{0, 1, 2};
constexpr auto R = AccessMode::read;
constexpr auto W = AccessMode::write;

// T1 writes a; T2 and T3 read a and write b and c; T4 writes a, reads b, c.
std::vector<BasicOp> diamond_ops() {
  return {{A, 1, W}, {A, 2, R}, {B, 2, W}, {A, 3, R}, {C, 3, W}, {A, 4, W}, {B, 4, R}, {C, 4, R}};
}
const std::vector<TxnId> kDiamond = {1, 2, 3, 4};

struct RandomPool {
  std::vector<TxnId> txns;
  std::vector<BasicOp> ops;
};

RandomPool random_pool(std::mt19937_64& rng, std::size_t n, std::uint64_t items, double write_rate) {
  RandomPool p;
  std::uniform_real_distribution<double> u(0, 1);
  TxnId id = rng() % 5;
  for (std::size_t i = 0; i < n; ++i) {
    p.txns.push_back(id);
    const std::size_t k = 1 + rng() % 3;
    for (std::size_t j = 0; j < k; ++j) {
      p.ops.push_back({{0, 1, rng() % items}, id, u(rng) < write_rate ? W : R});
    }
    id += 1 + rng() % 3;
  }
  std::shuffle(p.ops.begin(), p.ops.end(), rng);
  return p;
}

}  // namespace

TEST_CASE("diamond pool: edges and depths") {
  const auto ops = diamond_ops();
  const TDependencyGraph g = build_graph(kDiamond, ops);
  CHECK(g.has_edge(1, 2));
  CHECK(g.has_edge(1, 3));
  CHECK(g.has_edge(2, 4));
  CHECK(g.has_edge(3, 4));
  CHECK_FALSE(g.has_edge(1, 4));
  CHECK(g.edges.size() == 4);
  CHECK(longest_path_depths(g) == std::vector<std::uint32_t>{0, 1, 1, 2});
  const RankTable r = compute_ranks(kDiamond, ops);
  CHECK(r.depth == std::vector<std::uint32_t>{0, 1, 1, 2});
  CHECK(r.k_set(1) == std::vector<TxnId>{2, 3});
  CHECK(r.max_depth() == 2);
}

TEST_CASE("graph and ranks agree with the brute-force definition") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 400; ++trial) {
    const auto p = random_pool(rng, 1 + rng() % 40, 1 + rng() % 12, 0.4);
    const TDependencyGraph g = build_graph(p.txns, p.ops);
    const auto pool = oracle::make_pool(p.txns, p.ops);
    const auto e = oracle::edges(pool);
    std::set<std::pair<std::uint32_t, std::uint32_t>> got(g.edges.begin(), g.edges.end());
    REQUIRE(got == e);
    const auto d = oracle::depths(p.txns.size(), e);
    CHECK(longest_path_depths(g) == d);
    CHECK(compute_ranks(p.txns, p.ops).depth == d);
    CHECK(oracle::same_level_conflict_free(pool, d));
    CHECK(oracle::has_parent_level(pool, d));
  }
}

TEST_CASE("a chain across items needs more than one rank scan") {
  // 0 -> 1 through x, 1 -> 2 through y, 2 -> 3 through x again.
  const DataItemId x{0, 1, 0}, y{0, 1, 1};
  const std::vector<TxnId> t = {0, 1, 2, 3};
  const std::vector<BasicOp> ops = {{x, 0, W}, {x, 1, R}, {y, 1, W}, {y, 2, W}, {x, 2, R}, {x, 3, W}};
  const RankTable r = compute_ranks(t, ops);
  CHECK(r.depth == std::vector<std::uint32_t>{0, 1, 2, 3});
}

TEST_CASE("descendants match reachability") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const auto p = random_pool(rng, 1 + rng() % 30, 1 + rng() % 8, 0.5);
    const TDependencyGraph g = build_graph(p.txns, p.ops);
    const auto e = oracle::edges(oracle::make_pool(p.txns, p.ops));
    std::vector<std::uint32_t> seeds;
    for (std::uint32_t i = 0; i < g.size(); ++i) {
      if (rng() % 5 == 0) seeds.push_back(i);
    }
    CHECK(descendants(g, seeds) == oracle::descendants(g.size(), e, seeds));
  }
}

TEST_CASE("k-set tracker peels the same rounds as the definition") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 150; ++trial) {
    auto p = random_pool(rng, 1 + rng() % 40, 1 + rng() % 10, 0.5);
    KSetTracker tr;
    std::map<TxnId, std::vector<KSetTracker::Access>> acc;
    for (TxnId id : p.txns) acc[id];
    for (const BasicOp& op : p.ops) acc[op.txn].emplace_back(op.item, op.mode);
    // Feed in two halves to exercise incremental adds.
    const std::size_t half = p.txns.size() / 2;
    for (std::size_t i = 0; i < half; ++i) tr.add(p.txns[i], acc[p.txns[i]]);
    std::vector<TxnId> first;
    if (half > 0) first = tr.extract_zero_set();
    for (std::size_t i = half; i < p.txns.size(); ++i) tr.add(p.txns[i], acc[p.txns[i]]);

    // Reference: first round on the first half, then peel what is left.
    std::vector<TxnId> rest_txns;
    std::vector<BasicOp> rest_ops;
    std::set<TxnId> gone(first.begin(), first.end());
    if (half > 0) {
      std::vector<TxnId> h(p.txns.begin(), p.txns.begin() + static_cast<std::ptrdiff_t>(half));
      std::vector<BasicOp> hops;
      for (const BasicOp& op : p.ops) {
        if (op.txn <= h.back()) hops.push_back(op);
      }
      CHECK(first == oracle::peel_rounds(oracle::make_pool(h, hops)).front());
    }
    for (TxnId id : p.txns) {
      if (!gone.count(id)) rest_txns.push_back(id);
    }
    for (const BasicOp& op : p.ops) {
      if (!gone.count(op.txn)) rest_ops.push_back(op);
    }
    for (const auto& round : oracle::peel_rounds(oracle::make_pool(rest_txns, rest_ops))) {
      CHECK(tr.extract_zero_set() == round);
    }
    CHECK(tr.empty());
  }
}

TEST_CASE("tracker depths follow removal of arbitrary txns") {
  KSetTracker tr;
  const auto ops = diamond_ops();
  for (TxnId id : kDiamond) {
    std::vector<KSetTracker::Access> a;
    for (const BasicOp& op : ops) {
      if (op.txn == id) a.emplace_back(op.item, op.mode);
    }
    tr.add(id, a);
  }
  CHECK(tr.depth_of(4) == 2);
  CHECK(tr.zero_set_size() == 1);
  const TxnId drop[] = {1};
  tr.remove(drop);
  CHECK(tr.depth_of(2) == 0);
  CHECK(tr.depth_of(4) == 1);
  CHECK(tr.max_depth() == 1);
}

TEST_CASE("graph stats") {
  const auto ops = diamond_ops();
  const RankTable r = compute_ranks(kDiamond, ops);
  const TDependencyGraph g = build_graph(kDiamond, ops);
  const GraphStats s = graph_stats(r, g);
  CHECK(s.d == 2);
  CHECK(s.w0 == 1);
  CHECK(s.c == 1);  // T4 has two predecessors
  const std::uint8_t cross[] = {0, 1, 1, 0};
  CHECK(graph_stats(r, cross).c == 2);
}

TEST_CASE("graph dump round-trips") {
  const auto ops = diamond_ops();
  const TDependencyGraph g = build_graph(kDiamond, ops);
  std::stringstream ss;
  dump_graph(g, longest_path_depths(g), ss);
  const auto back = read_graph_dump(ss);
  REQUIRE(back.size() == 4);
  CHECK(back[0].succ == std::vector<TxnId>{2, 3});
  CHECK(back[3].depth == 2);
}

TEST_CASE("ops naming an unknown txn are rejected") {
  const std::vector<TxnId> t = {1, 2};
  const std::vector<BasicOp> ops = {{A, 3, W}};
  CHECK_THROWS_AS(build_graph(t, ops), SchedulingError);
  const std::vector<TxnId> unordered = {2, 1};
  CHECK_THROWS_AS(compute_ranks(unordered, {}), SchedulingError);
}
