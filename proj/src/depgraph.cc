#include "bulktx/depgraph.h"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

namespace bulktx {
namespace {

std::uint32_t dense_index(std::span<const TxnId> txns, TxnId id) {
  auto it = std::lower_bound(txns.begin(), txns.end(), id);
  if (it == txns.end() || *it != id) throw SchedulingError("op refers to unknown txn " + std::to_string(id));
  return static_cast<std::uint32_t>(it - txns.begin());
}

void check_ascending(std::span<const TxnId> txns) {
  for (std::size_t i = 1; i < txns.size(); ++i) {
    if (txns[i] <= txns[i - 1]) throw SchedulingError("txn ids must be strictly increasing");
  }
}

// One op per (item, txn), a write dominating; sorted by (item, txn).
std::vector<BasicOp> normalize(std::span<const BasicOp> ops) {
  std::vector<BasicOp> out(ops.begin(), ops.end());
  std::sort(out.begin(), out.end(), [](const BasicOp& a, const BasicOp& b) {
    const auto ea = a.item.encode(), eb = b.item.encode();
    return ea != eb ? ea < eb : a.txn < b.txn;
  });
  std::size_t w = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (w > 0 && out[w - 1].item == out[i].item && out[w - 1].txn == out[i].txn) {
      if (out[i].mode == AccessMode::write) out[w - 1].mode = AccessMode::write;
    } else {
      out[w++] = out[i];
    }
  }
  out.resize(w);
  return out;
}

// Sorted (item, write?) footprint of one vertex, for pairwise conflict tests.
using Footprints = std::vector<std::vector<std::pair<DataItemId, bool>>>;

bool footprints_conflict(const std::vector<std::pair<DataItemId, bool>>& a,
                         const std::vector<std::pair<DataItemId, bool>>& b) {
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i].first < b[j].first) {
      ++i;
    } else if (b[j].first < a[i].first) {
      ++j;
    } else {
      if (a[i].second || b[j].second) return true;
      ++i;
      ++j;
    }
  }
  return false;
}

}  // namespace

// ------------------------------------------------------------------ graph

std::uint32_t TDependencyGraph::index_of(TxnId id) const { return dense_index(vertices, id); }

bool TDependencyGraph::has_edge(TxnId from, TxnId to) const {
  auto a = std::lower_bound(vertices.begin(), vertices.end(), from);
  auto b = std::lower_bound(vertices.begin(), vertices.end(), to);
  if (a == vertices.end() || *a != from || b == vertices.end() || *b != to) return false;
  const std::pair<std::uint32_t, std::uint32_t> e{static_cast<std::uint32_t>(a - vertices.begin()),
                                                  static_cast<std::uint32_t>(b - vertices.begin())};
  return std::binary_search(edges.begin(), edges.end(), e);
}

TDependencyGraph build_graph(std::span<const TxnId> txns, std::span<const BasicOp> raw_ops) {
  check_ascending(txns);
  const std::vector<BasicOp> normalized = normalize(raw_ops);
  std::span<const BasicOp> ops = normalized;
  TDependencyGraph g;
  g.vertices.assign(txns.begin(), txns.end());
  const std::size_t n = txns.size();
  g.succ.resize(n);
  g.pred.resize(n);

  std::vector<std::uint32_t> order(ops.size());
  std::vector<std::uint32_t> owner(ops.size());
  for (std::size_t i = 0; i < ops.size(); ++i) owner[i] = dense_index(txns, ops[i].txn);
  std::iota(order.begin(), order.end(), 0u);
  std::stable_sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) { return owner[a] < owner[b]; });

  Footprints fp(n);
  for (std::size_t i = 0; i < ops.size(); ++i) {
    fp[owner[i]].emplace_back(ops[i].item, ops[i].mode == AccessMode::write);
  }
  for (auto& f : fp) std::sort(f.begin(), f.end());

  struct ListState {
    std::int64_t last_write = -1;
  };
  std::unordered_map<DataItemId, ListState> state;
  // Position of each op inside its item list.
  std::vector<std::uint32_t> position(ops.size());
  std::vector<std::pair<std::uint32_t, std::uint32_t>> candidates;

  for (std::uint32_t oi : order) {
    const BasicOp& op = ops[oi];
    const std::uint32_t v = owner[oi];
    auto& list = g.item_lists[op.item];
    ListState& st = state[op.item];
    if (op.mode == AccessMode::read) {
      if (st.last_write >= 0) candidates.emplace_back(list[static_cast<std::size_t>(st.last_write)].txn, v);
    } else {
      const std::size_t first_after = static_cast<std::size_t>(st.last_write + 1);
      if (first_after < list.size()) {
        for (std::size_t k = first_after; k < list.size(); ++k) candidates.emplace_back(list[k].txn, v);
      } else if (st.last_write >= 0) {
        candidates.emplace_back(list[static_cast<std::size_t>(st.last_write)].txn, v);
      }
      st.last_write = static_cast<std::int64_t>(list.size());
    }
    position[oi] = static_cast<std::uint32_t>(list.size());
    list.push_back({v, op.mode});
  }
  std::sort(candidates.begin(), candidates.end());
  candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

  // Ops of each vertex, for scanning the list segments between u and v.
  std::vector<std::vector<std::uint32_t>> ops_of(n);
  for (std::uint32_t oi : order) ops_of[owner[oi]].push_back(oi);

  for (auto [u, v] : candidates) {
    bool shadowed = false;
    for (std::uint32_t oi : ops_of[v]) {
      const auto& list = g.item_lists[ops[oi].item];
      const bool v_writes = ops[oi].mode == AccessMode::write;
      for (std::size_t k = position[oi]; k-- > 0;) {
        const auto& e = list[k];
        if (e.txn <= u) break;
        if (!v_writes && e.mode == AccessMode::read) continue;
        if (footprints_conflict(fp[u], fp[e.txn])) {
          shadowed = true;
          break;
        }
      }
      if (shadowed) break;
    }
    if (!shadowed) g.edges.emplace_back(u, v);
  }
  for (auto [u, v] : g.edges) {
    g.succ[u].push_back(v);
    g.pred[v].push_back(u);
  }
  return g;
}

std::vector<std::uint32_t> longest_path_depths(const TDependencyGraph& g) {
  std::vector<std::uint32_t> depth(g.size(), 0);
  for (std::size_t v = 0; v < g.size(); ++v) {
    for (std::uint32_t u : g.pred[v]) {
      if (u >= v) throw SchedulingError("dependency graph edge against id order");
      depth[v] = std::max(depth[v], depth[u] + 1);
    }
  }
  return depth;
}

std::vector<std::uint32_t> descendants(const TDependencyGraph& g, std::span<const std::uint32_t> seeds) {
  std::vector<std::uint8_t> mark(g.size(), 0);
  std::vector<std::uint32_t> stack(seeds.begin(), seeds.end());
  for (std::uint32_t s : seeds) mark[s] = 2;
  while (!stack.empty()) {
    const std::uint32_t u = stack.back();
    stack.pop_back();
    for (std::uint32_t v : g.succ[u]) {
      if (mark[v]) continue;
      mark[v] = 1;
      stack.push_back(v);
    }
  }
  std::vector<std::uint32_t> out;
  for (std::uint32_t v = 0; v < g.size(); ++v) {
    if (mark[v] == 1) out.push_back(v);
  }
  return out;
}

// ------------------------------------------------------------------ ranks

std::uint32_t RankTable::index_of(TxnId id) const { return dense_index(txns, id); }

std::uint32_t RankTable::max_depth() const {
  return depth.empty() ? 0 : *std::max_element(depth.begin(), depth.end());
}

std::vector<TxnId> RankTable::k_set(std::uint32_t k) const {
  std::vector<TxnId> out;
  for (std::size_t i = 0; i < txns.size(); ++i) {
    if (depth[i] == k) out.push_back(txns[i]);
  }
  return out;
}

RankTable compute_ranks(std::span<const TxnId> txns, std::span<const BasicOp> ops) {
  check_ascending(txns);
  RankTable rt;
  rt.txns.assign(txns.begin(), txns.end());
  const std::size_t n = txns.size();

  // Step 1: sort by (item, id), merging repeats of one txn on one item.
  rt.ops = normalize(ops);
  const std::size_t m = rt.ops.size();
  std::vector<std::uint32_t> owner(m);
  for (std::size_t i = 0; i < m; ++i) owner[i] = dense_index(txns, rt.ops[i].txn);

  // Step 2: group boundaries.
  std::vector<std::uint32_t> group_start;
  for (std::size_t i = 0; i < m; ++i) {
    if (i == 0 || rt.ops[i].item != rt.ops[i - 1].item) group_start.push_back(static_cast<std::uint32_t>(i));
  }
  group_start.push_back(static_cast<std::uint32_t>(m));
  const std::size_t groups = group_start.size() - 1;

  // Step 3: rank scan per group. With zero lower bounds this is the plain
  // rule: first op 0, a write one above the previous op, a read equal to a
  // preceding read or one above a preceding write.
  rt.op_rank.assign(m, 0);
  std::vector<std::uint32_t> est(n, 0);
  auto scan = [&](std::size_t g) {
    bool has_w = false, has_r = false;
    std::uint32_t last_w = 0, max_r = 0;
    for (std::uint32_t i = group_start[g]; i < group_start[g + 1]; ++i) {
      std::uint32_t r;
      if (rt.ops[i].mode == AccessMode::read) {
        r = std::max(est[owner[i]], has_w ? last_w + 1 : 0u);
        max_r = has_r ? std::max(max_r, r) : r;
        has_r = true;
      } else {
        r = std::max(est[owner[i]], has_r ? max_r + 1 : (has_w ? last_w + 1 : 0u));
        has_w = true;
        last_w = r;
        has_r = false;
      }
      rt.op_rank[i] = r;
    }
  };
  for (std::size_t g = 0; g < groups; ++g) scan(g);

  // Steps 4-5: order by (id, rank) and keep the maximum per transaction.
  std::vector<std::uint32_t> by_txn(m);
  std::iota(by_txn.begin(), by_txn.end(), 0u);
  std::sort(by_txn.begin(), by_txn.end(), [&](std::uint32_t a, std::uint32_t b) {
    return owner[a] != owner[b] ? owner[a] < owner[b] : rt.op_rank[a] < rt.op_rank[b];
  });
  for (std::size_t k = 0; k < m; ++k) {
    const std::uint32_t i = by_txn[k];
    if (k + 1 == m || owner[by_txn[k + 1]] != owner[i]) est[owner[i]] = rt.op_rank[i];
  }
  rt.scan_depth = est;

  // Propagate across groups until stable.
  std::vector<std::vector<std::uint32_t>> groups_of(n);
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::uint32_t i = group_start[g]; i < group_start[g + 1]; ++i) {
      groups_of[owner[i]].push_back(static_cast<std::uint32_t>(g));
    }
  }
  std::deque<std::uint32_t> queue;
  std::vector<std::uint8_t> queued(groups, 1);
  for (std::size_t g = 0; g < groups; ++g) queue.push_back(static_cast<std::uint32_t>(g));
  while (!queue.empty()) {
    const std::uint32_t g = queue.front();
    queue.pop_front();
    queued[g] = 0;
    ++rt.group_rescans;
    scan(g);
    for (std::uint32_t i = group_start[g]; i < group_start[g + 1]; ++i) {
      const std::uint32_t t = owner[i];
      if (rt.op_rank[i] <= est[t]) continue;
      est[t] = rt.op_rank[i];
      for (std::uint32_t h : groups_of[t]) {
        if (h != g && !queued[h]) {
          queued[h] = 1;
          queue.push_back(h);
        }
      }
    }
  }
  for (std::size_t i = 0; i < m; ++i) rt.op_rank[i] = est[owner[i]];
  rt.depth = std::move(est);
  return rt;
}

// --------------------------------------------------------------- tracker

void KSetTracker::add(TxnId id, std::vector<Access> accesses) {
  if (!txns_.empty() && id <= txns_.rbegin()->first) {
    throw SchedulingError("KSetTracker::add: ids must increase");
  }
  std::uint64_t abs = base_;
  for (const auto& [item, mode] : accesses) {
    auto it = groups_.find(item);
    if (it == groups_.end()) continue;
    const Group& g = it->second;
    std::uint64_t need = 0;
    bool has_need = false;
    if (mode == AccessMode::read) {
      if (g.has_write) {
        need = g.last_write + 1;
        has_need = true;
      }
    } else if (g.has_reads) {
      need = g.max_read + 1;
      has_need = true;
    } else if (g.has_write) {
      need = g.last_write + 1;
      has_need = true;
    }
    if (has_need) abs = std::max(abs, need);
  }
  for (const auto& [item, mode] : accesses) {
    Group& g = groups_[item];
    if (mode == AccessMode::read) {
      g.max_read = g.has_reads ? std::max(g.max_read, abs) : abs;
      g.has_reads = true;
    } else {
      g.has_write = true;
      g.last_write = abs;
      g.has_reads = false;
    }
  }
  const std::size_t slot = static_cast<std::size_t>(abs - base_);
  if (buckets_.size() <= slot) buckets_.resize(slot + 1);
  buckets_[slot].push_back(id);
  txns_.emplace(id, Txn{abs, std::move(accesses)});
}

std::vector<TxnId> KSetTracker::extract_zero_set() {
  if (txns_.empty()) return {};
  std::vector<TxnId> out = std::move(buckets_.front());
  buckets_.pop_front();
  for (TxnId id : out) txns_.erase(id);
  ++base_;
  if (txns_.empty()) clear();
  return out;
}

void KSetTracker::remove(std::span<const TxnId> ids) {
  std::map<TxnId, Txn> keep = std::move(txns_);
  for (TxnId id : ids) keep.erase(id);
  clear();
  for (auto& [id, t] : keep) add(id, std::move(t.accesses));
}

void KSetTracker::clear() {
  txns_.clear();
  groups_.clear();
  buckets_.clear();
  base_ = 0;
}

std::size_t KSetTracker::zero_set_size() const { return buckets_.empty() ? 0 : buckets_.front().size(); }

std::uint32_t KSetTracker::depth_of(TxnId id) const {
  auto it = txns_.find(id);
  if (it == txns_.end()) throw SchedulingError("KSetTracker: unknown txn " + std::to_string(id));
  return static_cast<std::uint32_t>(it->second.abs - base_);
}

std::uint32_t KSetTracker::max_depth() const {
  return buckets_.empty() ? 0 : static_cast<std::uint32_t>(buckets_.size() - 1);
}

std::vector<std::pair<TxnId, std::uint32_t>> KSetTracker::depths() const {
  std::vector<std::pair<TxnId, std::uint32_t>> out;
  out.reserve(txns_.size());
  for (const auto& [id, t] : txns_) out.emplace_back(id, static_cast<std::uint32_t>(t.abs - base_));
  return out;
}

std::vector<TxnId> KSetTracker::ids() const {
  std::vector<TxnId> out;
  out.reserve(txns_.size());
  for (const auto& [id, t] : txns_) out.push_back(id);
  return out;
}

// ------------------------------------------------------------------ stats

GraphStats graph_stats(const RankTable& ranks, std::span<const std::uint8_t> cross_partition) {
  GraphStats s;
  s.d = ranks.max_depth();
  s.w0 = static_cast<std::size_t>(std::count(ranks.depth.begin(), ranks.depth.end(), 0u));
  s.c = static_cast<std::size_t>(std::count_if(cross_partition.begin(), cross_partition.end(),
                                               [](std::uint8_t f) { return f != 0; }));
  return s;
}

GraphStats graph_stats(const RankTable& ranks, const TDependencyGraph& g) {
  GraphStats s;
  s.d = ranks.max_depth();
  s.w0 = static_cast<std::size_t>(std::count(ranks.depth.begin(), ranks.depth.end(), 0u));
  s.c = static_cast<std::size_t>(
      std::count_if(g.pred.begin(), g.pred.end(), [](const auto& p) { return p.size() > 1; }));
  return s;
}

// ------------------------------------------------------------------- dump

void dump_graph(const TDependencyGraph& g, std::span<const std::uint32_t> depths, std::ostream& out) {
  for (std::size_t v = 0; v < g.size(); ++v) {
    out << "v " << g.vertices[v] << " depth=" << (v < depths.size() ? depths[v] : 0) << " ->";
    for (std::uint32_t s : g.succ[v]) out << ' ' << g.vertices[s];
    out << '\n';
  }
}

std::vector<DumpedVertex> read_graph_dump(std::istream& in) {
  std::vector<DumpedVertex> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string tag, depth, arrow;
    DumpedVertex v;
    if (!(is >> tag >> v.id >> depth >> arrow) || tag != "v" || !depth.starts_with("depth=") || arrow != "->") {
      throw ParseError("bad graph dump line: " + line);
    }
    v.depth = static_cast<std::uint32_t>(std::stoul(depth.substr(6)));
    TxnId s;
    while (is >> s) v.succ.push_back(s);
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace bulktx
