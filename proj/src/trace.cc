#include "bulktx/trace.h"

#include <algorithm>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "bulktx/lanes.h"

namespace bulktx {

void TraceCollector::record(DataItemId item, TxnId txn, AccessMode mode) {
  const std::uint64_t t = clock_.fetch_add(1, std::memory_order_acq_rel);
  const std::size_t lane = LanePool::current_lane();
  per_lane_[lane % per_lane_.size()].push_back({item, txn, mode, static_cast<std::uint32_t>(lane), t});
}

std::vector<TraceEvent> TraceCollector::events() const {
  std::vector<TraceEvent> out;
  for (const auto& v : per_lane_) out.insert(out.end(), v.begin(), v.end());
  std::sort(out.begin(), out.end(), [](const TraceEvent& a, const TraceEvent& b) {
    return a.item != b.item ? a.item < b.item : a.seq < b.seq;
  });
  std::uint64_t k = 0;
  for (std::size_t i = 0; i < out.size(); ++i) {
    k = (i > 0 && out[i].item == out[i - 1].item) ? k + 1 : 0;
    out[i].seq = k;
  }
  return out;
}

void TraceCollector::clear() {
  for (auto& v : per_lane_) v.clear();
  clock_.store(0);
}

void write_trace(const std::vector<TraceEvent>& events, std::ostream& out) {
  for (const TraceEvent& e : events) {
    out << e.item.encode() << ' ' << e.txn << ' ' << (e.mode == AccessMode::write ? 'w' : 'r') << ' ' << e.lane
        << ' ' << e.seq << '\n';
  }
}

std::vector<TraceEvent> read_trace(std::istream& in) {
  std::vector<TraceEvent> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::uint64_t code;
    char mode;
    TraceEvent e;
    if (!(is >> code >> e.txn >> mode >> e.lane >> e.seq) || (mode != 'r' && mode != 'w')) {
      throw ParseError("bad trace line: " + line);
    }
    e.item = DataItemId::decode(code);
    e.mode = mode == 'w' ? AccessMode::write : AccessMode::read;
    out.push_back(e);
  }
  return out;
}

namespace {

// Calls fn(group) for each run of events on one item, in seq order.
template <typename Fn>
void for_each_item(const std::vector<TraceEvent>& events, Fn fn) {
  std::vector<TraceEvent> sorted = events;
  std::sort(sorted.begin(), sorted.end(), [](const TraceEvent& a, const TraceEvent& b) {
    return a.item != b.item ? a.item < b.item : a.seq < b.seq;
  });
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].item == sorted[i].item) ++j;
    fn(std::span<const TraceEvent>(sorted.data() + i, j - i));
    i = j;
  }
}

}  // namespace

bool check_conflict_order(const std::vector<TraceEvent>& events, std::string* why) {
  bool ok = true;
  for_each_item(events, [&](std::span<const TraceEvent> g) {
    if (!ok) return;
    bool any = false, any_write = false;
    TxnId max_any = 0, max_write = 0;
    for (const TraceEvent& e : g) {
      const bool bad = e.mode == AccessMode::write ? (any && max_any > e.txn) : (any_write && max_write > e.txn);
      if (bad) {
        ok = false;
        if (why) {
          std::ostringstream os;
          os << "item " << to_string(e.item) << ": txn " << e.txn << " accessed after a conflicting access by txn "
             << (e.mode == AccessMode::write ? max_any : max_write);
          *why = os.str();
        }
        return;
      }
      any = true;
      max_any = std::max(max_any, e.txn);
      if (e.mode == AccessMode::write) {
        any_write = true;
        max_write = std::max(max_write, e.txn);
      }
    }
  });
  return ok;
}

SerializationCheck check_serializable(const std::vector<TraceEvent>& events) {
  SerializationCheck out;
  std::unordered_map<TxnId, std::uint32_t> index;
  std::vector<TxnId> ids;
  auto node = [&](TxnId t) {
    auto [it, inserted] = index.try_emplace(t, static_cast<std::uint32_t>(ids.size()));
    if (inserted) ids.push_back(t);
    return it->second;
  };
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for_each_item(events, [&](std::span<const TraceEvent> g) {
    // Last write plus the reads after it are the only sources a new access
    // needs; older conflicts follow transitively.
    std::optional<std::uint32_t> last_write;
    std::vector<std::uint32_t> reads;
    for (const TraceEvent& e : g) {
      const std::uint32_t v = node(e.txn);
      if (e.mode == AccessMode::read) {
        if (last_write && *last_write != v) edges.emplace_back(*last_write, v);
        reads.push_back(v);
      } else {
        if (last_write && *last_write != v) edges.emplace_back(*last_write, v);
        for (std::uint32_t r : reads) {
          if (r != v) edges.emplace_back(r, v);
        }
        reads.clear();
        last_write = v;
      }
    }
  });
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  const std::size_t n = ids.size();
  out.txns = n;
  out.edges = edges.size();
  std::vector<std::vector<std::uint32_t>> succ(n);
  std::vector<std::uint32_t> indeg(n, 0);
  for (auto [a, b] : edges) {
    succ[a].push_back(b);
    ++indeg[b];
  }
  std::vector<std::uint32_t> ready;
  for (std::uint32_t v = 0; v < n; ++v) {
    if (indeg[v] == 0) ready.push_back(v);
  }
  std::size_t seen = 0;
  while (!ready.empty()) {
    const std::uint32_t v = ready.back();
    ready.pop_back();
    ++seen;
    out.order.push_back(ids[v]);
    for (std::uint32_t w : succ[v]) {
      if (--indeg[w] == 0) ready.push_back(w);
    }
  }
  if (seen == n) return out;
  out.acyclic = false;
  // Walk backwards along unresolved vertices until one repeats.
  std::vector<std::vector<std::uint32_t>> pred(n);
  for (auto [a, b] : edges) {
    if (indeg[a] > 0 && indeg[b] > 0) pred[b].push_back(a);
  }
  std::uint32_t v = 0;
  while (indeg[v] == 0) ++v;
  std::vector<std::int64_t> pos(n, -1);
  std::vector<std::uint32_t> walk;
  while (pos[v] < 0) {
    pos[v] = static_cast<std::int64_t>(walk.size());
    walk.push_back(v);
    v = pred[v].front();
  }
  for (std::size_t k = static_cast<std::size_t>(pos[v]); k < walk.size(); ++k) out.cycle.push_back(ids[walk[k]]);
  std::reverse(out.cycle.begin(), out.cycle.end());
  return out;
}

}  // namespace bulktx
