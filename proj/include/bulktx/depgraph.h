#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <map>
#include <span>
#include <unordered_map>
#include <vector>

#include "bulktx/txmodel.h"

namespace bulktx {

/// T-dependency graph. Vertices are txn ids in ascending order; edges and
/// adjacency lists use vertex indices. An edge u -> v exists iff u and v
/// conflict, u precedes v, and no transaction between them conflicts with
/// both.
struct TDependencyGraph {
  struct Entry {
    std::uint32_t txn;  // vertex index
    AccessMode mode;
  };

  std::vector<TxnId> vertices;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;  // sorted
  std::vector<std::vector<std::uint32_t>> succ;
  std::vector<std::vector<std::uint32_t>> pred;
  // Per-item transaction lists in id order.
  std::unordered_map<DataItemId, std::vector<Entry>> item_lists;

  std::size_t size() const { return vertices.size(); }
  std::uint32_t index_of(TxnId id) const;
  bool has_edge(TxnId from, TxnId to) const;
};

// Per-item lists give candidate edges (every reader since the last writer
// for a write, the last writer for a read); candidates with an intermediate
// transaction conflicting with both ends are then dropped.
TDependencyGraph build_graph(std::span<const TxnId> txns, std::span<const BasicOp> ops);
inline TDependencyGraph build_graph(const PoolOps& p) { return build_graph(p.txns, p.ops); }

// Longest path from a source, per vertex.
std::vector<std::uint32_t> longest_path_depths(const TDependencyGraph& g);

// Vertices reachable from any seed, seeds excluded, ascending.
std::vector<std::uint32_t> descendants(const TDependencyGraph& g, std::span<const std::uint32_t> seeds);

struct RankTable {
  std::vector<TxnId> txns;           // ascending
  std::vector<std::uint32_t> depth;  // per txn
  // Ops sorted by (item encoding, txn id) with their ranks.
  std::vector<BasicOp> ops;
  std::vector<std::uint32_t> op_rank;
  // Depths from one rank scan per group, before propagation across groups.
  std::vector<std::uint32_t> scan_depth;
  std::size_t group_rescans = 0;

  std::size_t size() const { return txns.size(); }
  std::uint32_t index_of(TxnId id) const;
  std::uint32_t depth_of(TxnId id) const { return depth[index_of(id)]; }
  std::uint32_t max_depth() const;
  std::vector<TxnId> k_set(std::uint32_t k) const;
};

/// Rank pipeline: stable sort by (item, id), group boundaries, per-group rank
/// scan, sort by (id, rank), max rank per transaction. A single scan can
/// underestimate depth when a chain crosses items, so groups are rescanned
/// with the current depths as lower bounds until nothing changes.
RankTable compute_ranks(std::span<const TxnId> txns, std::span<const BasicOp> ops);
inline RankTable compute_ranks(const PoolOps& p) { return compute_ranks(p.txns, p.ops); }

/// Depths of a growing pool from which 0-sets are repeatedly removed.
/// Removing the 0-set lowers every remaining depth by exactly one, so depths
/// are kept absolute against a moving base.
class KSetTracker {
 public:
  using Access = std::pair<DataItemId, AccessMode>;

  // ids must increase across calls.
  void add(TxnId id, std::vector<Access> accesses);
  std::vector<TxnId> extract_zero_set();
  // Removes arbitrary txns and recomputes the rest from scratch.
  void remove(std::span<const TxnId> ids);
  void clear();

  std::size_t size() const { return txns_.size(); }
  bool empty() const { return txns_.empty(); }
  std::size_t zero_set_size() const;
  std::uint32_t depth_of(TxnId id) const;
  std::uint32_t max_depth() const;
  // Remaining txns with relative depths, ascending by id.
  std::vector<std::pair<TxnId, std::uint32_t>> depths() const;
  std::vector<TxnId> ids() const;

 private:
  struct Group {
    bool has_write = false;
    std::uint64_t last_write = 0;
    bool has_reads = false;
    std::uint64_t max_read = 0;
  };
  struct Txn {
    std::uint64_t abs = 0;
    std::vector<Access> accesses;
  };

  std::uint64_t base_ = 0;
  std::map<TxnId, Txn> txns_;
  std::unordered_map<DataItemId, Group> groups_;
  std::deque<std::vector<TxnId>> buckets_;  // index = abs - base
};

struct GraphStats {
  std::uint32_t d = 0;   // depth of the graph
  std::size_t w0 = 0;    // size of the 0-set
  std::size_t c = 0;     // cross-partition transactions
};

// c counts txns flagged cross-partition.
GraphStats graph_stats(const RankTable& ranks, std::span<const std::uint8_t> cross_partition);
// c counts vertices with more than one predecessor.
GraphStats graph_stats(const RankTable& ranks, const TDependencyGraph& g);

/// Debug dump, one vertex per line:
///   v <id> depth=<d> -> <succ id> <succ id> ...
void dump_graph(const TDependencyGraph& g, std::span<const std::uint32_t> depths, std::ostream& out);

struct DumpedVertex {
  TxnId id = 0;
  std::uint32_t depth = 0;
  std::vector<TxnId> succ;
};
std::vector<DumpedVertex> read_graph_dump(std::istream& in);

}  // namespace bulktx
