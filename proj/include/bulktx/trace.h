#pragma once

#include <atomic>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "bulktx/txmodel.h"

namespace bulktx {

struct TraceEvent {
  DataItemId item;
  TxnId txn = 0;
  AccessMode mode = AccessMode::read;
  std::uint32_t lane = 0;
  std::uint64_t seq = 0;  // position among accesses to the same item
};

/// Lock-free access recorder: one buffer per lane, a global counter for
/// ordering. Accesses to one item are ordered by the executor's locks, so
/// the counter order is the real per-item order.
class TraceCollector : public AccessRecorder {
 public:
  explicit TraceCollector(std::size_t lanes) : per_lane_(lanes == 0 ? 1 : lanes) {}

  void record(DataItemId item, TxnId txn, AccessMode mode) override;

  // Merged events sorted by (item, seq), seq renumbered from 0 per item.
  std::vector<TraceEvent> events() const;
  void clear();

 private:
  std::vector<std::vector<TraceEvent>> per_lane_;
  std::atomic<std::uint64_t> clock_{0};
};

/// Trace file: one access per line,
///   <item code> <txn> r|w <lane> <seq>
void write_trace(const std::vector<TraceEvent>& events, std::ostream& out);
std::vector<TraceEvent> read_trace(std::istream& in);

// Conflicting accesses to every item appear in strictly increasing txn id
// order. On failure, describes the first offending pair.
bool check_conflict_order(const std::vector<TraceEvent>& events, std::string* why = nullptr);

/// Conflict-serializability: the precedence graph over txns (a -> b when an
/// access of a precedes a conflicting access of b on some item) is acyclic.
struct SerializationCheck {
  bool acyclic = true;
  std::size_t txns = 0;
  std::size_t edges = 0;
  std::vector<TxnId> cycle;  // one cycle when not acyclic
  std::vector<TxnId> order;  // an equivalent serial order when acyclic
};
SerializationCheck check_serializable(const std::vector<TraceEvent>& events);

}  // namespace bulktx
