#include <algorithm>

#include "bulktx/executors.h"

namespace bulktx {

RecoveryResult recover(ColumnStore& store, InsertBuffer& inserts, UndoLog& undo, const TDependencyGraph* graph,
                       std::span<const TxnSignature> bulk, std::span<TxnStatus> status,
                       std::span<const std::uint8_t> wrote, std::span<const std::uint8_t> logged, bool cascade) {
  RecoveryResult out;
  std::vector<std::uint32_t> marked;
  for (std::uint32_t i = 0; i < bulk.size(); ++i) {
    if (undo.status(i) == UndoLog::Status::marked) marked.push_back(i);
  }
  if (cascade && graph && !marked.empty()) {
    if (graph->size() != bulk.size()) throw RecoveryError("dependency graph does not match the bulk");
    out.cascaded = descendants(*graph, marked);
  }
  std::vector<std::uint32_t> all = marked;
  all.insert(all.end(), out.cascaded.begin(), out.cascaded.end());
  std::sort(all.begin(), all.end(), std::greater<>());
  for (std::uint32_t i : all) {
    if (wrote[i] && !logged[i]) {
      throw RecoveryError("txn " + std::to_string(bulk[i].id) + " must be rolled back but kept no undo log");
    }
  }
  for (std::uint32_t i : all) {
    undo.rollback(store, i);
    inserts.discard(bulk[i].id);
    out.undone.push_back(i);
  }
  for (std::uint32_t i : marked) status[i] = TxnStatus::aborted;
  for (std::uint32_t i : out.cascaded) {
    if (status[i] == TxnStatus::committed) status[i] = TxnStatus::rolled_back;
  }
  return out;
}

}  // namespace bulktx
