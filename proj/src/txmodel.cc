#include "bulktx/txmodel.h"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace bulktx {

const char* to_string(TxnStatus s) {
  switch (s) {
    case TxnStatus::committed:
      return "committed";
    case TxnStatus::aborted:
      return "aborted";
    case TxnStatus::rolled_back:
      return "rolled_back";
  }
  return "?";
}

// ------------------------------------------------------------- DeclaredSet

DeclaredSet::DeclaredSet(const Footprint& fp) {
  for (const ItemAccess& a : fp.accesses) {
    Entry& e = items_[a.item];
    e.write = e.write || a.mode == AccessMode::write;
    ++e.remaining;
  }
  for (auto [t, mode] : fp.unknown) {
    bool& w = coarse_[t];
    w = w || mode == AccessMode::write;
  }
}

void DeclaredSet::check(DataItemId item, AccessMode mode) {
  auto it = items_.find(item);
  if (it != items_.end()) {
    Entry& e = it->second;
    if (mode == AccessMode::write && !e.write) {
      throw FootprintViolation("write to " + to_string(item) + " declared as read");
    }
    if (e.remaining == 0) {
      throw FootprintViolation(to_string(item) + " accessed more often than declared");
    }
    --e.remaining;
    return;
  }
  auto ct = coarse_.find(item.table);
  if (ct != coarse_.end() && (mode == AccessMode::read || ct->second)) return;
  throw FootprintViolation("undeclared access to " + to_string(item));
}

// -------------------------------------------------------------- TxnContext

DataItemId TxnContext::item_of(TableId t, RowId row, ColumnId c) const {
  const ColumnId kc = store_.def(t).key_column;
  return logical_item(t, c, store_.read_item({t, kc, row}));
}

void TxnContext::enter(DataItemId item, AccessMode mode) {
  if (declared_) declared_->check(item, mode);
  if (guard_) guard_->before(item, mode);
  if (recorder_) recorder_->record(item, sig_.id, mode);
}

void TxnContext::leave(DataItemId item) {
  if (guard_) guard_->after(item);
}

std::optional<RowId> TxnContext::lookup(TableId t, Value key) {
  if (key < 0 || static_cast<RowId>(key) > DataItemId::kRowMask) return std::nullopt;
  const DataItemId item = logical_item(t, store_.def(t).key_column, key);
  enter(item, AccessMode::read);
  auto row = store_.find_live(t, key);
  leave(item);
  return row;
}

Value TxnContext::read(TableId t, RowId row, ColumnId c) {
  const DataItemId item = item_of(t, row, c);
  enter(item, AccessMode::read);
  const Value v = store_.read_item({t, c, row});
  leave(item);
  return v;
}

void TxnContext::write(TableId t, RowId row, ColumnId c, Value v) {
  const DataItemId item = item_of(t, row, c);
  enter(item, AccessMode::write);
  const DataItemId cell{t, c, row};
  if (undo_) {
    UndoRecord rec;
    rec.kind = UndoRecord::Kind::value;
    rec.item = cell;
    rec.old_value = store_.read_item(cell);
    undo_->push_back(std::move(rec));
  }
  store_.write_item(cell, v);
  wrote_ = true;
  leave(item);
}

std::string TxnContext::read_bytes(TableId t, RowId row, ColumnId c) {
  const DataItemId item = item_of(t, row, c);
  enter(item, AccessMode::read);
  std::string v = store_.read_bytes({t, c, row});
  leave(item);
  return v;
}

void TxnContext::write_bytes(TableId t, RowId row, ColumnId c, std::string_view bytes) {
  const DataItemId item = item_of(t, row, c);
  enter(item, AccessMode::write);
  const DataItemId cell{t, c, row};
  if (undo_) {
    UndoRecord rec;
    rec.kind = UndoRecord::Kind::bytes;
    rec.item = cell;
    rec.old_bytes = store_.read_bytes(cell);
    undo_->push_back(std::move(rec));
  }
  store_.write_bytes(cell, bytes);
  wrote_ = true;
  leave(item);
}

void TxnContext::insert(TableId t, std::vector<Cell> cells) {
  inserts_.add(sig_.id, t, std::move(cells));
  inserted_ = true;
}

void TxnContext::erase(TableId t, RowId row) {
  const std::size_t ncols = store_.def(t).columns.size();
  std::vector<DataItemId> items;
  items.reserve(ncols);
  for (ColumnId c = 0; c < ncols; ++c) items.push_back(item_of(t, row, c));
  for (const DataItemId& item : items) enter(item, AccessMode::write);
  if (undo_) {
    UndoRecord rec;
    rec.kind = UndoRecord::Kind::liveness;
    rec.item = DataItemId{t, 0, row};
    rec.old_value = store_.is_live(t, row) ? 1 : 0;
    undo_->push_back(std::move(rec));
  }
  store_.delete_row(t, row);
  wrote_ = true;
  for (const DataItemId& item : items) leave(item);
}

void TxnContext::decision_point() {
  if (strict_two_phase_ && type_.is_two_phase && wrote_) {
    throw RegistryError("two-phase type " + type_.name + " wrote before its decision point");
  }
  if (forced_abort_) throw TxnAbort{"forced"};
}

void TxnContext::abort(std::string reason) {
  if (strict_two_phase_ && type_.is_two_phase && wrote_) {
    throw RegistryError("two-phase type " + type_.name + " aborted after writing");
  }
  throw TxnAbort{std::move(reason)};
}

TxnStatus run_procedure(TxnContext& ctx, const TxnType& type) {
  try {
    type.procedure(ctx, ctx.params());
    return TxnStatus::committed;
  } catch (const TxnAbort&) {
    return TxnStatus::aborted;
  } catch (const FootprintViolation&) {
    throw;
  } catch (const AddressingError&) {
    return TxnStatus::aborted;
  }
}

// ------------------------------------------------------------ TypeRegistry

TypeId TypeRegistry::register_type(TxnType type) {
  if (types_.count(type.type_id)) {
    throw RegistryError("duplicate type id " + std::to_string(type.type_id));
  }
  if (!type.procedure || !type.declared_ops) {
    throw RegistryError("type " + type.name + " needs a procedure and a footprint");
  }
  const TypeId id = type.type_id;
  types_.emplace(id, std::move(type));
  compute_undo_set();
  return id;
}

const TxnType& TypeRegistry::get(TypeId id) const {
  auto it = types_.find(id);
  if (it == types_.end()) throw RegistryError("unknown type id " + std::to_string(id));
  return it->second;
}

std::vector<TypeId> TypeRegistry::ids() const {
  std::vector<TypeId> out;
  for (const auto& [id, t] : types_) out.push_back(id);
  return out;
}

void TypeRegistry::compute_undo_set() {
  undo_set_.clear();
  std::vector<TypeId> frontier;
  for (const auto& [id, t] : types_) {
    if (!t.is_two_phase) {
      undo_set_.insert(id);
      frontier.push_back(id);
    }
  }
  while (!frontier.empty()) {
    const TxnType& a = types_.at(frontier.back());
    frontier.pop_back();
    for (const auto& [id, b] : types_) {
      if (undo_set_.count(id)) continue;
      const bool shared = std::any_of(a.tables.begin(), a.tables.end(), [&](TableId t) {
        return std::find(b.tables.begin(), b.tables.end(), t) != b.tables.end();
      });
      if (shared) {
        undo_set_.insert(id);
        frontier.push_back(id);
      }
    }
  }
}

bool TypeRegistry::needs_undo(TypeId id) const { return undo_set_.count(id) != 0; }

Footprint TypeRegistry::declared_ops(const TxnSignature& sig) const {
  return get(sig.type).declared_ops(sig.params);
}

std::vector<Value> TypeRegistry::partition_keys(const TxnSignature& sig) const {
  const TxnType& t = get(sig.type);
  if (!t.partition_keys) return {};
  return t.partition_keys(sig.params);
}

std::optional<Value> TypeRegistry::partition_of(const TxnSignature& sig, Value partition_size) const {
  const TxnType& t = get(sig.type);
  if (!t.is_single_partition) return std::nullopt;
  const std::vector<Value> keys = partition_keys(sig);
  if (keys.empty()) return Value{0};
  const Value p = keys.front() / partition_size;
  for (Value k : keys) {
    if (k / partition_size != p) return std::nullopt;
  }
  return p;
}

// ------------------------------------------------------------ op footprints

std::vector<std::pair<DataItemId, AccessMode>> normalized_accesses(const Footprint& fp,
                                                                   std::span<const TableId> coarse) {
  auto is_coarse = [&](TableId t) { return std::find(coarse.begin(), coarse.end(), t) != coarse.end(); };
  std::vector<std::pair<DataItemId, AccessMode>> out;
  out.reserve(fp.accesses.size() + fp.unknown.size());
  for (const ItemAccess& a : fp.accesses) {
    out.emplace_back(is_coarse(a.item.table) ? DataItemId::whole_table(a.item.table) : a.item, a.mode);
  }
  for (auto [t, mode] : fp.unknown) out.emplace_back(DataItemId::whole_table(t), mode);
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first < b.first : a.second > b.second;
  });
  // Sorted with the write first within an item, so unique keeps the write.
  out.erase(std::unique(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.first == b.first; }),
            out.end());
  return out;
}

std::vector<BasicOp> declared_ops_of(const TypeRegistry& registry, const TxnSignature& sig) {
  const Footprint fp = registry.declared_ops(sig);
  std::vector<TableId> coarse;
  for (auto [t, mode] : fp.unknown) coarse.push_back(t);
  std::vector<BasicOp> ops;
  for (auto [item, mode] : normalized_accesses(fp, coarse)) ops.push_back({item, sig.id, mode});
  return ops;
}

PoolOps collect_ops(const TypeRegistry& registry, std::span<const TxnSignature> txns,
                    std::span<const TableId> extra_coarse) {
  PoolOps out;
  std::vector<Footprint> fps;
  fps.reserve(txns.size());
  out.coarse_tables.assign(extra_coarse.begin(), extra_coarse.end());
  for (const TxnSignature& sig : txns) {
    fps.push_back(registry.declared_ops(sig));
    for (auto [t, mode] : fps.back().unknown) out.coarse_tables.push_back(t);
  }
  std::sort(out.coarse_tables.begin(), out.coarse_tables.end());
  out.coarse_tables.erase(std::unique(out.coarse_tables.begin(), out.coarse_tables.end()),
                          out.coarse_tables.end());
  out.txns.reserve(txns.size());
  for (std::size_t i = 0; i < txns.size(); ++i) {
    if (i > 0 && txns[i].id <= txns[i - 1].id) throw SchedulingError("transactions not in id order");
    out.txns.push_back(txns[i].id);
    for (auto [item, mode] : normalized_accesses(fps[i], out.coarse_tables)) {
      out.ops.push_back({item, txns[i].id, mode});
    }
  }
  return out;
}

// ------------------------------------------------------------------ TxnPool

TxnSignature TxnPool::submit(TypeId type, std::vector<Value> params) {
  if (!registry_.contains(type)) throw RegistryError("submit: unknown type id " + std::to_string(type));
  std::lock_guard lock(mu_);
  TxnSignature sig{next_id_++, type, std::move(params)};
  pending_.push_back(sig);
  return sig;
}

void TxnPool::submit_signature(TxnSignature sig) {
  if (!registry_.contains(sig.type)) {
    throw RegistryError("submit: unknown type id " + std::to_string(sig.type));
  }
  std::lock_guard lock(mu_);
  if (sig.id < next_id_) throw SchedulingError("submit: id " + std::to_string(sig.id) + " is not increasing");
  next_id_ = sig.id + 1;
  pending_.push_back(std::move(sig));
}

std::vector<TxnSignature> TxnPool::take_prefix(std::size_t max_count) {
  std::lock_guard lock(mu_);
  const std::size_t n = std::min(max_count, pending_.size());
  std::vector<TxnSignature> out(std::make_move_iterator(pending_.begin()),
                                std::make_move_iterator(pending_.begin() + static_cast<std::ptrdiff_t>(n)));
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(n));
  return out;
}

std::size_t TxnPool::size() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

TxnId TxnPool::next_id() const {
  std::lock_guard lock(mu_);
  return next_id_;
}

// ------------------------------------------------------- sequential oracle

std::vector<TxnStatus> execute_sequential(ColumnStore& store, const TypeRegistry& registry,
                                          std::span<const TxnSignature> txns, const SeqOptions& options) {
  InsertBuffer inserts;
  std::vector<TxnStatus> status;
  status.reserve(txns.size());
  std::vector<UndoRecord> undo;
  for (std::size_t i = 0; i < txns.size(); ++i) {
    const TxnSignature& sig = txns[i];
    if (!options.any_order && i > 0 && sig.id <= txns[i - 1].id) {
      throw SchedulingError("execute_sequential: ids not increasing");
    }
    if (options.skip && options.skip->count(sig.id)) {
      status.push_back(TxnStatus::aborted);
      continue;
    }
    const TxnType& type = registry.get(sig.type);
    TxnContext ctx(store, inserts, sig, type);
    undo.clear();
    ctx.set_undo(&undo);
    ctx.set_recorder(options.recorder);
    if (options.forced_aborts) ctx.set_forced_abort(options.forced_aborts->count(sig.id) != 0);
    std::optional<DeclaredSet> declared;
    if (options.check_footprints) {
      declared.emplace(registry.declared_ops(sig));
      ctx.set_declared(&*declared);
      ctx.set_strict_two_phase(true);
    }
    const TxnStatus s = run_procedure(ctx, type);
    if (s != TxnStatus::committed) {
      apply_undo(store, undo);
      inserts.discard(sig.id);
    }
    status.push_back(s);
  }
  store.merge_inserts(inserts);
  return status;
}

// ----------------------------------------------------------- workload file

namespace {

template <typename T>
T parse_number(std::string_view s, std::size_t line_no) {
  T v{};
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) {
    throw ParseError("workload line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

constexpr std::string_view kHeader = "# bulktx-workload";

}  // namespace

Workload read_workload(std::istream& in) {
  Workload w;
  std::string raw;
  std::size_t line_no = 0;
  std::optional<TxnId> last;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty()) continue;
    if (line.starts_with(kHeader)) {
      std::istringstream fields{std::string(line.substr(kHeader.size()))};
      std::string kv;
      while (fields >> kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ParseError("workload header: expected key=value, got " + kv);
        w.meta[kv.substr(0, eq)] = kv.substr(eq + 1);
      }
      continue;
    }
    if (line.front() == '#') continue;
    std::vector<std::string_view> parts;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      parts.push_back(trim(line.substr(start, comma == std::string_view::npos ? comma : comma - start)));
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
    if (parts.size() < 2) throw ParseError("workload line " + std::to_string(line_no) + ": need id,type");
    TxnSignature sig;
    sig.id = parts[0].empty() ? (last ? *last + 1 : 0) : parse_number<TxnId>(parts[0], line_no);
    if (last && sig.id <= *last) {
      throw ParseError("workload line " + std::to_string(line_no) + ": ids must increase");
    }
    sig.type = parse_number<TypeId>(parts[1], line_no);
    for (std::size_t i = 2; i < parts.size(); ++i) sig.params.push_back(parse_number<Value>(parts[i], line_no));
    last = sig.id;
    w.txns.push_back(std::move(sig));
  }
  return w;
}

void write_workload(const Workload& w, std::ostream& out) {
  out << kHeader;
  for (const auto& [k, v] : w.meta) out << ' ' << k << '=' << v;
  out << '\n';
  for (const TxnSignature& sig : w.txns) {
    out << sig.id << ',' << sig.type;
    for (Value p : sig.params) out << ',' << p;
    out << '\n';
  }
}

}  // namespace bulktx
