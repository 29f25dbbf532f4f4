#include "bulktx/workloads.h"

#include <algorithm>
#include <charconv>
#include <random>

namespace bulktx {
namespace {

// Portable draws: std distributions differ across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : gen_() % n; }
  Value range(Value lo, Value hi) { return lo + static_cast<Value>(below(static_cast<std::uint64_t>(hi - lo + 1))); }
  double unit() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  bool chance(double p) { return unit() < p; }

 private:
  std::mt19937_64 gen_;
};

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

template <typename T>
T meta_number(const std::map<std::string, std::string>& meta, const std::string& key, T fallback) {
  auto it = meta.find(key);
  if (it == meta.end()) return fallback;
  T out{};
  const std::string& s = it->second;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (ec != std::errc() || p != s.data() + s.size()) throw ParseError("workload meta: bad value for " + key);
  return out;
}

ColumnId col(const ColumnStore& store, TableId t, std::string_view name) {
  auto c = store.def(t).column_id(name);
  if (!c) throw RegistryError("table " + store.def(t).name + " has no column " + std::string(name));
  return *c;
}

TableDef table(std::string name, std::vector<ColumnDef> cols, std::string_view partition = {}) {
  TableDef d;
  d.name = std::move(name);
  d.columns = std::move(cols);
  d.key_column = 0;
  d.partition_column = 0;
  if (!partition.empty()) d.partition_column = *d.column_id(partition);
  return d;
}

ColumnDef fixed(std::string n) { return {std::move(n), ColumnKind::fixed}; }
ColumnDef var(std::string n) { return {std::move(n), ColumnKind::var}; }

std::vector<DataItemId> key_locks(TableId t, std::initializer_list<Value> keys) {
  std::vector<DataItemId> out;
  for (Value k : keys) out.push_back(DataItemId::key_lock(t, k));
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void check_fail(TxnContext& ctx, Value flag) {
  ctx.decision_point();
  if (flag != 0) ctx.abort("injected");
}

// ------------------------------------------------------------------ micro

constexpr std::uint64_t kTypeSalt = 0x9E3779B97F4A7C15ull;

void micro_schema(ColumnStore& store, const WorkloadSpec& spec) {
  const TableId t = store.create_table(table("tuple", {fixed("id"), fixed("val")}));
  for (std::size_t i = 0; i < spec.tuple_count; ++i) {
    const Value k = static_cast<Value>(i);
    store.append_row(t, std::vector<Cell>{k, k});
  }
}

void micro_types(TypeRegistry& reg, const ColumnStore& store, const WorkloadSpec& spec) {
  const TableId t = store.require_table("tuple");
  const ColumnId kid = col(store, t, "id"), kval = col(store, t, "val");
  const std::size_t iters = 100 * spec.x;
  for (std::size_t ty = 0; ty < std::max<std::size_t>(1, spec.T); ++ty) {
    TxnType type;
    type.type_id = static_cast<TypeId>(ty);
    type.name = "micro_" + std::to_string(ty);
    const std::uint64_t salt = (ty + 1) * kTypeSalt;
    type.procedure = [=](TxnContext& ctx, std::span<const Value> p) {
      auto row = ctx.lookup(t, p[0]);
      if (!row) ctx.abort("no tuple");
      const Value v = ctx.read(t, *row, kval);
      ctx.write(t, *row, kval, static_cast<Value>(compute_kernel(static_cast<std::uint64_t>(v) ^ salt, iters)));
    };
    type.declared_ops = [=](std::span<const Value> p) {
      Footprint fp;
      fp.read(logical_item(t, kid, p[0]));
      fp.rmw(logical_item(t, kval, p[0]));
      return fp;
    };
    type.lock_roots = [=](std::span<const Value> p) { return key_locks(t, {p[0]}); };
    type.partition_keys = [](std::span<const Value> p) { return std::vector<Value>{p[0]}; };
    type.tables = {t};
    reg.register_type(std::move(type));
  }
}

void micro_txns(Workload& w, const WorkloadSpec& spec) {
  if (spec.tuple_count == 0) throw Error("micro workload needs at least one tuple");
  Rng rng(spec.seed);
  const std::size_t T = std::max<std::size_t>(1, spec.T);
  for (std::size_t i = 0; i < spec.txn_count; ++i) {
    const TypeId ty = static_cast<TypeId>(rng.below(T));
    Value key = 0;
    if (!rng.chance(spec.alpha) && spec.tuple_count > 1) key = 1 + static_cast<Value>(rng.below(spec.tuple_count - 1));
    w.txns.push_back({i, ty, {key}});
  }
}

// --------------------------------------------------------------- tpcb_like

constexpr Value kTellersPerBranch = 10;
constexpr Value kAccountsPerBranch = 100;

void tpcb_schema(ColumnStore& store, const WorkloadSpec& spec) {
  const TableId b = store.create_table(table("branch", {fixed("b_id"), fixed("balance")}));
  const TableId t = store.create_table(table("teller", {fixed("t_id"), fixed("b_id"), fixed("balance")}, "b_id"));
  const TableId a = store.create_table(table("account", {fixed("a_id"), fixed("b_id"), fixed("balance")}, "b_id"));
  store.create_table(
      table("history", {fixed("h_id"), fixed("a_id"), fixed("t_id"), fixed("b_id"), fixed("delta")}, "b_id"));
  for (Value i = 0; i < static_cast<Value>(spec.f); ++i) {
    store.append_row(b, std::vector<Cell>{i, Value{0}});
    for (Value j = 0; j < kTellersPerBranch; ++j) store.append_row(t, std::vector<Cell>{i * kTellersPerBranch + j, i, Value{0}});
    for (Value j = 0; j < kAccountsPerBranch; ++j) store.append_row(a, std::vector<Cell>{i * kAccountsPerBranch + j, i, Value{0}});
  }
}

void tpcb_types(TypeRegistry& reg, const ColumnStore& store) {
  const TableId b = store.require_table("branch"), t = store.require_table("teller"),
                a = store.require_table("account"), h = store.require_table("history");
  const ColumnId bk = col(store, b, "b_id"), bbal = col(store, b, "balance");
  const ColumnId tk = col(store, t, "t_id"), tbal = col(store, t, "balance");
  const ColumnId ak = col(store, a, "a_id"), abal = col(store, a, "balance");
  TxnType type;
  type.type_id = 0;
  type.name = "account_update";
  // params: branch, teller, account, delta
  type.procedure = [=](TxnContext& ctx, std::span<const Value> p) {
    const auto ra = ctx.lookup(a, p[2]);
    const auto rt = ctx.lookup(t, p[1]);
    const auto rb = ctx.lookup(b, p[0]);
    if (!ra || !rt || !rb) ctx.abort("no such account, teller or branch");
    ctx.decision_point();
    ctx.write(a, *ra, abal, ctx.read(a, *ra, abal) + p[3]);
    ctx.write(t, *rt, tbal, ctx.read(t, *rt, tbal) + p[3]);
    ctx.write(b, *rb, bbal, ctx.read(b, *rb, bbal) + p[3]);
    ctx.insert(h, {static_cast<Value>(ctx.sig().id), p[2], p[1], p[0], p[3]});
  };
  type.declared_ops = [=](std::span<const Value> p) {
    Footprint fp;
    fp.read(logical_item(a, ak, p[2]));
    fp.read(logical_item(t, tk, p[1]));
    fp.read(logical_item(b, bk, p[0]));
    fp.rmw(logical_item(a, abal, p[2]));
    fp.rmw(logical_item(t, tbal, p[1]));
    fp.rmw(logical_item(b, bbal, p[0]));
    return fp;
  };
  type.lock_roots = [=](std::span<const Value> p) { return key_locks(b, {p[0]}); };
  type.partition_keys = [](std::span<const Value> p) { return std::vector<Value>{p[0]}; };
  type.tables = {a, t, b, h};
  reg.register_type(std::move(type));
}

void tpcb_txns(Workload& w, const WorkloadSpec& spec) {
  if (spec.f == 0) throw Error("tpcb_like workload needs f >= 1");
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < spec.txn_count; ++i) {
    const Value br = static_cast<Value>(rng.below(spec.f));
    const Value te = br * kTellersPerBranch + static_cast<Value>(rng.below(kTellersPerBranch));
    const Value ac = br * kAccountsPerBranch + static_cast<Value>(rng.below(kAccountsPerBranch));
    w.txns.push_back({i, 0, {br, te, ac, rng.range(-999, 999)}});
  }
}

// ----------------------------------------------------------------- tm1_like

constexpr Value kNbrBase = 1'000'000'000;
constexpr Value kCfInsertBase = Value{1} << 40;

namespace tm1 {
constexpr TypeId get_subscriber_data = 0;
constexpr TypeId get_new_destination = 1;
constexpr TypeId get_access_data = 2;
constexpr TypeId update_subscriber_data = 3;
constexpr TypeId lookup_subscriber = 4;
constexpr TypeId update_location = 5;
constexpr TypeId insert_call_forwarding = 6;
constexpr TypeId delete_call_forwarding = 7;
}  // namespace tm1

std::string sub_nbr(Value s) {
  std::string d = std::to_string(s);
  return std::string(15 - std::min<std::size_t>(15, d.size()), '0') + d;
}

std::size_t tm1_subscribers(const WorkloadSpec& spec) { return std::max<std::size_t>(1, spec.f) * spec.tuple_count; }

void tm1_schema(ColumnStore& store, const WorkloadSpec& spec) {
  const TableId sub = store.create_table(
      table("subscriber", {fixed("s_id"), fixed("bit_1"), fixed("msc_location"), fixed("vlr_location"), var("sub_nbr")}));
  const TableId idx = store.create_table(table("sub_nbr_index", {fixed("nbr"), fixed("s_id")}, "s_id"));
  const TableId ai = store.create_table(table("access_info", {fixed("ai_key"), fixed("s_id"), fixed("data1")}, "s_id"));
  const TableId sf = store.create_table(
      table("special_facility", {fixed("sf_key"), fixed("s_id"), fixed("is_active"), fixed("data_a")}, "s_id"));
  const TableId cf = store.create_table(
      table("call_forwarding", {fixed("cf_key"), fixed("s_id"), fixed("end_time"), var("numberx")}, "s_id"));
  Rng rng(spec.seed ^ 0x5eed);
  const Value n = static_cast<Value>(tm1_subscribers(spec));
  for (Value s = 0; s < n; ++s) {
    store.append_row(sub, std::vector<Cell>{s, rng.range(0, 1), rng.range(0, 1 << 20), rng.range(0, 1 << 20), sub_nbr(s)});
    store.append_row(idx, std::vector<Cell>{kNbrBase + s, s});
    for (Value k = 0; k < 4; ++k) {
      if (k == 0 || rng.chance(0.5)) store.append_row(ai, std::vector<Cell>{s * 4 + k, s, rng.range(0, 255)});
    }
    for (Value k = 0; k < 4; ++k) {
      if (k != 0 && !rng.chance(0.5)) continue;
      store.append_row(sf, std::vector<Cell>{s * 4 + k, s, Value{rng.chance(0.85) ? 1 : 0}, rng.range(0, 255)});
      for (Value slot = 0; slot < 3; ++slot) {
        if (rng.chance(0.4)) {
          store.append_row(cf, std::vector<Cell>{(s * 4 + k) * 3 + slot, s, slot * 8 + rng.range(1, 8),
                                                 sub_nbr(rng.range(0, n - 1))});
        }
      }
    }
  }
}

void tm1_types(TypeRegistry& reg, const ColumnStore& store) {
  const TableId sub = store.require_table("subscriber"), idx = store.require_table("sub_nbr_index"),
                ai = store.require_table("access_info"), sf = store.require_table("special_facility"),
                cf = store.require_table("call_forwarding");
  const ColumnId s_key = col(store, sub, "s_id"), s_bit = col(store, sub, "bit_1"),
                 s_msc = col(store, sub, "msc_location"), s_vlr = col(store, sub, "vlr_location"),
                 s_nbr = col(store, sub, "sub_nbr");
  const ColumnId i_key = col(store, idx, "nbr"), i_sid = col(store, idx, "s_id");
  const ColumnId a_key = col(store, ai, "ai_key"), a_data = col(store, ai, "data1");
  const ColumnId f_key = col(store, sf, "sf_key"), f_active = col(store, sf, "is_active"),
                 f_data = col(store, sf, "data_a");
  const ColumnId c_key = col(store, cf, "cf_key"), c_end = col(store, cf, "end_time"), c_num = col(store, cf, "numberx");
  const std::size_t cf_cols = store.def(cf).columns.size();

  auto add = [&](TypeId id, std::string name, std::vector<TableId> tables, Procedure proc,
                 std::function<Footprint(std::span<const Value>)> fp,
                 std::function<Value(std::span<const Value>)> subscriber) {
    TxnType t;
    t.type_id = id;
    t.name = std::move(name);
    t.procedure = std::move(proc);
    t.declared_ops = std::move(fp);
    t.lock_roots = [=](std::span<const Value> p) { return key_locks(sub, {subscriber(p)}); };
    t.partition_keys = [=](std::span<const Value> p) { return std::vector<Value>{subscriber(p)}; };
    t.tables = std::move(tables);
    reg.register_type(std::move(t));
  };
  auto first = [](std::span<const Value> p) { return p[0]; };

  // [s, fail]
  add(tm1::get_subscriber_data, "get_subscriber_data", {sub},
      [=](TxnContext& ctx, std::span<const Value> p) {
        const auto r = ctx.lookup(sub, p[0]);
        if (!r) ctx.abort("no subscriber");
        ctx.read(sub, *r, s_bit);
        ctx.read(sub, *r, s_msc);
        ctx.read(sub, *r, s_vlr);
        ctx.read_bytes(sub, *r, s_nbr);
        check_fail(ctx, p[1]);
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        fp.read(logical_item(sub, s_key, p[0]));
        for (ColumnId c : {s_bit, s_msc, s_vlr, s_nbr}) fp.read(logical_item(sub, c, p[0]));
        return fp;
      },
      first);

  // [s, sf_type, slot, fail]
  add(tm1::get_new_destination, "get_new_destination", {sf, cf},
      [=](TxnContext& ctx, std::span<const Value> p) {
        const auto rf = ctx.lookup(sf, p[0] * 4 + p[1]);
        if (!rf) ctx.abort("no special facility");
        if (ctx.read(sf, *rf, f_active) == 0) ctx.abort("facility inactive");
        const auto rc = ctx.lookup(cf, (p[0] * 4 + p[1]) * 3 + p[2]);
        if (!rc) ctx.abort("no call forwarding");
        ctx.read(cf, *rc, c_end);
        ctx.read_bytes(cf, *rc, c_num);
        check_fail(ctx, p[3]);
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        const Value fk = p[0] * 4 + p[1], ck = fk * 3 + p[2];
        fp.read(logical_item(sf, f_key, fk));
        fp.read(logical_item(sf, f_active, fk));
        fp.read(logical_item(cf, c_key, ck));
        fp.read(logical_item(cf, c_end, ck));
        fp.read(logical_item(cf, c_num, ck));
        return fp;
      },
      first);

  // [s, ai_type, fail]
  add(tm1::get_access_data, "get_access_data", {ai},
      [=](TxnContext& ctx, std::span<const Value> p) {
        const auto r = ctx.lookup(ai, p[0] * 4 + p[1]);
        if (!r) ctx.abort("no access info");
        ctx.read(ai, *r, a_data);
        check_fail(ctx, p[2]);
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        fp.read(logical_item(ai, a_key, p[0] * 4 + p[1]));
        fp.read(logical_item(ai, a_data, p[0] * 4 + p[1]));
        return fp;
      },
      first);

  // [s, sf_type, bit, data_a, fail]
  add(tm1::update_subscriber_data, "update_subscriber_data", {sub, sf},
      [=](TxnContext& ctx, std::span<const Value> p) {
        const auto rs = ctx.lookup(sub, p[0]);
        if (!rs) ctx.abort("no subscriber");
        const auto rf = ctx.lookup(sf, p[0] * 4 + p[1]);
        if (!rf) ctx.abort("no special facility");
        check_fail(ctx, p[4]);
        ctx.write(sub, *rs, s_bit, p[2]);
        ctx.write(sf, *rf, f_data, p[3]);
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        const Value fk = p[0] * 4 + p[1];
        fp.read(logical_item(sub, s_key, p[0]));
        fp.read(logical_item(sf, f_key, fk));
        fp.write(logical_item(sub, s_bit, p[0]));
        fp.write(logical_item(sf, f_data, fk));
        return fp;
      },
      first);

  // [nbr, fail]
  add(tm1::lookup_subscriber, "lookup_subscriber", {idx},
      [=](TxnContext& ctx, std::span<const Value> p) {
        const auto r = ctx.lookup(idx, p[0]);
        if (!r) ctx.abort("unknown number");
        ctx.read(idx, *r, i_sid);
        check_fail(ctx, p[1]);
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        fp.read(logical_item(idx, i_key, p[0]));
        fp.read(logical_item(idx, i_sid, p[0]));
        return fp;
      },
      [](std::span<const Value> p) { return p[0] - kNbrBase; });

  // [s, location, fail]
  add(tm1::update_location, "update_location", {sub},
      [=](TxnContext& ctx, std::span<const Value> p) {
        const auto r = ctx.lookup(sub, p[0]);
        if (!r) ctx.abort("no subscriber");
        check_fail(ctx, p[2]);
        ctx.write(sub, *r, s_vlr, p[1]);
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        fp.read(logical_item(sub, s_key, p[0]));
        fp.write(logical_item(sub, s_vlr, p[0]));
        return fp;
      },
      first);

  // [s, sf_type, slot, end_time, fail]
  add(tm1::insert_call_forwarding, "insert_call_forwarding", {sub, sf, cf},
      [=](TxnContext& ctx, std::span<const Value> p) {
        const auto rs = ctx.lookup(sub, p[0]);
        if (!rs) ctx.abort("no subscriber");
        const auto rf = ctx.lookup(sf, p[0] * 4 + p[1]);
        if (!rf) ctx.abort("no special facility");
        check_fail(ctx, p[4]);
        // Fresh key: rows inserted during a run are never looked up.
        ctx.insert(cf, {kCfInsertBase + static_cast<Value>(ctx.sig().id), p[0], p[3], sub_nbr(p[2])});
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        fp.read(logical_item(sub, s_key, p[0]));
        fp.read(logical_item(sf, f_key, p[0] * 4 + p[1]));
        return fp;
      },
      first);

  // [s, sf_type, slot, fail]
  add(tm1::delete_call_forwarding, "delete_call_forwarding", {sub, cf},
      [=](TxnContext& ctx, std::span<const Value> p) {
        const auto rs = ctx.lookup(sub, p[0]);
        if (!rs) ctx.abort("no subscriber");
        const auto rc = ctx.lookup(cf, (p[0] * 4 + p[1]) * 3 + p[2]);
        if (!rc) ctx.abort("no call forwarding");
        check_fail(ctx, p[3]);
        ctx.erase(cf, *rc);
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        const Value ck = (p[0] * 4 + p[1]) * 3 + p[2];
        fp.read(logical_item(sub, s_key, p[0]));
        fp.read(logical_item(cf, c_key, ck));
        for (ColumnId c = 0; c < cf_cols; ++c) fp.write(logical_item(cf, c, ck));
        return fp;
      },
      first);
}

void tm1_txns(Workload& w, const WorkloadSpec& spec) {
  Rng rng(spec.seed);
  const Value n = static_cast<Value>(tm1_subscribers(spec));
  TxnId id = 0;
  auto push = [&](TypeId ty, std::vector<Value> params) {
    params.push_back(rng.chance(spec.abort_rate) ? 1 : 0);
    w.txns.push_back({id++, ty, std::move(params)});
  };
  while (w.txns.size() < spec.txn_count) {
    const Value s = static_cast<Value>(rng.below(static_cast<std::uint64_t>(n)));
    const std::uint64_t pick = rng.below(100);
    const Value sft = static_cast<Value>(rng.below(4));
    const Value slot = static_cast<Value>(rng.below(3));
    if (pick < 35) {
      push(tm1::get_subscriber_data, {s});
    } else if (pick < 45) {
      push(tm1::get_new_destination, {s, sft, slot});
    } else if (pick < 80) {
      push(tm1::get_access_data, {s, static_cast<Value>(rng.below(4))});
    } else if (pick < 82) {
      push(tm1::update_subscriber_data, {s, sft, static_cast<Value>(rng.below(2)), static_cast<Value>(rng.below(256))});
    } else {
      // Transactions addressed by number run as a lookup plus the rest.
      push(tm1::lookup_subscriber, {kNbrBase + s});
      if (w.txns.size() >= spec.txn_count) break;
      if (pick < 96) {
        push(tm1::update_location, {s, static_cast<Value>(rng.below(1 << 20))});
      } else if (pick < 98) {
        push(tm1::insert_call_forwarding, {s, sft, slot, slot * 8 + rng.range(1, 8)});
      } else {
        push(tm1::delete_call_forwarding, {s, sft, slot});
      }
    }
  }
}

// -------------------------------------------------------------------- mixed

constexpr std::size_t kNoteMax = 48;

void mixed_schema(ColumnStore& store, const WorkloadSpec& spec) {
  const TableId a = store.create_table(table("acct", {fixed("id"), fixed("balance"), fixed("grp"), var("note")}, "id"));
  store.create_table(table("audit", {fixed("id"), fixed("acct"), fixed("amount")}, "acct"));
  for (std::size_t i = 0; i < spec.tuple_count; ++i) {
    const Value k = static_cast<Value>(i);
    store.append_row(a, std::vector<Cell>{k, 500 + (k * 7919) % 1000, k / kMixedGroup, "n" + std::to_string(k)});
  }
}

void mixed_register(TypeRegistry& reg, const ColumnStore& store) {
  using namespace mixed_types;
  const TableId a = store.require_table("acct"), au = store.require_table("audit");
  const ColumnId kid = col(store, a, "id"), kbal = col(store, a, "balance"), knote = col(store, a, "note");
  const std::size_t ncols = store.def(a).columns.size();

  auto add = [&](TypeId id, std::string name, bool two_phase, std::vector<TableId> tables, Procedure proc,
                 std::function<Footprint(std::span<const Value>)> fp, std::size_t nkeys) {
    TxnType t;
    t.type_id = id;
    t.name = std::move(name);
    t.procedure = std::move(proc);
    t.declared_ops = std::move(fp);
    t.is_two_phase = two_phase;
    t.lock_roots = [=](std::span<const Value> p) {
      std::vector<DataItemId> out;
      for (std::size_t i = 0; i < nkeys; ++i) out.push_back(DataItemId::key_lock(a, p[i]));
      std::sort(out.begin(), out.end());
      out.erase(std::unique(out.begin(), out.end()), out.end());
      return out;
    };
    t.partition_keys = [=](std::span<const Value> p) { return std::vector<Value>(p.begin(), p.begin() + nkeys); };
    t.tables = std::move(tables);
    reg.register_type(std::move(t));
  };
  auto lookup_read = [=](Footprint& fp, Value k) {
    fp.read(logical_item(a, kid, k));
    fp.read(logical_item(a, kbal, k));
  };

  // [from, to, amount, fail]
  add(transfer, "transfer", true, {a},
      [=](TxnContext& ctx, std::span<const Value> p) {
        const auto r1 = ctx.lookup(a, p[0]);
        const auto r2 = ctx.lookup(a, p[1]);
        if (!r1 || !r2) ctx.abort("closed account");
        const Value b1 = ctx.read(a, *r1, kbal);
        const Value b2 = ctx.read(a, *r2, kbal);
        if (b1 < p[2]) ctx.abort("insufficient funds");
        check_fail(ctx, p[3]);
        ctx.write(a, *r1, kbal, b1 - p[2]);
        ctx.write(a, *r2, kbal, b2 + p[2]);
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        fp.read(logical_item(a, kid, p[0]));
        fp.read(logical_item(a, kid, p[1]));
        fp.read(logical_item(a, kbal, p[0]));
        fp.read(logical_item(a, kbal, p[1]));
        fp.write(logical_item(a, kbal, p[0]));
        fp.write(logical_item(a, kbal, p[1]));
        return fp;
      },
      2);

  // [acct, amount, fail]
  add(deposit, "deposit", true, {a},
      [=](TxnContext& ctx, std::span<const Value> p) {
        const auto r = ctx.lookup(a, p[0]);
        if (!r) ctx.abort("closed account");
        const Value b = ctx.read(a, *r, kbal);
        check_fail(ctx, p[2]);
        ctx.write(a, *r, kbal, b + p[1]);
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        lookup_read(fp, p[0]);
        fp.write(logical_item(a, kbal, p[0]));
        return fp;
      },
      1);

  // [a, b, c, fail]
  add(multi_read, "multi_read", true, {a},
      [=](TxnContext& ctx, std::span<const Value> p) {
        for (int i = 0; i < 3; ++i) {
          if (auto r = ctx.lookup(a, p[i])) ctx.read(a, *r, kbal);
        }
        check_fail(ctx, p[3]);
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        for (int i = 0; i < 3; ++i) lookup_read(fp, p[i]);
        return fp;
      },
      3);

  // [acct, amount, fail]; decides only after writing.
  add(risky_update, "risky_update", false, {a},
      [=](TxnContext& ctx, std::span<const Value> p) {
        const auto r = ctx.lookup(a, p[0]);
        if (!r) ctx.abort("closed account");
        ctx.write(a, *r, kbal, ctx.read(a, *r, kbal) + p[1]);
        check_fail(ctx, p[2]);
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        lookup_read(fp, p[0]);
        fp.write(logical_item(a, kbal, p[0]));
        return fp;
      },
      1);

  // [acct, amount, fail]
  add(log_insert, "log_insert", true, {a, au},
      [=](TxnContext& ctx, std::span<const Value> p) {
        const auto r = ctx.lookup(a, p[0]);
        if (!r) ctx.abort("closed account");
        const Value b = ctx.read(a, *r, kbal);
        check_fail(ctx, p[2]);
        ctx.insert(au, {static_cast<Value>(ctx.sig().id), p[0], b + p[1]});
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        lookup_read(fp, p[0]);
        return fp;
      },
      1);

  // [acct, letter, fail]
  add(rename, "rename", true, {a},
      [=](TxnContext& ctx, std::span<const Value> p) {
        const auto r = ctx.lookup(a, p[0]);
        if (!r) ctx.abort("closed account");
        std::string note = ctx.read_bytes(a, *r, knote);
        check_fail(ctx, p[2]);
        note.push_back(static_cast<char>('a' + ((p[1] % 26) + 26) % 26));
        if (note.size() > kNoteMax) note.erase(0, note.size() - kNoteMax);
        ctx.write_bytes(a, *r, knote, note);
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        fp.read(logical_item(a, kid, p[0]));
        fp.rmw(logical_item(a, knote, p[0]));
        return fp;
      },
      1);

  // [acct, fail]
  add(close, "close", true, {a},
      [=](TxnContext& ctx, std::span<const Value> p) {
        const auto r = ctx.lookup(a, p[0]);
        if (!r) ctx.abort("closed account");
        check_fail(ctx, p[1]);
        ctx.erase(a, *r);
      },
      [=](std::span<const Value> p) {
        Footprint fp;
        fp.read(logical_item(a, kid, p[0]));
        for (ColumnId c = 0; c < ncols; ++c) fp.write(logical_item(a, c, p[0]));
        return fp;
      },
      1);

  // [lo, hi, fail]; the accounts read depend on which are still open.
  TxnType s;
  s.type_id = scan;
  s.name = "scan";
  s.procedure = [=](TxnContext& ctx, std::span<const Value> p) {
    Value sum = 0;
    for (Value k = p[0]; k <= p[1]; ++k) {
      if (auto r = ctx.lookup(a, k)) sum += ctx.read(a, *r, kbal);
    }
    check_fail(ctx, p[2]);
    ctx.insert(au, {static_cast<Value>(ctx.sig().id), Value{-1}, sum});
  };
  s.declared_ops = [=](std::span<const Value>) {
    Footprint fp;
    fp.unknown.emplace_back(a, AccessMode::read);
    return fp;
  };
  s.is_single_partition = false;
  s.tables = {a, au};
  reg.register_type(std::move(s));
}

void mixed_txns(Workload& w, const WorkloadSpec& spec) {
  using namespace mixed_types;
  if (spec.tuple_count < 2) throw Error("mixed workload needs at least two accounts");
  Rng rng(spec.seed);
  const Value n = static_cast<Value>(spec.tuple_count);
  auto other = [&](Value a) {
    Value b = a;
    const Value lo = a / kMixedGroup * kMixedGroup;
    const bool alone = lo == n - 1;  // last group holds a single account
    while (b == a) {
      if (alone || rng.chance(spec.cross_rate)) {
        b = static_cast<Value>(rng.below(static_cast<std::uint64_t>(n)));
      } else {
        b = std::min(n - 1, lo + static_cast<Value>(rng.below(kMixedGroup)));
      }
    }
    return b;
  };
  const std::uint64_t total = spec.with_scan ? 100 : 97;
  for (std::size_t i = 0; i < spec.txn_count; ++i) {
    const Value acc = static_cast<Value>(rng.below(static_cast<std::uint64_t>(n)));
    const std::uint64_t pick = rng.below(total);
    TypeId ty;
    std::vector<Value> params;
    if (pick < 25) {
      ty = transfer;
      params = {acc, other(acc), rng.range(1, 400)};
    } else if (pick < 45) {
      ty = deposit;
      params = {acc, rng.range(1, 300)};
    } else if (pick < 60) {
      ty = multi_read;
      params = {acc, other(acc), other(acc)};
    } else if (pick < 70) {
      ty = risky_update;
      params = {acc, rng.range(-200, 200)};
    } else if (pick < 80) {
      ty = log_insert;
      params = {acc, rng.range(0, 99)};
    } else if (pick < 95) {
      ty = rename;
      params = {acc, rng.range(0, 25)};
    } else if (pick < 97) {
      ty = close;
      params = {acc};
    } else {
      ty = scan;
      const Value lo = acc;
      params = {lo, std::min(n - 1, lo + rng.range(0, 7))};
    }
    params.push_back(rng.chance(spec.abort_rate) ? 1 : 0);
    w.txns.push_back({i, ty, std::move(params)});
  }
}

}  // namespace

const char* to_string(WorkloadKind k) {
  switch (k) {
    case WorkloadKind::micro:
      return "micro";
    case WorkloadKind::tpcb_like:
      return "tpcb_like";
    case WorkloadKind::tm1_like:
      return "tm1_like";
    case WorkloadKind::mixed:
      return "mixed";
  }
  return "?";
}

std::optional<WorkloadKind> parse_workload_kind(std::string_view name) {
  for (WorkloadKind k : {WorkloadKind::micro, WorkloadKind::tpcb_like, WorkloadKind::tm1_like, WorkloadKind::mixed}) {
    if (name == to_string(k)) return k;
  }
  return std::nullopt;
}

std::map<std::string, std::string> WorkloadSpec::to_meta() const {
  return {{"kind", to_string(kind)},
          {"T", std::to_string(T)},
          {"x", std::to_string(x)},
          {"alpha", format_double(alpha)},
          {"tuples", std::to_string(tuple_count)},
          {"txns", std::to_string(txn_count)},
          {"f", std::to_string(f)},
          {"abort_rate", format_double(abort_rate)},
          {"cross_rate", format_double(cross_rate)},
          {"scan", with_scan ? "1" : "0"},
          {"seed", std::to_string(seed)}};
}

WorkloadSpec WorkloadSpec::from_meta(const std::map<std::string, std::string>& meta) {
  WorkloadSpec s;
  if (auto it = meta.find("kind"); it != meta.end()) {
    auto k = parse_workload_kind(it->second);
    if (!k) throw ParseError("workload meta: unknown kind '" + it->second + "'");
    s.kind = *k;
  }
  s.T = meta_number(meta, "T", s.T);
  s.x = meta_number(meta, "x", s.x);
  s.alpha = meta_number(meta, "alpha", s.alpha);
  s.tuple_count = meta_number(meta, "tuples", s.tuple_count);
  s.txn_count = meta_number(meta, "txns", s.txn_count);
  s.f = meta_number(meta, "f", s.f);
  s.abort_rate = meta_number(meta, "abort_rate", s.abort_rate);
  s.cross_rate = meta_number(meta, "cross_rate", s.cross_rate);
  s.with_scan = meta_number<int>(meta, "scan", s.with_scan ? 1 : 0) != 0;
  s.seed = meta_number(meta, "seed", s.seed);
  if (s.alpha < 0 || s.alpha > 1) throw ParseError("workload meta: alpha must be in [0, 1]");
  if (s.abort_rate < 0 || s.abort_rate > 1) throw ParseError("workload meta: abort_rate must be in [0, 1]");
  return s;
}

std::uint64_t compute_kernel(std::uint64_t v, std::size_t iterations) {
  for (std::size_t i = 0; i < iterations; ++i) {
    v ^= v >> 31;
    v *= 0xBF58476D1CE4E5B9ull;
    v += i;
  }
  return v;
}

TypeRegistry make_registry(const WorkloadSpec& spec, const ColumnStore& store) {
  TypeRegistry reg;
  switch (spec.kind) {
    case WorkloadKind::micro:
      micro_types(reg, store, spec);
      break;
    case WorkloadKind::tpcb_like:
      tpcb_types(reg, store);
      break;
    case WorkloadKind::tm1_like:
      tm1_types(reg, store);
      break;
    case WorkloadKind::mixed:
      mixed_register(reg, store);
      break;
  }
  return reg;
}

Benchmark make_benchmark(const WorkloadSpec& spec) {
  Benchmark b;
  switch (spec.kind) {
    case WorkloadKind::micro:
      micro_schema(b.store, spec);
      b.type_count = std::max<std::size_t>(1, spec.T);
      break;
    case WorkloadKind::tpcb_like:
      tpcb_schema(b.store, spec);
      b.type_count = 1;
      b.partition_size = 1;
      break;
    case WorkloadKind::tm1_like:
      tm1_schema(b.store, spec);
      b.type_count = 8;
      b.partition_size = 128;
      break;
    case WorkloadKind::mixed:
      mixed_schema(b.store, spec);
      b.type_count = 8;
      b.partition_size = kMixedGroup;
      break;
  }
  b.registry = make_registry(spec, b.store);
  return b;
}

Workload generate_workload(const WorkloadSpec& spec) {
  Workload w;
  w.meta = spec.to_meta();
  w.txns.reserve(spec.txn_count);
  switch (spec.kind) {
    case WorkloadKind::micro:
      micro_txns(w, spec);
      break;
    case WorkloadKind::tpcb_like:
      tpcb_txns(w, spec);
      break;
    case WorkloadKind::tm1_like:
      tm1_txns(w, spec);
      break;
    case WorkloadKind::mixed:
      mixed_txns(w, spec);
      break;
  }
  return w;
}

}  // namespace bulktx
