#pragma once

// Small key-value schema with scripted transaction types for executor tests.

#include <algorithm>
#include <random>
#include <set>
#include <vector>

#include "bulktx/txmodel.h"

namespace fixture {

using namespace bulktx;

inline constexpr TypeId kScript = 0;  // reads, decides, then writes
inline constexpr TypeId kRisky = 1;   // writes, then decides

struct Kv {
  ColumnStore store;
  TypeRegistry registry;
  TableId table = 0;
};

// Params: [fail, key, mode, key, mode, ...]; mode 1 writes the key.
inline Kv make_kv(Value rows) {
  Kv kv;
  TableDef d;
  d.name = "kv";
  d.columns = {{"k", ColumnKind::fixed}, {"v", ColumnKind::fixed}};
  const TableId t = kv.store.create_table(d);
  kv.table = t;
  for (Value k = 0; k < rows; ++k) kv.store.append_row(t, std::vector<Cell>{k, k * 3 + 1});

  auto footprint = [t](std::span<const Value> p) {
    Footprint fp;
    for (std::size_t i = 1; i + 1 < p.size(); i += 2) {
      fp.read(logical_item(t, 0, p[i]));
      fp.read(logical_item(t, 1, p[i]));
    }
    for (std::size_t i = 1; i + 1 < p.size(); i += 2) {
      if (p[i + 1]) fp.write(logical_item(t, 1, p[i]));
    }
    return fp;
  };
  auto keys = [](std::span<const Value> p) {
    std::vector<Value> out;
    for (std::size_t i = 1; i + 1 < p.size(); i += 2) out.push_back(p[i]);
    return out;
  };
  auto roots = [t](std::span<const Value> p) {
    std::vector<DataItemId> out;
    for (std::size_t i = 1; i + 1 < p.size(); i += 2) out.push_back(DataItemId::key_lock(t, p[i]));
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  };

  TxnType script;
  script.type_id = kScript;
  script.name = "script";
  script.procedure = [t](TxnContext& ctx, std::span<const Value> p) {
    Value mix = static_cast<Value>(ctx.sig().id);
    std::vector<RowId> rows;
    for (std::size_t i = 1; i + 1 < p.size(); i += 2) {
      auto r = ctx.lookup(t, p[i]);
      if (!r) ctx.abort("missing");
      rows.push_back(*r);
      mix = mix * 31 + ctx.read(t, *r, 1);
    }
    ctx.decision_point();
    if (p[0]) ctx.abort("injected");
    for (std::size_t i = 1, j = 0; i + 1 < p.size(); i += 2, ++j) {
      if (p[i + 1]) ctx.write(t, rows[j], 1, mix % 1000003 + static_cast<Value>(j));
    }
  };
  script.declared_ops = footprint;
  script.lock_roots = roots;
  script.partition_keys = keys;
  script.tables = {t};
  kv.registry.register_type(script);

  TxnType risky = script;
  risky.type_id = kRisky;
  risky.name = "risky";
  risky.is_two_phase = false;
  risky.procedure = [t](TxnContext& ctx, std::span<const Value> p) {
    Value mix = static_cast<Value>(ctx.sig().id);
    std::vector<RowId> rows;
    for (std::size_t i = 1; i + 1 < p.size(); i += 2) {
      auto r = ctx.lookup(t, p[i]);
      if (!r) ctx.abort("missing");
      rows.push_back(*r);
      mix = mix * 31 + ctx.read(t, *r, 1);
    }
    for (std::size_t i = 1, j = 0; i + 1 < p.size(); i += 2, ++j) {
      if (p[i + 1]) ctx.write(t, rows[j], 1, mix % 1000003 + static_cast<Value>(j));
    }
    ctx.decision_point();
    if (p[0]) ctx.abort("injected");
  };
  kv.registry.register_type(risky);
  return kv;
}

struct GenOptions {
  std::size_t txns = 100;
  Value rows = 64;
  std::size_t max_keys = 3;
  double write_rate = 0.5;
  double fail_rate = 0.0;
  double risky_rate = 0.0;
  // Keys of one txn drawn from one block of this many rows; 0 = anywhere.
  Value block = 0;
};

inline std::vector<TxnSignature> random_txns(std::mt19937_64& rng, const GenOptions& o) {
  std::vector<TxnSignature> out;
  std::uniform_real_distribution<double> u(0, 1);
  for (std::size_t i = 0; i < o.txns; ++i) {
    TxnSignature s;
    s.id = i;
    s.type = u(rng) < o.risky_rate ? kRisky : kScript;
    s.params.push_back(u(rng) < o.fail_rate ? 1 : 0);
    const std::size_t n = 1 + rng() % o.max_keys;
    const Value base = o.block > 0 ? static_cast<Value>(rng() % static_cast<std::uint64_t>(o.rows / o.block)) * o.block : 0;
    const Value span = o.block > 0 ? o.block : o.rows;
    std::set<Value> keys;
    while (keys.size() < std::min<std::size_t>(n, static_cast<std::size_t>(span))) {
      keys.insert(base + static_cast<Value>(rng() % static_cast<std::uint64_t>(span)));
    }
    for (Value k : keys) {
      s.params.push_back(k);
      s.params.push_back(u(rng) < o.write_rate ? 1 : 0);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fixture
