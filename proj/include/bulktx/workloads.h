#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "bulktx/storage.h"
#include "bulktx/txmodel.h"

namespace bulktx {

enum class WorkloadKind : std::uint8_t { micro, tpcb_like, tm1_like, mixed };

const char* to_string(WorkloadKind k);
std::optional<WorkloadKind> parse_workload_kind(std::string_view name);

struct WorkloadSpec {
  WorkloadKind kind = WorkloadKind::micro;
  std::size_t T = 8;               // micro: type count
  std::size_t x = 16;              // micro: kernel weight, 100*x iterations
  double alpha = 0;                // micro: probability of tuple 0
  std::size_t tuple_count = 4096;  // micro tuples, mixed accounts, tm1 subscribers per f
  std::size_t txn_count = 1000;
  std::size_t f = 4;               // tpcb branches, tm1 scale
  double abort_rate = 0;           // tm1 and mixed: injected failure flag rate
  double cross_rate = 0.1;         // mixed: transfers across account groups
  bool with_scan = false;          // mixed: scan type with an unknown footprint
  std::uint64_t seed = 1;

  std::map<std::string, std::string> to_meta() const;
  // Throws ParseError on bad values; missing keys keep defaults.
  static WorkloadSpec from_meta(const std::map<std::string, std::string>& meta);
};

/// Schema, initial rows and transaction types of one workload kind.
struct Benchmark {
  ColumnStore store;
  TypeRegistry registry;
  std::size_t type_count = 0;
  // Partition size matching the benchmark's natural partitioning.
  Value partition_size = 128;
};

Benchmark make_benchmark(const WorkloadSpec& spec);
// Registry only, for a store loaded from a schema file.
TypeRegistry make_registry(const WorkloadSpec& spec, const ColumnStore& store);

// Deterministic given the spec. Throws Error when the spec cannot produce
// a workload (e.g. zero tuples).
Workload generate_workload(const WorkloadSpec& spec);

// The synthetic per-transaction computation: `iterations` rounds of an
// integer mix seeded by v.
std::uint64_t compute_kernel(std::uint64_t v, std::size_t iterations);

// Mixed-workload type ids.
namespace mixed_types {
inline constexpr TypeId transfer = 0;
inline constexpr TypeId deposit = 1;
inline constexpr TypeId multi_read = 2;
inline constexpr TypeId risky_update = 3;  // writes before deciding
inline constexpr TypeId log_insert = 4;
inline constexpr TypeId rename = 5;
inline constexpr TypeId close = 6;
inline constexpr TypeId scan = 7;
}  // namespace mixed_types

inline constexpr Value kMixedGroup = 16;  // accounts per partition in mixed

}  // namespace bulktx
