#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>

#include "bulktx/bench.h"
#include "bulktx/planner.h"
#include "bulktx/workloads.h"

using namespace bulktx;

namespace {

const char* const kConfigKeys[] = {"lane_count", "warp_size", "partition_size", "lock_slots", "root_locks",
                                   "watchdog_ms", "bits_per_pass", "passes",      "type_count", "w0_bar",
                                   "c_bar",      "d_bar",       "strategy",       "max_size",   "interval"};

struct ConfigFlags {
  std::string file;
  std::map<std::string, std::string> values;

  void add(CLI::App* app) {
    app->add_option("--config", file, "Config file (key = value lines)");
    for (const char* k : kConfigKeys) {
      std::string flag = std::string("--") + k;
      std::replace(flag.begin() + 2, flag.end(), '_', '-');
      app->add_option(flag, values[k], std::string("Overrides config key ") + k);
    }
  }

  // Workload defaults, then the file, then flags.
  PlannerConfig resolve(const Benchmark* bench) const {
    PlannerConfig c;
    if (bench) {
      c.exec.partition_size = bench->partition_size;
      c.grouping.type_count = bench->type_count;
    }
    if (!file.empty()) {
      std::ifstream in(file);
      if (!in) throw Error("cannot open config " + file);
      c = read_config(in, c);
    }
    for (const auto& [k, v] : values) {
      if (!v.empty()) apply_setting(c, k, v);
    }
    return c;
  }
};

Workload load_workload(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open workload " + path);
  return read_workload(in);
}

// Store from a schema file when given, otherwise rebuilt from the workload
// header.
Benchmark load_benchmark(const WorkloadSpec& spec, const std::string& schema) {
  Benchmark b = make_benchmark(spec);
  if (!schema.empty()) {
    std::ifstream in(schema);
    if (!in) throw Error("cannot open schema " + schema);
    b.store = load_store(in);
    b.registry = make_registry(spec, b.store);
  }
  return b;
}

template <typename F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    std::cerr << "bulktx: " << e.what() << '\n';
    return 2;
  }
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bulk transaction execution engine"};
  app.require_subcommand(1);

  // gen
  WorkloadSpec gspec;
  std::string gen_kind = "micro", gen_out, gen_schema;
  auto* gen = app.add_subcommand("gen", "Generate a workload file");
  gen->add_option("--kind", gen_kind, "micro | tpcb_like | tm1_like | mixed")->capture_default_str();
  gen->add_option("-T,--types", gspec.T, "Type count (micro)")->capture_default_str();
  gen->add_option("-x,--weight", gspec.x, "Kernel weight, 100*x iterations (micro)")->capture_default_str();
  gen->add_option("--alpha", gspec.alpha, "Probability of the first tuple (micro)")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gen->add_option("--tuples", gspec.tuple_count, "Tuples, accounts, or subscribers per f")->capture_default_str();
  gen->add_option("--txns", gspec.txn_count, "Transaction count")->capture_default_str();
  gen->add_option("-f,--scale", gspec.f, "Branches (tpcb_like) or scale (tm1_like)")->capture_default_str();
  gen->add_option("--abort-rate", gspec.abort_rate, "Injected failure rate (tm1_like, mixed)")
      ->check(CLI::Range(0.0, 1.0));
  gen->add_option("--cross-rate", gspec.cross_rate, "Cross-group transfer rate (mixed)")->check(CLI::Range(0.0, 1.0));
  gen->add_flag("--scan", gspec.with_scan, "Include scans with unknown footprints (mixed)");
  gen->add_option("--seed", gspec.seed)->capture_default_str();
  gen->add_option("-o,--out", gen_out, "Workload file (default stdout)");
  gen->add_option("--schema-out", gen_schema, "Also write the initial store");
  gen->callback([&] {
    std::exit(guarded([&] {
      auto k = parse_workload_kind(gen_kind);
      if (!k) throw Error("unknown workload kind " + gen_kind);
      gspec.kind = *k;
      const Workload w = generate_workload(gspec);
      if (gen_out.empty()) {
        write_workload(w, std::cout);
      } else {
        std::ofstream out(gen_out);
        write_workload(w, out);
      }
      if (!gen_schema.empty()) {
        std::ofstream out(gen_schema);
        dump_store(make_benchmark(gspec).store, out);
      }
      return 0;
    }));
  });

  // run
  std::string run_workload, run_schema, run_format = "text", run_out;
  double arrival_rate = 0;
  bool no_oracle = false;
  ConfigFlags run_cfg;
  auto* run = app.add_subcommand("run", "Execute a workload and report");
  run->add_option("-w,--workload", run_workload)->required();
  run->add_option("--schema", run_schema, "Initial store (default: rebuilt from the workload header)");
  run->add_option("--arrival-rate", arrival_rate, "Logical arrivals per second (0 = all at once)");
  run->add_option("--format", run_format, "csv | text")->check(CLI::IsMember({"csv", "text"}));
  run->add_option("-o,--out", run_out, "Report file (default stdout)");
  run->add_flag("--no-oracle", no_oracle, "Skip the sequential oracle check");
  run_cfg.add(run);
  run->callback([&] {
    std::exit(guarded([&] {
      const Workload w = load_workload(run_workload);
      const WorkloadSpec spec = WorkloadSpec::from_meta(w.meta);
      const Benchmark b = load_benchmark(spec, run_schema);
      BenchOptions opt;
      opt.planner = run_cfg.resolve(&b);
      opt.arrival_rate = arrival_rate;
      opt.check_oracle = !no_oracle;
      const ExecReport rep = run_bench(b.store, b.registry, w, opt);
      const ReportFormat fmt = run_format == "csv" ? ReportFormat::csv : ReportFormat::text;
      if (run_out.empty()) {
        emit_report(rep, fmt, std::cout);
      } else {
        std::ofstream out(run_out);
        emit_report(rep, fmt, out);
      }
      if (!rep.ok()) {
        std::cerr << "bulktx: run failed: " << (rep.failure.empty() ? rep.oracle_detail : rep.failure) << '\n';
        return 1;
      }
      return 0;
    }));
  });

  // calibrate
  std::vector<std::string> cal_samples;
  std::string passes_grid = "0,1,2,3,4", psize_grid = "16,32,64,128,256,512", cal_out;
  ConfigFlags cal_cfg;
  auto* cal = app.add_subcommand("calibrate", "Grid-search passes, partition size and thresholds");
  cal->add_option("-w,--workload", cal_samples, "Sample workload files");
  cal->add_option("--passes-grid", passes_grid)->capture_default_str();
  cal->add_option("--psize-grid", psize_grid)->capture_default_str();
  cal->add_option("-o,--out", cal_out, "Config file to write (default stdout)");
  cal_cfg.add(cal);
  cal->callback([&] {
    std::exit(guarded([&] {
      std::vector<Workload> samples;
      std::vector<Benchmark> benches;
      for (const auto& s : cal_samples) {
        samples.push_back(load_workload(s));
        benches.push_back(make_benchmark(WorkloadSpec::from_meta(samples.back().meta)));
      }
      const PlannerConfig base = cal_cfg.resolve(benches.empty() ? nullptr : &benches.front());
      CalibrationSpace space;
      for (const auto& v : split_list(passes_grid)) space.passes.push_back(static_cast<unsigned>(std::stoul(v)));
      for (const auto& v : split_list(psize_grid)) space.partition_sizes.push_back(std::stoll(v));
      const std::size_t m = base.exec.lane_count;
      for (std::size_t w0 : {m, 4 * m}) {
        for (std::size_t c : {std::size_t{0}, std::size_t{16}}) space.thresholds.push_back({w0, c, 8});
      }
      std::function<double(const PlannerConfig&)> measure;
      if (!samples.empty()) {
        measure = [&](const PlannerConfig& c) {
          double total = 0;
          for (std::size_t i = 0; i < samples.size(); ++i) {
            BenchOptions opt;
            opt.planner = c;
            opt.check_oracle = false;
            const ExecReport r = run_bench(benches[i].store, benches[i].registry, samples[i], opt);
            if (!r.failure.empty()) return 0.0;
            total += r.throughput_ktps;
          }
          return total;
        };
      }
      const CalibrationResult res = calibrate(base, space, measure);
      for (const CalibrationPoint& p : res.curve) {
        std::cerr << p.knob << '[' << p.index << "] " << p.throughput << " ktps\n";
      }
      if (cal_out.empty()) {
        write_config(res.config, std::cout);
      } else {
        std::ofstream out(cal_out);
        write_config(res.config, out);
      }
      return 0;
    }));
  });

  // oracle
  std::string or_workload, or_schema, or_out;
  auto* orc = app.add_subcommand("oracle", "Run a workload sequentially and dump the final store");
  orc->add_option("-w,--workload", or_workload)->required();
  orc->add_option("--schema", or_schema);
  orc->add_option("-o,--out", or_out, "Store dump (default stdout)");
  orc->callback([&] {
    std::exit(guarded([&] {
      const Workload w = load_workload(or_workload);
      Benchmark b = load_benchmark(WorkloadSpec::from_meta(w.meta), or_schema);
      const auto status = execute_sequential(b.store, b.registry, w.txns);
      std::size_t committed = 0;
      for (TxnStatus s : status) committed += s == TxnStatus::committed;
      std::cerr << committed << " of " << status.size() << " committed\n";
      if (or_out.empty()) {
        dump_store(b.store, std::cout);
      } else {
        std::ofstream out(or_out);
        dump_store(b.store, out);
      }
      return 0;
    }));
  });

  CLI11_PARSE(app, argc, argv);
  return 0;
}
