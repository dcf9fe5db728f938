#pragma once

#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>

#include "dcp/baselines.hpp"
#include "dcp/simexec.hpp"

namespace dcp {

struct PlannerConfig {
  TokenIndex block_size = 512;
  int divisions = 4;
  PlacementConfig placement{};
  CompileOptions compile{};
};

// End-to-end planning artifacts for one batch.
struct PlannedBatch {
  BlockGraph graph;
  PlacementResult placement;
  DivisionSchedule schedule;
  std::vector<ExecutionPlan> plans;
  CommVolume volume;
};

inline PlannedBatch plan_batch(const Batch& batch, const DeviceTopology& topo,
                               const PlannerConfig& cfg) {
  PlannedBatch pb;
  pb.graph = generate_blocks(batch, cfg.block_size);
  pb.placement = place(pb.graph, topo, cfg.placement);
  pb.schedule = schedule(pb.graph, pb.placement, cfg.divisions);
  pb.plans = compile_plans(pb.schedule, pb.graph, pb.placement, cfg.compile);
  pb.volume = communication_volume(pb.graph, pb.placement);
  return pb;
}

// Greedy stream packing: sequences fill a batch in order until the next one
// would overflow the token budget, which starts the next batch.
inline std::vector<Batch> make_batches(const std::vector<SequenceSpec>& stream,
                                       const Batch& prototype) {
  const TokenIndex budget = prototype.token_budget;
  if (budget < 1) throw Error("make_batches: token budget must be >= 1");
  std::vector<Batch> batches;
  Batch current = prototype;
  current.sequences.clear();
  TokenIndex used = 0;
  for (const auto& s : stream) {
    if (s.length > budget)
      throw OversizedSequenceError("sequence " + s.seq_id +
                                   " exceeds the token budget");
    if (used + s.length > budget) {
      batches.push_back(std::move(current));
      current = prototype;
      current.sequences.clear();
      used = 0;
    }
    current.sequences.push_back(s);
    used += s.length;
  }
  if (!current.sequences.empty()) batches.push_back(std::move(current));
  return batches;
}

struct PipelineConfig {
  PlannerConfig planner{};
  DeviceTopology topology{};
  int lookahead = 2;  // kappa
  std::uint64_t seed = 0;
  bool numeric = false;  // numeric simulation (with payloads) vs cost-only
  CostParams cost{};
};

struct PipelineEvent {
  enum Kind { PlanStart, PlanDone, SimStart, SimDone };
  Kind kind;
  int iteration;
  int order;  // global happens-before order
};

struct IterationReport {
  int iteration = 0;
  bool failed = false;
  std::string error;
  TokenIndex tokens = 0;
  int sequences = 0;
  ByteCount comm_bytes = 0;
  ByteCount inter_machine_bytes = 0;
  FlopCount flops = 0;
  double makespan = 0;
};

struct PipelineResult {
  std::vector<IterationReport> reports;
  std::vector<PipelineEvent> events;
};

// Look-ahead planning pipeline. Planning tasks for distinct iterations run
// concurrently on a pool of lookahead+1 workers; iteration i may not start
// simulating before plans i..i+lookahead are complete, and planning of
// iteration j may not start before iteration j-lookahead-1 finished
// simulating. Per-iteration failures are isolated.
inline PipelineResult pipeline_run(const PipelineConfig& cfg,
                                   const std::vector<Batch>& batches) {
  const int n = static_cast<int>(batches.size());
  PipelineResult result;
  result.reports.resize(static_cast<size_t>(n));
  if (n == 0) return result;

  struct Store {
    std::mutex mu;
    std::condition_variable cv;
    std::vector<int> state;  // 0 = pending, 1 = planning, 2 = done (ok or failed)
    std::vector<PlannedBatch> plans;
    std::vector<std::string> errors;
    std::vector<PipelineEvent> events;
    int completed_sims = 0;
    int next_iteration = 0;
    int order = 0;
  } store;
  store.state.assign(static_cast<size_t>(n), 0);
  store.plans.resize(static_cast<size_t>(n));
  store.errors.resize(static_cast<size_t>(n));

  const int kappa = std::max(cfg.lookahead, 0);
  auto log_event = [&](PipelineEvent::Kind kind, int iter) {
    store.events.push_back({kind, iter, store.order++});
  };

  auto worker = [&]() {
    while (true) {
      int iter;
      {
        std::unique_lock<std::mutex> lock(store.mu);
        store.cv.wait(lock, [&] {
          return store.next_iteration >= n ||
                 store.next_iteration <= store.completed_sims + kappa;
        });
        if (store.next_iteration >= n) return;
        iter = store.next_iteration++;
        store.state[static_cast<size_t>(iter)] = 1;
        log_event(PipelineEvent::PlanStart, iter);
      }
      PlannedBatch pb;
      std::string error;
      try {
        PlannerConfig pc = cfg.planner;
        pc.placement.seed = cfg.seed + static_cast<std::uint64_t>(iter);
        pb = plan_batch(batches[static_cast<size_t>(iter)], cfg.topology, pc);
      } catch (const std::exception& e) {
        error = e.what();
      }
      {
        std::unique_lock<std::mutex> lock(store.mu);
        store.plans[static_cast<size_t>(iter)] = std::move(pb);
        store.errors[static_cast<size_t>(iter)] = error;
        store.state[static_cast<size_t>(iter)] = 2;
        log_event(PipelineEvent::PlanDone, iter);
        store.cv.notify_all();
      }
    }
  };

  std::vector<std::thread> pool;
  for (int w = 0; w < kappa + 1; ++w) pool.emplace_back(worker);

  for (int i = 0; i < n; ++i) {
    // Plans for i..i+kappa must be complete before iteration i executes.
    const int horizon = std::min(i + kappa, n - 1);
    {
      std::unique_lock<std::mutex> lock(store.mu);
      store.cv.wait(lock, [&] {
        for (int j = i; j <= horizon; ++j)
          if (store.state[static_cast<size_t>(j)] != 2) return false;
        return true;
      });
      log_event(PipelineEvent::SimStart, i);
    }
    IterationReport rep;
    rep.iteration = i;
    const Batch& batch = batches[static_cast<size_t>(i)];
    rep.tokens = batch.total_tokens();
    rep.sequences = static_cast<int>(batch.sequences.size());
    if (!store.errors[static_cast<size_t>(i)].empty()) {
      rep.failed = true;
      rep.error = store.errors[static_cast<size_t>(i)];
    } else {
      try {
        const PlannedBatch& pb = store.plans[static_cast<size_t>(i)];
        SimOptions opts;
        opts.numeric = cfg.numeric;
        opts.cost = cfg.cost;
        BatchPayload payload;
        if (cfg.numeric)
          payload = make_payload(batch, cfg.seed + static_cast<std::uint64_t>(i));
        const SimResult sim = run(pb.plans, pb.graph, payload, cfg.topology, opts);
        rep.comm_bytes = sim.report.total_bytes;
        rep.inter_machine_bytes = pb.placement.inter_machine_bytes;
        rep.flops = sim.report.total_flops;
        rep.makespan = sim.report.makespan;
      } catch (const std::exception& e) {
        rep.failed = true;
        rep.error = e.what();
      }
    }
    result.reports[static_cast<size_t>(i)] = std::move(rep);
    {
      std::unique_lock<std::mutex> lock(store.mu);
      log_event(PipelineEvent::SimDone, i);
      ++store.completed_sims;
      store.cv.notify_all();
    }
  }

  {
    std::unique_lock<std::mutex> lock(store.mu);
    store.completed_sims = n;  // release any gated workers
    store.cv.notify_all();
  }
  for (auto& t : pool) t.join();
  result.events = std::move(store.events);
  return result;
}

inline std::string pipeline_csv(const PipelineResult& r) {
  std::string csv =
      "iteration,sequences,tokens,comm_bytes,inter_machine_bytes,flops,makespan,failed\n";
  for (const auto& rep : r.reports) {
    csv += std::to_string(rep.iteration) + "," + std::to_string(rep.sequences) + "," +
           std::to_string(rep.tokens) + "," + std::to_string(rep.comm_bytes) + "," +
           std::to_string(rep.inter_machine_bytes) + "," + std::to_string(rep.flops) +
           "," + std::to_string(rep.makespan) + "," + (rep.failed ? "1" : "0") + "\n";
  }
  return csv;
}

// Event-log checks of the look-ahead contract.
inline bool events_satisfy_contract(const std::vector<PipelineEvent>& events,
                                    int kappa) {
  std::map<int, int> plan_done_order, sim_start_order;
  int in_flight = 0;
  for (const auto& e : events) {
    switch (e.kind) {
      case PipelineEvent::PlanStart:
        if (++in_flight > kappa + 1) return false;
        break;
      case PipelineEvent::PlanDone:
        --in_flight;
        plan_done_order[e.iteration] = e.order;
        break;
      case PipelineEvent::SimStart:
        sim_start_order[e.iteration] = e.order;
        break;
      case PipelineEvent::SimDone:
        break;
    }
  }
  for (const auto& [iter, sim_order] : sim_start_order) {
    auto it = plan_done_order.find(iter);
    if (it == plan_done_order.end() || it->second > sim_order) return false;
  }
  return true;
}

}  // namespace dcp
