#pragma once

#include "dcp/schedule.hpp"

namespace dcp {

namespace detail {

// Derives the full PlacementResult bookkeeping from explicit group and
// computation assignments, so baselines run through the same downstream
// pipeline as the planner.
inline PlacementResult make_placement(const BlockGraph& g, const DeviceTopology& topo,
                                      std::vector<int> group_device,
                                      std::vector<int> comp_device) {
  PlacementResult r;
  r.machines = topo.machines;
  r.devices_per_machine = topo.devices_per_machine;
  r.group_device = std::move(group_device);
  r.comp_block_device = std::move(comp_device);
  r.data_block_device.resize(g.data_blocks.size());
  for (const auto& d : g.data_blocks)
    r.data_block_device[static_cast<size_t>(d.id)] =
        r.group_device[static_cast<size_t>(g.group_of_block[static_cast<size_t>(d.id)])];
  r.balance = device_balance(g, r.group_device, r.comp_block_device, topo.device_count());
  const Hypergraph h = build_hypergraph(g);
  const auto flat = r.flat_assignment(h);
  Partition flat_p;
  flat_p.parts = topo.device_count();
  flat_p.assignment = flat;
  const ByteCount total = connectivity_cost(h, flat_p);
  r.inter_machine_bytes = machine_connectivity(h, flat, topo);
  r.intra_machine_bytes = total - r.inter_machine_bytes;
  return r;
}

// Contiguous tile chunks: device r owns tiles [r*ceil(T/R), ...).
inline int ring_chunk_of_tile(int tile, int tiles, int devices) {
  const int chunk = (tiles + devices - 1) / devices;
  return std::min(tile / chunk, devices - 1);
}

}  // namespace detail

// Ring placement: each sequence is split into R contiguous chunks of tiles,
// chunk r on device r; computation stays with its query chunk.
inline PlacementResult ring_placement(const BlockGraph& g, const DeviceTopology& topo) {
  const int R = topo.device_count();
  std::vector<int> group_device(g.groups.size(), 0);
  for (const auto& grp : g.groups)
    group_device[static_cast<size_t>(grp.id)] =
        detail::ring_chunk_of_tile(grp.tile, g.tiles_of_seq(grp.seq), R);
  std::vector<int> comp_device(g.comp_blocks.size(), 0);
  for (const auto& c : g.comp_blocks)
    comp_device[static_cast<size_t>(c.id)] =
        detail::ring_chunk_of_tile(c.q_tile, g.tiles_of_seq(c.seq), R);
  return detail::make_placement(g, topo, std::move(group_device), std::move(comp_device));
}

// Zigzag placement: each sequence is split into 2R chunks (remainder to the
// last chunk); device i owns chunks i and 2R-1-i, balancing causal compute.
inline PlacementResult zigzag_placement(const BlockGraph& g, const DeviceTopology& topo) {
  const int R = topo.device_count();
  auto device_of_tile = [&](int tile, int tiles) {
    const int chunks = 2 * R;
    const int base = std::max(tiles / chunks, 1);
    int chunk = std::min(tile / base, chunks - 1);  // remainder joins the last chunk
    return chunk < R ? chunk : 2 * R - 1 - chunk;
  };
  std::vector<int> group_device(g.groups.size(), 0);
  for (const auto& grp : g.groups)
    group_device[static_cast<size_t>(grp.id)] = device_of_tile(grp.tile, g.tiles_of_seq(grp.seq));
  std::vector<int> comp_device(g.comp_blocks.size(), 0);
  for (const auto& c : g.comp_blocks)
    comp_device[static_cast<size_t>(c.id)] = device_of_tile(c.q_tile, g.tiles_of_seq(c.seq));
  return detail::make_placement(g, topo, std::move(group_device), std::move(comp_device));
}

// Data-parallel placement: whole sequences greedily bin-packed onto devices
// by token count (largest first); zero communication by construction.
inline PlacementResult dp_placement(const BlockGraph& g, const DeviceTopology& topo,
                                    double eps_data = 0.05) {
  const int R = topo.device_count();
  const TokenIndex budget =
      g.batch.token_budget > 0 ? g.batch.token_budget : g.batch.total_tokens();
  const double cap = static_cast<double>(budget) / R * (1.0 + eps_data);
  std::vector<int> order(g.batch.sequences.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    return g.batch.sequences[static_cast<size_t>(a)].length > g.batch.sequences[static_cast<size_t>(b)].length;
  });
  std::vector<TokenIndex> load(static_cast<size_t>(R), 0);
  std::vector<int> device_of_seq(g.batch.sequences.size(), 0);
  for (int s : order) {
    const TokenIndex len = g.batch.sequences[static_cast<size_t>(s)].length;
    if (static_cast<double>(len) > cap)
      throw InfeasibleError("dp_placement: sequence " +
                            g.batch.sequences[static_cast<size_t>(s)].seq_id +
                            " exceeds the per-device token cap");
    int best = 0;
    for (int d = 1; d < R; ++d)
      if (load[static_cast<size_t>(d)] < load[static_cast<size_t>(best)]) best = d;
    device_of_seq[static_cast<size_t>(s)] = best;
    load[static_cast<size_t>(best)] += len;
  }
  std::vector<int> group_device(g.groups.size(), 0);
  for (const auto& grp : g.groups)
    group_device[static_cast<size_t>(grp.id)] = device_of_seq[static_cast<size_t>(grp.seq)];
  std::vector<int> comp_device(g.comp_blocks.size(), 0);
  for (const auto& c : g.comp_blocks)
    comp_device[static_cast<size_t>(c.id)] = device_of_seq[static_cast<size_t>(c.seq)];
  return detail::make_placement(g, topo, std::move(group_device), std::move(comp_device));
}

// Transfer accounting of the fixed circulate-everything schedule shared by the
// ring-style baselines: over R-1 steps every KV block visits every other
// device, needed or not.
struct BaselineTransferStats {
  std::uint64_t total_kv_transfers = 0;
  std::uint64_t needed_kv_transfers = 0;
  std::uint64_t redundant_kv_transfers = 0;
  ByteCount total_kv_bytes = 0;
  ByteCount needed_kv_bytes = 0;
};

inline BaselineTransferStats baseline_transfer_stats(const BlockGraph& g,
                                                     const PlacementResult& pl) {
  const int R = pl.device_count();
  BaselineTransferStats st;
  for (const auto& d : g.data_blocks) {
    if (d.kind != BlockKind::KV) continue;
    st.total_kv_transfers += static_cast<std::uint64_t>(R - 1);
    st.total_kv_bytes += d.size_bytes * static_cast<ByteCount>(R - 1);
  }
  // A received block is needed when some local computation consumes it.
  std::map<std::pair<int, int>, char> needed;  // (kv block, device)
  for (const auto& c : g.comp_blocks) {
    const int dev = pl.comp_block_device[static_cast<size_t>(c.id)];
    const int home = pl.data_block_device[static_cast<size_t>(c.kv_block)];
    if (dev != home && needed.insert({{c.kv_block, dev}, 1}).second) {
      ++st.needed_kv_transfers;
      st.needed_kv_bytes += g.data_blocks[static_cast<size_t>(c.kv_block)].size_bytes;
    }
  }
  st.redundant_kv_transfers = st.total_kv_transfers - st.needed_kv_transfers;
  return st;
}

// Modeled execution time of the ring baseline: R steps; at step s device r
// computes its queries against the KV chunk of device (r-s) mod R, which
// arrived from its ring neighbour during step s-1. Step 0 is local and
// communication free; outputs never move.
inline ScheduleCost ring_schedule_cost(const BlockGraph& g, const PlacementResult& pl,
                                       const DeviceTopology& topo,
                                       const CostParams& params = {}) {
  const int R = pl.device_count();
  std::vector<std::vector<FlopCount>> comp(static_cast<size_t>(R),
                                           std::vector<FlopCount>(static_cast<size_t>(R), 0));
  std::vector<std::map<std::pair<int, int>, ByteCount>> comm(static_cast<size_t>(R));

  for (const auto& c : g.comp_blocks) {
    const int dev = pl.comp_block_device[static_cast<size_t>(c.id)];
    const int kv_home = pl.data_block_device[static_cast<size_t>(c.kv_block)];
    const int step = (dev - kv_home + R) % R;
    comp[static_cast<size_t>(step)][static_cast<size_t>(dev)] += c.flops_weight;
  }
  // Per-device KV bytes circulate whole: at step s, device r receives the
  // chunk originally held by (r-s) mod R from neighbour (r-1) mod R.
  std::vector<ByteCount> chunk_bytes(static_cast<size_t>(R), 0);
  for (const auto& d : g.data_blocks)
    if (d.kind == BlockKind::KV)
      chunk_bytes[static_cast<size_t>(pl.data_block_device[static_cast<size_t>(d.id)])] += d.size_bytes;
  for (int s = 1; s < R; ++s)
    for (int r = 0; r < R; ++r) {
      const ByteCount bytes = chunk_bytes[static_cast<size_t>((r - s + R) % R)];
      if (bytes > 0) comm[static_cast<size_t>(s)][{(r - 1 + R) % R, r}] += bytes;
    }
  return detail::cost_from_tables(comp, comm, topo, params);
}

}  // namespace dcp
