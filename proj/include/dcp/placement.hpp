#pragma once

#include "dcp/hypergraph.hpp"

namespace dcp {

struct DeviceBalance {
  FlopCount flops = 0;
  ByteCount bytes = 0;
  TokenIndex tokens = 0;
};

struct PlacementResult {
  std::vector<int> group_device;       // co-location group -> device
  std::vector<int> data_block_device;  // data block -> device (via its group)
  std::vector<int> comp_block_device;  // computation block -> device
  int machines = 1;
  int devices_per_machine = 1;
  ByteCount inter_machine_bytes = 0;  // level-1 connectivity cost
  ByteCount intra_machine_bytes = 0;  // sum of level-2 connectivity costs
  std::vector<DeviceBalance> balance;

  int device_count() const { return machines * devices_per_machine; }
  int machine_of(int device) const { return device / devices_per_machine; }

  // Flat per-vertex assignment in hypergraph vertex order (comps then groups).
  std::vector<int> flat_assignment(const Hypergraph& h) const {
    std::vector<int> a(static_cast<size_t>(h.vertex_count()));
    for (int c = 0; c < h.comp_count; ++c) a[static_cast<size_t>(c)] = comp_block_device[static_cast<size_t>(c)];
    for (int grp = 0; grp < h.group_count; ++grp)
      a[static_cast<size_t>(h.group_vertex(grp))] = group_device[static_cast<size_t>(grp)];
    return a;
  }
};

namespace detail {

inline std::vector<DeviceBalance> device_balance(const BlockGraph& g,
                                                 const std::vector<int>& group_device,
                                                 const std::vector<int>& comp_device,
                                                 int devices) {
  std::vector<DeviceBalance> bal(static_cast<size_t>(devices));
  for (const auto& grp : g.groups) {
    auto& b = bal[static_cast<size_t>(group_device[static_cast<size_t>(grp.id)])];
    b.bytes += grp.size_bytes;
    b.tokens += grp.tokens.size();
  }
  for (const auto& c : g.comp_blocks)
    bal[static_cast<size_t>(comp_device[static_cast<size_t>(c.id)])].flops += c.flops_weight;
  return bal;
}

inline PlacementResult placement_from_flat(const BlockGraph& g, const Hypergraph& h,
                                           const std::vector<int>& flat,
                                           const DeviceTopology& topo) {
  PlacementResult r;
  r.machines = topo.machines;
  r.devices_per_machine = topo.devices_per_machine;
  r.comp_block_device.resize(g.comp_blocks.size());
  r.group_device.resize(g.groups.size());
  for (int c = 0; c < h.comp_count; ++c) r.comp_block_device[static_cast<size_t>(c)] = flat[static_cast<size_t>(c)];
  for (int grp = 0; grp < h.group_count; ++grp)
    r.group_device[static_cast<size_t>(grp)] = flat[static_cast<size_t>(h.group_vertex(grp))];
  r.data_block_device.resize(g.data_blocks.size());
  for (const auto& d : g.data_blocks)
    r.data_block_device[static_cast<size_t>(d.id)] = r.group_device[static_cast<size_t>(g.group_of_block[static_cast<size_t>(d.id)])];
  r.balance = device_balance(g, r.group_device, r.comp_block_device, topo.device_count());
  return r;
}

// Connectivity cost at machine granularity for a device-level assignment.
inline ByteCount machine_connectivity(const Hypergraph& h, const std::vector<int>& device_of,
                                      const DeviceTopology& topo) {
  Partition p;
  p.parts = topo.machines;
  p.assignment.resize(device_of.size());
  for (size_t v = 0; v < device_of.size(); ++v)
    p.assignment[v] = topo.machine_of(device_of[v]);
  return connectivity_cost(h, p);
}

}  // namespace detail

struct PlacementConfig {
  double eps_inter = 0.4;
  double eps_intra = 0.1;
  double eps_data = 0.05;
  std::uint64_t seed = 0;
  PartitionOptions partition_options{};
};

// Two-level hierarchical placement: partition across machines minimizing
// cross-machine traffic, then within each machine across devices. Hyperedges
// crossing machines participate in the per-machine subproblem restricted to
// their local members.
inline PlacementResult place(const BlockGraph& g, const DeviceTopology& topo,
                             const PlacementConfig& cfg = {}) {
  topo.validate();
  const Hypergraph h = build_hypergraph(g);
  const int X = topo.machines;
  const int Y = topo.devices_per_machine;
  const int n = h.vertex_count();

  std::vector<int> machine_of(static_cast<size_t>(n), 0);
  ByteCount inter_bytes = 0;
  if (X > 1) {
    Partition level1;
    try {
      level1 = partition_heuristic(h, X, cfg.eps_inter, cfg.eps_data, cfg.seed,
                                   cfg.partition_options);
    } catch (const InfeasibleError& e) {
      throw InfeasibleError(std::string("machine-level placement: ") + e.what());
    }
    machine_of = level1.assignment;
    inter_bytes = connectivity_cost(h, level1);
  }

  std::vector<int> device_of(static_cast<size_t>(n), 0);
  ByteCount intra_bytes = 0;
  for (int m = 0; m < X; ++m) {
    std::vector<int> verts;
    for (int v = 0; v < n; ++v)
      if (machine_of[static_cast<size_t>(v)] == m) verts.push_back(v);
    if (verts.empty()) continue;
    if (Y == 1) {
      for (int v : verts) device_of[static_cast<size_t>(v)] = m * Y;
      continue;
    }
    // Induced sub-hypergraph: edges keep only members on this machine.
    Hypergraph sub;
    std::vector<int> local_id(static_cast<size_t>(n), -1);
    for (size_t i = 0; i < verts.size(); ++i) local_id[static_cast<size_t>(verts[i])] = static_cast<int>(i);
    sub.comp_count = static_cast<int>(verts.size());
    sub.group_count = 0;
    sub.weights.resize(verts.size());
    for (size_t i = 0; i < verts.size(); ++i) sub.weights[i] = h.weights[static_cast<size_t>(verts[i])];
    for (const auto& e : h.edges) {
      Hyperedge se;
      se.weight = e.weight;
      for (int v : e.members)
        if (local_id[static_cast<size_t>(v)] >= 0) se.members.push_back(local_id[static_cast<size_t>(v)]);
      if (se.members.size() > 1) sub.edges.push_back(std::move(se));
    }
    Partition level2;
    try {
      level2 = partition_heuristic(sub, Y, cfg.eps_intra, cfg.eps_data,
                                   cfg.seed + static_cast<std::uint64_t>(m) + 1,
                                   cfg.partition_options);
    } catch (const InfeasibleError& e) {
      throw InfeasibleError("device-level placement on machine " + std::to_string(m) +
                            ": " + e.what());
    }
    intra_bytes += connectivity_cost(sub, level2);
    for (size_t i = 0; i < verts.size(); ++i)
      device_of[static_cast<size_t>(verts[i])] = m * Y + level2.assignment[i];
  }

  PlacementResult r = detail::placement_from_flat(g, h, device_of, topo);
  r.inter_machine_bytes = inter_bytes;
  r.intra_machine_bytes = intra_bytes;
  return r;
}

struct CommVolume {
  ByteCount total = 0;
  std::vector<ByteCount> per_device_send;
  std::vector<ByteCount> per_device_recv;
  ByteCount inter_machine = 0;  // machine-granularity connectivity metric
  // Distinct (data block, destination) transfers by block kind.
  std::uint64_t q_block_transfers = 0;
  std::uint64_t kv_block_transfers = 0;
  std::uint64_t o_block_transfers = 0;
};

// Byte counts of the placement's required communication. Inputs are fetched
// to the computation's device, outputs returned to their owner. With dedup a
// data block is transferred at most once per destination device, matching the
// lambda-1 connectivity semantics; without dedup every computation-block
// reference is counted, matching the raw double-sum formula.
inline CommVolume communication_volume(const BlockGraph& g, const PlacementResult& pl,
                                       bool dedup = true) {
  const int devices = pl.device_count();
  CommVolume cv;
  cv.per_device_send.assign(static_cast<size_t>(devices), 0);
  cv.per_device_recv.assign(static_cast<size_t>(devices), 0);

  // seen[(block, device)] for dedup mode.
  std::vector<std::vector<char>> seen;
  if (dedup) seen.assign(g.data_blocks.size(), std::vector<char>(static_cast<size_t>(devices), 0));

  auto transfer = [&](int block, int from, int to) {
    if (from == to) return;
    if (dedup) {
      auto& s = seen[static_cast<size_t>(block)][static_cast<size_t>(to)];
      if (s) return;
      s = 1;
    }
    const auto& d = g.data_blocks[static_cast<size_t>(block)];
    cv.total += d.size_bytes;
    cv.per_device_send[static_cast<size_t>(from)] += d.size_bytes;
    cv.per_device_recv[static_cast<size_t>(to)] += d.size_bytes;
    switch (d.kind) {
      case BlockKind::Q: ++cv.q_block_transfers; break;
      case BlockKind::KV: ++cv.kv_block_transfers; break;
      case BlockKind::O: ++cv.o_block_transfers; break;
    }
  };

  for (const auto& c : g.comp_blocks) {
    const int dev = pl.comp_block_device[static_cast<size_t>(c.id)];
    transfer(c.q_block, pl.data_block_device[static_cast<size_t>(c.q_block)], dev);
    transfer(c.kv_block, pl.data_block_device[static_cast<size_t>(c.kv_block)], dev);
    // Output partials travel from the computing device to the block's owner.
    const int o_home = pl.data_block_device[static_cast<size_t>(c.o_block)];
    if (dev != o_home) {
      if (dedup) {
        // One reduced partial per (o block, producing device).
        auto& s = seen[static_cast<size_t>(c.o_block)];
        if (!s[static_cast<size_t>(dev)]) {
          s[static_cast<size_t>(dev)] = 1;
          const auto& d = g.data_blocks[static_cast<size_t>(c.o_block)];
          cv.total += d.size_bytes;
          cv.per_device_send[static_cast<size_t>(dev)] += d.size_bytes;
          cv.per_device_recv[static_cast<size_t>(o_home)] += d.size_bytes;
          ++cv.o_block_transfers;
        }
      } else {
        const auto& d = g.data_blocks[static_cast<size_t>(c.o_block)];
        cv.total += d.size_bytes;
        cv.per_device_send[static_cast<size_t>(dev)] += d.size_bytes;
        cv.per_device_recv[static_cast<size_t>(o_home)] += d.size_bytes;
        ++cv.o_block_transfers;
      }
    }
  }

  const Hypergraph h = build_hypergraph(g);
  DeviceTopology topo;
  topo.machines = pl.machines;
  topo.devices_per_machine = pl.devices_per_machine;
  cv.inter_machine = detail::machine_connectivity(h, pl.flat_assignment(h), topo);
  return cv;
}

// Per-device token ownership: the local model inputs implied by a placement.
struct TokenManifest {
  // device -> list of (seq index, token range)
  std::vector<std::vector<std::pair<int, Range>>> owned;
};

inline TokenManifest token_manifest(const BlockGraph& g, const PlacementResult& pl) {
  TokenManifest m;
  m.owned.resize(static_cast<size_t>(pl.device_count()));
  for (const auto& grp : g.groups)
    m.owned[static_cast<size_t>(pl.group_device[static_cast<size_t>(grp.id)])].push_back({grp.seq, grp.tokens});
  return m;
}

}  // namespace dcp
