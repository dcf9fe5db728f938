#pragma once

#include <map>
#include <tuple>

#include "dcp/placement.hpp"

namespace dcp {

struct Fetch {
  int block = 0;  // data block id
  int src = 0;    // source device
};

struct DeviceDivision {
  std::vector<int> comp_blocks;  // computation block ids, in scheduled order
  std::vector<Fetch> fetches;    // blocks arriving for this division's work
};

struct OutputTransfer {
  int block = 0;  // O data block id
  int src = 0;    // producing device
  int dst = 0;    // owner device
};

struct DivisionSchedule {
  int divisions = 0;  // T
  int devices = 0;
  // divisions[t][device]
  std::vector<std::vector<DeviceDivision>> div;
  std::vector<OutputTransfer> output_transfers;
  // Total fetch bytes per (dst, src), the basis of the per-division limit.
  std::vector<std::vector<ByteCount>> comm_requirements;
};

// Groups each device's computation blocks into T divisions. Division 0 holds
// the blocks needing no remote input; middle divisions are packed greedily on
// the device with the least scheduled compute, deferring any block whose new
// fetches would push a (device, peer) pair past 1/T of its total; the last
// division takes the remainder regardless of volume. Output transfers happen
// after all divisions.
inline DivisionSchedule schedule(const BlockGraph& g, const PlacementResult& pl,
                                 int divisions) {
  if (divisions < 2) throw Error("schedule: at least 2 divisions required");
  const int R = pl.device_count();

  DivisionSchedule s;
  s.divisions = divisions;
  s.devices = R;
  s.div.assign(static_cast<size_t>(divisions),
               std::vector<DeviceDivision>(static_cast<size_t>(R)));
  s.comm_requirements.assign(static_cast<size_t>(R),
                             std::vector<ByteCount>(static_cast<size_t>(R), 0));

  // Remote input blocks per computation block, deduplicated per device later.
  auto remote_inputs = [&](const ComputationBlock& c, int dev) {
    std::vector<int> blocks;
    if (pl.data_block_device[static_cast<size_t>(c.q_block)] != dev) blocks.push_back(c.q_block);
    if (pl.data_block_device[static_cast<size_t>(c.kv_block)] != dev) blocks.push_back(c.kv_block);
    return blocks;
  };

  // comm_requirements[dst][src]: distinct remote blocks needed by dst.
  std::vector<std::map<int, char>> needed(static_cast<size_t>(R));  // block -> fetched marker
  for (const auto& c : g.comp_blocks) {
    const int dev = pl.comp_block_device[static_cast<size_t>(c.id)];
    for (int b : remote_inputs(c, dev)) {
      auto [it, inserted] = needed[static_cast<size_t>(dev)].insert({b, 0});
      if (inserted)
        s.comm_requirements[static_cast<size_t>(dev)][static_cast<size_t>(pl.data_block_device[static_cast<size_t>(b)])] +=
            g.data_blocks[static_cast<size_t>(b)].size_bytes;
    }
  }

  // Remaining blocks per device, ascending id.
  std::vector<std::vector<int>> remaining(static_cast<size_t>(R));
  for (const auto& c : g.comp_blocks)
    remaining[static_cast<size_t>(pl.comp_block_device[static_cast<size_t>(c.id)])].push_back(c.id);

  std::vector<FlopCount> scheduled_flops(static_cast<size_t>(R), 0);

  auto schedule_block = [&](int c_id, int dev, int division) {
    const auto& c = g.comp_blocks[static_cast<size_t>(c_id)];
    s.div[static_cast<size_t>(division)][static_cast<size_t>(dev)].comp_blocks.push_back(c_id);
    scheduled_flops[static_cast<size_t>(dev)] += c.flops_weight;
    for (int b : remote_inputs(c, dev)) {
      auto& mark = needed[static_cast<size_t>(dev)][b];
      if (mark) continue;  // already fetched in an earlier (or this) division
      mark = 1;
      const int src = pl.data_block_device[static_cast<size_t>(b)];
      s.div[static_cast<size_t>(division)][static_cast<size_t>(dev)].fetches.push_back({b, src});
    }
  };

  // Division 0: communication-free blocks.
  for (int d = 0; d < R; ++d) {
    std::vector<int> rest;
    for (int c_id : remaining[static_cast<size_t>(d)]) {
      if (remote_inputs(g.comp_blocks[static_cast<size_t>(c_id)], d).empty())
        schedule_block(c_id, d, 0);
      else
        rest.push_back(c_id);
    }
    remaining[static_cast<size_t>(d)] = std::move(rest);
  }

  // Middle divisions: per division, each device gets one packing pass, visited
  // in order of least scheduled compute.
  for (int t = 1; t < divisions - 1; ++t) {
    std::vector<char> done(static_cast<size_t>(R), 0);
    for (int round = 0; round < R; ++round) {
      int dev = -1;
      for (int d = 0; d < R; ++d) {
        if (done[static_cast<size_t>(d)] || remaining[static_cast<size_t>(d)].empty()) continue;
        if (dev < 0 || scheduled_flops[static_cast<size_t>(d)] < scheduled_flops[static_cast<size_t>(dev)]) dev = d;
      }
      if (dev < 0) break;
      done[static_cast<size_t>(dev)] = 1;
      // Bytes fetched by this device within this division, per source.
      std::vector<ByteCount> div_fetched(static_cast<size_t>(R), 0);
      std::vector<int> rest;
      for (int c_id : remaining[static_cast<size_t>(dev)]) {
        const auto& c = g.comp_blocks[static_cast<size_t>(c_id)];
        // New fetch bytes this block would add, per source.
        std::map<int, ByteCount> inc;
        for (int b : remote_inputs(c, dev))
          if (!needed[static_cast<size_t>(dev)][b])
            inc[pl.data_block_device[static_cast<size_t>(b)]] += g.data_blocks[static_cast<size_t>(b)].size_bytes;
        bool fits = true;
        for (auto& [src, bytes] : inc) {
          // per-division limit = comm_requirements / T, integer arithmetic
          const ByteCount after = div_fetched[static_cast<size_t>(src)] + bytes;
          if (after * static_cast<ByteCount>(divisions) >
              s.comm_requirements[static_cast<size_t>(dev)][static_cast<size_t>(src)]) {
            fits = false;
            break;
          }
        }
        if (fits) {
          schedule_block(c_id, dev, t);
          for (auto& [src, bytes] : inc) div_fetched[static_cast<size_t>(src)] += bytes;
        } else {
          rest.push_back(c_id);
        }
      }
      remaining[static_cast<size_t>(dev)] = std::move(rest);
    }
  }

  // Last division: everything left, regardless of communication volume.
  for (int d = 0; d < R; ++d) {
    for (int c_id : remaining[static_cast<size_t>(d)]) schedule_block(c_id, d, divisions - 1);
    remaining[static_cast<size_t>(d)].clear();
  }

  // Output transfers after all divisions: one reduced partial per
  // (O block, producing device) pair.
  std::map<std::pair<int, int>, char> out_seen;
  for (const auto& c : g.comp_blocks) {
    const int dev = pl.comp_block_device[static_cast<size_t>(c.id)];
    const int home = pl.data_block_device[static_cast<size_t>(c.o_block)];
    if (dev == home) continue;
    if (out_seen.insert({{c.o_block, dev}, 1}).second)
      s.output_transfers.push_back({c.o_block, dev, home});
  }
  std::sort(s.output_transfers.begin(), s.output_transfers.end(),
            [](const OutputTransfer& a, const OutputTransfer& b) {
              return std::tie(a.block, a.src) < std::tie(b.block, b.src);
            });
  return s;
}

struct CostParams {
  double flops_per_sec = 312e12;
};

struct DivisionCost {
  double comp_time = 0;  // max over devices
  double comm_time = 0;  // max over links
};

struct ScheduleCost {
  std::vector<DivisionCost> per_division;  // index T is the output stage
  double makespan = 0;
};

namespace detail {

// Pipeline recurrence: the communication feeding division t overlaps with the
// compute of division t-1; division t's compute starts once both its data has
// arrived and the previous division finished.
inline double pipeline_makespan(const std::vector<DivisionCost>& divs) {
  double start_comp_prev = 0;
  double finish_comp = 0;
  for (size_t t = 0; t < divs.size(); ++t) {
    double start;
    if (t == 0) {
      start = 0;
    } else {
      const double finish_comm = start_comp_prev + divs[t].comm_time;
      start = std::max(finish_comp, finish_comm);
    }
    start_comp_prev = start;
    finish_comp = start + divs[t].comp_time;
  }
  return finish_comp;
}

inline double link_time(const DeviceTopology& topo, int src, int dst, ByteCount bytes) {
  if (bytes == 0) return 0;
  const bool intra = topo.machine_of(src) == topo.machine_of(dst);
  const double bw = intra ? topo.intra_bw : topo.inter_bw;
  const double lat = intra ? topo.latency_intra : topo.latency_inter;
  return lat + static_cast<double>(bytes) / bw;
}

inline ScheduleCost cost_from_tables(
    const std::vector<std::vector<FlopCount>>& comp,              // [t][device]
    const std::vector<std::map<std::pair<int, int>, ByteCount>>& comm,  // [t][(src,dst)]
    const DeviceTopology& topo, const CostParams& params) {
  ScheduleCost sc;
  const size_t stages = std::max(comp.size(), comm.size());
  sc.per_division.resize(stages);
  for (size_t t = 0; t < stages; ++t) {
    DivisionCost dc;
    if (t < comp.size())
      for (FlopCount f : comp[t])
        dc.comp_time = std::max(dc.comp_time, static_cast<double>(f) / params.flops_per_sec);
    if (t < comm.size())
      for (const auto& [link, bytes] : comm[t])
        dc.comm_time = std::max(dc.comm_time, link_time(topo, link.first, link.second, bytes));
    sc.per_division[t] = dc;
  }
  sc.makespan = pipeline_makespan(sc.per_division);
  return sc;
}

}  // namespace detail

// Modeled execution time of a schedule: per division, compute runs in
// parallel across devices and messages in parallel across links; the output
// stage is appended as a final communication-only division.
inline ScheduleCost schedule_cost(const DivisionSchedule& s, const BlockGraph& g,
                                  const DeviceTopology& topo,
                                  const CostParams& params = {}) {
  const int T = s.divisions;
  std::vector<std::vector<FlopCount>> comp(
      static_cast<size_t>(T) + 1, std::vector<FlopCount>(static_cast<size_t>(s.devices), 0));
  std::vector<std::map<std::pair<int, int>, ByteCount>> comm(static_cast<size_t>(T) + 1);
  for (int t = 0; t < T; ++t) {
    for (int d = 0; d < s.devices; ++d) {
      const auto& dd = s.div[static_cast<size_t>(t)][static_cast<size_t>(d)];
      for (int c : dd.comp_blocks)
        comp[static_cast<size_t>(t)][static_cast<size_t>(d)] += g.comp_blocks[static_cast<size_t>(c)].flops_weight;
      for (const auto& f : dd.fetches)
        comm[static_cast<size_t>(t)][{f.src, d}] += g.data_blocks[static_cast<size_t>(f.block)].size_bytes;
    }
  }
  for (const auto& ot : s.output_transfers)
    comm[static_cast<size_t>(T)][{ot.src, ot.dst}] += g.data_blocks[static_cast<size_t>(ot.block)].size_bytes;
  return detail::cost_from_tables(comp, comm, topo, params);
}

}  // namespace dcp
