// Shared fixtures: the paper-derived scenarios and random generators used by
// both the unit suites and the acceptance gate.
#pragma once

#include <random>

#include "dcp/baselines.hpp"
#include "dcp/blocks.hpp"

namespace fixtures {

using namespace dcp;

inline Batch single_seq_batch(TokenIndex length, MaskDescriptor mask, int heads = 1,
                              int kv_groups = 1, int head_dim = 4) {
  Batch b;
  b.heads = heads;
  b.kv_groups = kv_groups;
  b.head_dim = head_dim;
  b.token_budget = length;
  SequenceSpec s;
  s.seq_id = "s0";
  s.length = length;
  s.mask = std::move(mask);
  b.sequences.push_back(std::move(s));
  return b;
}

// Six-token shared-question sequence split into three 2-token tiles: the
// hypergraph over its blocks has exactly nine hyperedges.
inline Batch fig9_batch() {
  return single_seq_batch(6, MaskDescriptor::shared_question(2, {2, 2}));
}

inline BlockGraph fig9_graph() { return generate_blocks(fig9_batch(), 2); }

// Two short causal sequences (4 tokens, 1-token tiles) and one long causal
// sequence (8 tokens, 2-token tiles): four tiles per sequence, the long tiles
// twice the size.
inline Batch fig5_batch() {
  Batch b;
  b.heads = 1;
  b.kv_groups = 1;
  b.head_dim = 8;
  b.token_budget = 16;
  for (int i = 0; i < 2; ++i) {
    SequenceSpec s;
    s.seq_id = "short" + std::to_string(i);
    s.length = 4;
    b.sequences.push_back(std::move(s));
  }
  SequenceSpec s;
  s.seq_id = "long";
  s.length = 8;
  b.sequences.push_back(std::move(s));
  return b;
}

inline BlockGraph fig5_graph() { return generate_blocks(fig5_batch(), {1, 1, 2}); }

inline DeviceTopology two_devices() {
  DeviceTopology t;
  t.machines = 1;
  t.devices_per_machine = 2;
  return t;
}

// Pure context parallelism: every sequence split in half across both devices,
// computation on its query's device.
inline PlacementResult fig5_pure_cp(const BlockGraph& g) {
  return ring_placement(g, two_devices());
}

// Mixed CP/DP: each short sequence whole on one device, the long sequence
// split contiguously; computation on its query's device.
inline PlacementResult fig5_mixed(const BlockGraph& g) {
  std::vector<int> group_device(g.groups.size(), 0);
  std::vector<int> comp_device(g.comp_blocks.size(), 0);
  for (const auto& grp : g.groups) {
    if (grp.seq == 0) group_device[static_cast<size_t>(grp.id)] = 0;
    else if (grp.seq == 1) group_device[static_cast<size_t>(grp.id)] = 1;
    else group_device[static_cast<size_t>(grp.id)] = grp.tile < 2 ? 0 : 1;
  }
  for (const auto& c : g.comp_blocks) {
    if (c.seq == 0) comp_device[static_cast<size_t>(c.id)] = 0;
    else if (c.seq == 1) comp_device[static_cast<size_t>(c.id)] = 1;
    else comp_device[static_cast<size_t>(c.id)] = c.q_tile < 2 ? 0 : 1;
  }
  return detail::make_placement(g, two_devices(), std::move(group_device),
                                std::move(comp_device));
}

// Balanced variant of the mixed placement: the long sequence's computation is
// split so both devices carry 28 attended pairs (data placement unchanged).
inline PlacementResult fig5_mixed_balanced(const BlockGraph& g) {
  std::vector<int> group_device(g.groups.size(), 0);
  std::vector<int> comp_device(g.comp_blocks.size(), 0);
  for (const auto& grp : g.groups) {
    if (grp.seq == 0) group_device[static_cast<size_t>(grp.id)] = 0;
    else if (grp.seq == 1) group_device[static_cast<size_t>(grp.id)] = 1;
    else group_device[static_cast<size_t>(grp.id)] = grp.tile < 2 ? 0 : 1;
  }
  for (const auto& c : g.comp_blocks) {
    if (c.seq == 0) comp_device[static_cast<size_t>(c.id)] = 0;
    else if (c.seq == 1) comp_device[static_cast<size_t>(c.id)] = 1;
    else if (c.q_tile < 2) comp_device[static_cast<size_t>(c.id)] = 0;
    else if (c.q_tile == 2 && c.kv_tile < 2) comp_device[static_cast<size_t>(c.id)] = 0;
    else comp_device[static_cast<size_t>(c.id)] = 1;
  }
  return detail::make_placement(g, two_devices(), std::move(group_device),
                                std::move(comp_device));
}

// Sixteen-tile shared-question sequence on four devices: a two-tile question
// and answers of 4/3/3/4 tiles. Under ring placement 48 KV tiles circulate
// and only 10 carry data the receiving device needs.
inline Batch fig7_batch(TokenIndex tile_tokens = 4) {
  const TokenIndex B = tile_tokens;
  return single_seq_batch(
      16 * B, MaskDescriptor::shared_question(2 * B, {4 * B, 3 * B, 3 * B, 4 * B}),
      1, 1, 8);
}

inline BlockGraph fig7_graph(TokenIndex tile_tokens = 4) {
  return generate_blocks(fig7_batch(tile_tokens), tile_tokens);
}

inline DeviceTopology four_devices() {
  DeviceTopology t;
  t.machines = 1;
  t.devices_per_machine = 4;
  return t;
}

// Random valid mask for a sequence of the given length.
inline MaskDescriptor random_mask(TokenIndex length, std::mt19937_64& rng) {
  switch (rng() % 4) {
    case 0:
      return MaskDescriptor::causal();
    case 1: {
      const TokenIndex sink = static_cast<TokenIndex>(rng() % static_cast<std::uint64_t>(length + 1));
      const TokenIndex window = 1 + static_cast<TokenIndex>(rng() % static_cast<std::uint64_t>(length));
      return MaskDescriptor::lambda(sink, window);
    }
    case 2: {
      const TokenIndex block = 1 + static_cast<TokenIndex>(rng() % 8);
      const int window_blocks = 1 + static_cast<int>(rng() % 3);
      const int sink_blocks = static_cast<int>(rng() % 3);
      const int test_blocks = static_cast<int>(rng() % 2);
      return MaskDescriptor::causal_blockwise(block, window_blocks, sink_blocks, test_blocks);
    }
    default: {
      if (length < 3) return MaskDescriptor::causal();
      const int answers = 1 + static_cast<int>(rng() % 3);
      std::vector<TokenIndex> lens;
      TokenIndex remaining = length - 1;  // leave at least one question token
      for (int a = 0; a < answers; ++a) {
        const TokenIndex rest = static_cast<TokenIndex>(answers - a - 1);
        if (remaining <= rest) break;
        const TokenIndex max_len = remaining - rest;
        const TokenIndex len = 1 + static_cast<TokenIndex>(rng() % static_cast<std::uint64_t>(max_len));
        lens.push_back(len);
        remaining -= len;
      }
      if (lens.empty()) return MaskDescriptor::causal();
      const TokenIndex total = std::accumulate(lens.begin(), lens.end(), TokenIndex{0});
      return MaskDescriptor::shared_question(length - total, std::move(lens));
    }
  }
}

inline Batch random_batch(std::mt19937_64& rng, TokenIndex max_seq_len = 64,
                          int max_seqs = 3, int max_heads = 2, int max_dim = 8) {
  Batch b;
  const int G = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_heads));
  b.kv_groups = G;
  b.heads = G * (1 + static_cast<int>(rng() % 2));
  b.head_dim = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_dim));
  const int n = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_seqs));
  for (int i = 0; i < n; ++i) {
    SequenceSpec s;
    s.seq_id = "r" + std::to_string(i);
    s.length = 1 + static_cast<TokenIndex>(rng() % static_cast<std::uint64_t>(max_seq_len));
    s.mask = random_mask(s.length, rng);
    b.sequences.push_back(std::move(s));
  }
  b.token_budget = b.total_tokens();
  return b;
}

}  // namespace fixtures
