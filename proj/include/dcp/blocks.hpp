#pragma once

#include "dcp/masks.hpp"
#include "dcp/types.hpp"

namespace dcp {

enum class BlockKind { Q, KV, O };

inline const char* to_string(BlockKind k) {
  switch (k) {
    case BlockKind::Q: return "q";
    case BlockKind::KV: return "kv";
    case BlockKind::O: return "o";
  }
  return "?";
}

struct DataBlock {
  int id = 0;
  BlockKind kind = BlockKind::Q;
  int seq = 0;         // index into Batch::sequences
  int head = 0;        // Q/O: query head; KV: kv group
  int tile = 0;        // tile index along the sequence
  Range tokens;        // [start, end) within the sequence
  ByteCount size_bytes = 0;
};

struct ComputationBlock {
  int id = 0;
  int q_block = 0;
  int kv_block = 0;
  int o_block = 0;
  int seq = 0;
  int head = 0;
  int q_tile = 0;
  int kv_tile = 0;
  FlopCount attended_pairs = 0;
  FlopCount flops_weight = 0;
};

// Q/KV/O blocks covering the same tokens of one sequence, across all heads.
// Placement treats a group as a single atomic unit.
struct ColocationGroup {
  int id = 0;
  int seq = 0;
  int tile = 0;
  Range tokens;
  std::vector<int> block_ids;
  ByteCount size_bytes = 0;
};

struct BlockGraph {
  Batch batch;
  std::vector<TokenIndex> block_sizes;  // per sequence
  std::vector<AttendRanges> masks;      // per sequence
  std::vector<DataBlock> data_blocks;
  std::vector<ComputationBlock> comp_blocks;
  std::vector<ColocationGroup> groups;
  std::vector<int> group_of_block;  // data block id -> group id

  int tiles_of_seq(int seq) const {
    const TokenIndex L = batch.sequences[seq].length;
    const TokenIndex B = block_sizes[seq];
    return static_cast<int>((L + B - 1) / B);
  }

  Range tile_range(int seq, int tile) const {
    const TokenIndex B = block_sizes[seq];
    const TokenIndex L = batch.sequences[seq].length;
    return {tile * B, std::min((tile + 1) * B, L)};
  }

  FlopCount total_flops() const {
    FlopCount f = 0;
    for (const auto& c : comp_blocks) f += c.flops_weight;
    return f;
  }

  ByteCount total_bytes() const {
    ByteCount b = 0;
    for (const auto& d : data_blocks) b += d.size_bytes;
    return b;
  }
};

namespace detail {

// Attended pairs restricted to q tokens [qs, qe) x kv tokens [ks, ke).
inline FlopCount tile_pairs(const AttendRanges& mask, Range q, Range kv) {
  FlopCount pairs = 0;
  for (TokenIndex i = q.begin; i < q.end; ++i)
    pairs += static_cast<FlopCount>(mask.row(i).overlap(kv));
  return pairs;
}

}  // namespace detail

// Partitions each sequence's Q/KV/O into data blocks of `block_sizes[seq]`
// tokens and enumerates the computation blocks with nonzero mask support.
// All-zero tiles are not constructed.
inline BlockGraph generate_blocks(const Batch& batch,
                                  const std::vector<TokenIndex>& block_sizes) {
  batch.validate();
  if (block_sizes.size() != batch.sequences.size())
    throw Error("generate_blocks: one block size per sequence required");
  for (TokenIndex b : block_sizes)
    if (b < 1) throw Error("generate_blocks: block size must be >= 1");

  BlockGraph g;
  g.batch = batch;
  g.block_sizes = block_sizes;
  g.masks.reserve(batch.sequences.size());
  for (const auto& s : batch.sequences) g.masks.push_back(gen_mask(s));

  const int H = batch.heads;
  const int G = batch.kv_groups;
  const int D = batch.head_dim;
  const ByteCount bpe = static_cast<ByteCount>(batch.bytes_per_element);

  // Data blocks: per sequence, Q blocks (head-major), then KV, then O.
  std::vector<std::vector<int>> q_id, kv_id, o_id;  // [seq][head * T + tile]
  q_id.resize(batch.sequences.size());
  kv_id.resize(batch.sequences.size());
  o_id.resize(batch.sequences.size());

  for (int s = 0; s < static_cast<int>(batch.sequences.size()); ++s) {
    const int T = g.tiles_of_seq(s);
    const int group_base = static_cast<int>(g.groups.size());
    for (int t = 0; t < T; ++t) {
      ColocationGroup grp;
      grp.id = group_base + t;
      grp.seq = s;
      grp.tile = t;
      grp.tokens = g.tile_range(s, t);
      g.groups.push_back(grp);
    }
    auto add_block = [&](BlockKind kind, int head, int tile) {
      DataBlock d;
      d.id = static_cast<int>(g.data_blocks.size());
      d.kind = kind;
      d.seq = s;
      d.head = head;
      d.tile = tile;
      d.tokens = g.tile_range(s, tile);
      const ByteCount toks = static_cast<ByteCount>(d.tokens.size());
      const ByteCount factor = (kind == BlockKind::KV) ? 2 : 1;  // K and V
      d.size_bytes = toks * static_cast<ByteCount>(D) * bpe * factor;
      g.data_blocks.push_back(d);
      g.group_of_block.push_back(group_base + tile);
      g.groups[group_base + tile].block_ids.push_back(d.id);
      g.groups[group_base + tile].size_bytes += d.size_bytes;
      return d.id;
    };
    q_id[s].resize(static_cast<size_t>(H) * T);
    kv_id[s].resize(static_cast<size_t>(G) * T);
    o_id[s].resize(static_cast<size_t>(H) * T);
    for (int h = 0; h < H; ++h)
      for (int t = 0; t < T; ++t) q_id[s][static_cast<size_t>(h) * T + t] = add_block(BlockKind::Q, h, t);
    for (int gr = 0; gr < G; ++gr)
      for (int t = 0; t < T; ++t) kv_id[s][static_cast<size_t>(gr) * T + t] = add_block(BlockKind::KV, gr, t);
    for (int h = 0; h < H; ++h)
      for (int t = 0; t < T; ++t) o_id[s][static_cast<size_t>(h) * T + t] = add_block(BlockKind::O, h, t);
  }

  // Computation blocks. Mask support is shared across heads, so tile pair
  // counts are computed once per (q_tile, kv_tile).
  for (int s = 0; s < static_cast<int>(batch.sequences.size()); ++s) {
    const int T = g.tiles_of_seq(s);
    std::vector<FlopCount> pairs(static_cast<size_t>(T) * T, 0);
    for (int qt = 0; qt < T; ++qt)
      for (int kt = 0; kt <= qt; ++kt)
        pairs[static_cast<size_t>(qt) * T + kt] =
            detail::tile_pairs(g.masks[s], g.tile_range(s, qt), g.tile_range(s, kt));
    for (int h = 0; h < H; ++h) {
      const int grp = batch.kv_group_of_head(h);
      for (int qt = 0; qt < T; ++qt) {
        for (int kt = 0; kt <= qt; ++kt) {
          const FlopCount p = pairs[static_cast<size_t>(qt) * T + kt];
          if (p == 0) continue;
          ComputationBlock c;
          c.id = static_cast<int>(g.comp_blocks.size());
          c.q_block = q_id[s][static_cast<size_t>(h) * T + qt];
          c.kv_block = kv_id[s][static_cast<size_t>(grp) * T + kt];
          c.o_block = o_id[s][static_cast<size_t>(h) * T + qt];
          c.seq = s;
          c.head = h;
          c.q_tile = qt;
          c.kv_tile = kt;
          c.attended_pairs = p;
          c.flops_weight = 4 * p * static_cast<FlopCount>(D);
          g.comp_blocks.push_back(c);
        }
      }
    }
  }
  return g;
}

inline BlockGraph generate_blocks(const Batch& batch, TokenIndex block_size) {
  return generate_blocks(
      batch, std::vector<TokenIndex>(batch.sequences.size(), block_size));
}

// The atomic placement units for data: all Q/KV/O blocks (across heads)
// covering the same tokens of one sequence.
inline const std::vector<ColocationGroup>& colocation_groups(const BlockGraph& g) {
  return g.groups;
}

}  // namespace dcp
