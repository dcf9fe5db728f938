#include <catch2/catch_amalgamated.hpp>

#include "dcp/blocks.hpp"
#include "fixtures.hpp"
#include "oracle.hpp"

using namespace dcp;

TEST_CASE("causal sequence produces lower-triangular comp blocks") {
  Batch b = fixtures::single_seq_batch(4, MaskDescriptor::causal());
  BlockGraph g = generate_blocks(b, 2);
  int q = 0, kv = 0, o = 0;
  for (const auto& d : g.data_blocks) {
    if (d.kind == BlockKind::Q) ++q;
    if (d.kind == BlockKind::KV) ++kv;
    if (d.kind == BlockKind::O) ++o;
  }
  CHECK(q == 2);
  CHECK(kv == 2);
  CHECK(o == 2);
  REQUIRE(g.comp_blocks.size() == 3);  // (0,0) (1,0) (1,1)
  CHECK(g.comp_blocks[0].attended_pairs == 3);
  CHECK(g.comp_blocks[1].attended_pairs == 4);
  CHECK(g.comp_blocks[2].attended_pairs == 3);
  for (const auto& c : g.comp_blocks)
    CHECK(c.flops_weight == 4 * c.attended_pairs * static_cast<FlopCount>(b.head_dim));
}

TEST_CASE("fully masked tiles are not constructed") {
  // Answer-1 queries never attend answer-2 keys in the shared-question mask.
  BlockGraph g = fixtures::fig9_graph();
  REQUIRE(g.comp_blocks.size() == 5);
  for (const auto& c : g.comp_blocks) CHECK(c.attended_pairs > 0);
  std::vector<std::pair<int, int>> tiles;
  for (const auto& c : g.comp_blocks) tiles.push_back({c.q_tile, c.kv_tile});
  CHECK(tiles == std::vector<std::pair<int, int>>{{0, 0}, {1, 0}, {1, 1}, {2, 0}, {2, 2}});
}

TEST_CASE("block sizes carry the kv factor and bytes per element") {
  Batch b = fixtures::single_seq_batch(6, MaskDescriptor::causal(), 2, 1, 16);
  b.bytes_per_element = 2;
  BlockGraph g = generate_blocks(b, 4);
  for (const auto& d : g.data_blocks) {
    const ByteCount tokens = static_cast<ByteCount>(d.tokens.size());
    const ByteCount expect = tokens * 16 * 2 * (d.kind == BlockKind::KV ? 2 : 1);
    CHECK(d.size_bytes == expect);
  }
  // Terminal tile holds the remainder.
  CHECK(g.tile_range(0, 1).size() == 2);
}

TEST_CASE("gqa maps heads onto kv groups") {
  Batch b = fixtures::single_seq_batch(8, MaskDescriptor::causal(), 8, 2, 4);
  CHECK(b.kv_group_of_head(0) == 0);
  CHECK(b.kv_group_of_head(3) == 0);
  CHECK(b.kv_group_of_head(4) == 1);
  CHECK(b.kv_group_of_head(7) == 1);
  BlockGraph g = generate_blocks(b, 4);
  for (const auto& c : g.comp_blocks) {
    const auto& kv = g.data_blocks[static_cast<size_t>(c.kv_block)];
    CHECK(kv.head == b.kv_group_of_head(c.head));
    const auto& q = g.data_blocks[static_cast<size_t>(c.q_block)];
    const auto& o = g.data_blocks[static_cast<size_t>(c.o_block)];
    CHECK(q.head == c.head);
    CHECK(o.head == c.head);
    CHECK(q.tokens.begin == o.tokens.begin);
  }
}

TEST_CASE("colocation groups bind q kv o across heads") {
  Batch b = fixtures::single_seq_batch(4, MaskDescriptor::causal(), 2, 1, 4);
  BlockGraph g = generate_blocks(b, 2);
  REQUIRE(g.groups.size() == 2);
  for (const auto& grp : colocation_groups(g)) {
    int q = 0, kv = 0, o = 0;
    for (int id : grp.block_ids) {
      const auto& d = g.data_blocks[static_cast<size_t>(id)];
      CHECK(d.tokens.begin == grp.tokens.begin);
      if (d.kind == BlockKind::Q) ++q;
      if (d.kind == BlockKind::KV) ++kv;
      if (d.kind == BlockKind::O) ++o;
    }
    CHECK(q == 2);
    CHECK(kv == 1);
    CHECK(o == 2);
  }
}

TEST_CASE("single-block sequence forms one group holding every block") {
  Batch b = fixtures::single_seq_batch(5, MaskDescriptor::causal(), 2, 2, 4);
  BlockGraph g = generate_blocks(b, 8);
  REQUIRE(g.groups.size() == 1);
  CHECK(g.groups[0].block_ids.size() == g.data_blocks.size());
  CHECK(g.comp_blocks.size() == 2);  // one per head
}

TEST_CASE("fig 8 fixture has three groups") {
  CHECK(fixtures::fig9_graph().groups.size() == 3);
}

TEST_CASE("attended pairs sum to the dense mask popcount") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 40; ++rep) {
    Batch b = fixtures::random_batch(rng, 96, 3, 2, 4);
    const TokenIndex bs = 1 + static_cast<TokenIndex>(rng() % 16);
    BlockGraph g = generate_blocks(b, bs);
    std::map<int, std::uint64_t> per_seq_pairs;
    for (const auto& c : g.comp_blocks)
      if (c.head == 0) per_seq_pairs[c.seq] += c.attended_pairs;
    for (size_t s = 0; s < b.sequences.size(); ++s)
      CHECK(per_seq_pairs[static_cast<int>(s)] == oracle::popcount(oracle::dense_mask(b.sequences[s])));
  }
}

TEST_CASE("one long sequence matches the popcount oracle at larger scale") {
  Batch b = fixtures::single_seq_batch(512, MaskDescriptor::lambda(64, 100), 1, 1, 4);
  BlockGraph g = generate_blocks(b, 64);
  std::uint64_t pairs = 0;
  for (const auto& c : g.comp_blocks) pairs += c.attended_pairs;
  CHECK(pairs == oracle::popcount(oracle::dense_mask(b.sequences[0])));
}

TEST_CASE("tiles partition the sequence exactly") {
  std::mt19937_64 rng(37);
  for (int rep = 0; rep < 30; ++rep) {
    Batch b = fixtures::random_batch(rng, 70, 2, 1, 4);
    const TokenIndex bs = 1 + static_cast<TokenIndex>(rng() % 9);
    BlockGraph g = generate_blocks(b, bs);
    for (int s = 0; s < static_cast<int>(b.sequences.size()); ++s) {
      TokenIndex covered = 0;
      const int T = g.tiles_of_seq(s);
      for (int t = 0; t < T; ++t) {
        const Range r = g.tile_range(s, t);
        CHECK(r.begin == covered);
        covered = r.end;
        if (t + 1 < T) CHECK(r.size() == bs);  // non-terminal tiles are full
      }
      CHECK(covered == b.sequences[static_cast<size_t>(s)].length);
    }
  }
}

TEST_CASE("causal comp block count is triangular in the tile count") {
  for (TokenIndex L : {5, 8, 16, 33}) {
    for (TokenIndex bs : {1, 2, 4}) {
      Batch b = fixtures::single_seq_batch(L, MaskDescriptor::causal(), 2, 1, 4);
      BlockGraph g = generate_blocks(b, bs);
      const std::int64_t T = (L + bs - 1) / bs;
      CHECK(static_cast<std::int64_t>(g.comp_blocks.size()) == 2 * T * (T + 1) / 2);
    }
  }
}

TEST_CASE("block graph ids are stable and dense") {
  BlockGraph g = fixtures::fig9_graph();
  for (size_t i = 0; i < g.data_blocks.size(); ++i)
    CHECK(g.data_blocks[i].id == static_cast<int>(i));
  for (size_t i = 0; i < g.comp_blocks.size(); ++i)
    CHECK(g.comp_blocks[i].id == static_cast<int>(i));
}
