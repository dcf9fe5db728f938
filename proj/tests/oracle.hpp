// Test-only reference implementations, kept independent of the library's
// range-based code paths: dense boolean masks built straight from each mask
// family's definition, dense masked attention, and the raw communication
// volume double sum.
#pragma once

#include <cmath>
#include <vector>

#include "dcp/blocks.hpp"
#include "dcp/placement.hpp"
#include "dcp/simexec.hpp"

namespace oracle {

using dcp::Batch;
using dcp::BlockGraph;
using dcp::MaskDescriptor;
using dcp::MaskKind;
using dcp::SequenceSpec;
using dcp::TokenIndex;

using DenseMask = std::vector<std::vector<bool>>;  // [i][j]

inline DenseMask dense_mask(const SequenceSpec& spec) {
  const TokenIndex L = spec.length;
  const MaskDescriptor& m = spec.mask;
  DenseMask mask(static_cast<size_t>(L), std::vector<bool>(static_cast<size_t>(L), false));
  switch (m.kind) {
    case MaskKind::Causal:
      for (TokenIndex i = 0; i < L; ++i)
        for (TokenIndex j = 0; j <= i; ++j) mask[i][j] = true;
      break;
    case MaskKind::Lambda:
      for (TokenIndex i = 0; i < L; ++i)
        for (TokenIndex j = 0; j <= i; ++j)
          mask[i][j] = j < m.sink_tokens || j > i - m.window;
      break;
    case MaskKind::CausalBlockwise: {
      const TokenIndex nb = (L + m.block - 1) / m.block;
      for (TokenIndex i = 0; i < L; ++i) {
        const TokenIndex bi = i / m.block;
        const bool test = bi >= nb - m.test_blocks;
        for (TokenIndex j = 0; j <= i; ++j) {
          const TokenIndex bj = j / m.block;
          mask[i][j] = test || bj < m.sink_blocks || bj > bi - m.window_blocks;
        }
      }
      break;
    }
    case MaskKind::SharedQuestion: {
      std::vector<int> seg(static_cast<size_t>(L), -1);
      TokenIndex pos = m.question_len;
      for (size_t a = 0; a < m.answer_lens.size(); ++a) {
        for (TokenIndex i = pos; i < pos + m.answer_lens[a]; ++i) seg[static_cast<size_t>(i)] = static_cast<int>(a);
        pos += m.answer_lens[a];
      }
      for (TokenIndex i = 0; i < L; ++i)
        for (TokenIndex j = 0; j <= i; ++j) {
          if (i < m.question_len)
            mask[i][j] = true;
          else
            mask[i][j] = j < m.question_len || seg[static_cast<size_t>(j)] == seg[static_cast<size_t>(i)];
        }
      break;
    }
  }
  return mask;
}

inline std::uint64_t popcount(const DenseMask& m) {
  std::uint64_t n = 0;
  for (const auto& row : m)
    for (bool b : row) n += b ? 1 : 0;
  return n;
}

// Dense masked attention in double precision: the ground truth against which
// every simulated plan output is compared.
inline dcp::BatchOutputs dense_attention(const Batch& batch,
                                         const dcp::BatchPayload& payload) {
  dcp::BatchOutputs out;
  const int D = batch.head_dim;
  out.o.resize(batch.sequences.size());
  for (size_t s = 0; s < batch.sequences.size(); ++s) {
    const auto& spec = batch.sequences[s];
    const DenseMask mask = dense_mask(spec);
    const int L = static_cast<int>(spec.length);
    out.o[s].assign(static_cast<size_t>(batch.heads), dcp::Matrix(L, D));
    for (int h = 0; h < batch.heads; ++h) {
      const int grp = batch.kv_group_of_head(h);
      const dcp::Matrix& q = payload.seqs[s].q[static_cast<size_t>(h)];
      const dcp::Matrix& k = payload.seqs[s].k[static_cast<size_t>(grp)];
      const dcp::Matrix& v = payload.seqs[s].v[static_cast<size_t>(grp)];
      dcp::Matrix& o = out.o[s][static_cast<size_t>(h)];
      const double scale = 1.0 / std::sqrt(static_cast<double>(D));
      std::vector<double> scores(static_cast<size_t>(L));
      for (int i = 0; i < L; ++i) {
        double m = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < L; ++j) {
          if (!mask[static_cast<size_t>(i)][static_cast<size_t>(j)]) continue;
          double sdot = 0;
          for (int d = 0; d < D; ++d) sdot += q.at(i, d) * k.at(j, d);
          scores[static_cast<size_t>(j)] = sdot * scale;
          m = std::max(m, scores[static_cast<size_t>(j)]);
        }
        if (!std::isfinite(m)) continue;
        double l = 0;
        for (int j = 0; j < L; ++j)
          if (mask[static_cast<size_t>(i)][static_cast<size_t>(j)]) l += std::exp(scores[static_cast<size_t>(j)] - m);
        for (int j = 0; j < L; ++j) {
          if (!mask[static_cast<size_t>(i)][static_cast<size_t>(j)]) continue;
          const double w = std::exp(scores[static_cast<size_t>(j)] - m) / l;
          for (int d = 0; d < D; ++d) o.at(i, d) += w * v.at(j, d);
        }
      }
    }
  }
  return out;
}

// Raw communication-volume double sum: for every computation block, each
// remote input and output reference counts its full block size. No dedup.
inline dcp::ByteCount comm_formula(const BlockGraph& g, const dcp::PlacementResult& pl) {
  dcp::ByteCount total = 0;
  for (const auto& c : g.comp_blocks) {
    const int dev = pl.comp_block_device[static_cast<size_t>(c.id)];
    for (int b : {c.q_block, c.kv_block, c.o_block}) {
      if (pl.data_block_device[static_cast<size_t>(b)] != dev)
        total += g.data_blocks[static_cast<size_t>(b)].size_bytes;
    }
  }
  return total;
}

// Deduplicated transfer bytes computed straight from the block graph, without
// building a hypergraph: every data block moves once per foreign device that
// touches it.
inline dcp::ByteCount dedup_comm(const BlockGraph& g, const dcp::PlacementResult& pl) {
  dcp::ByteCount total = 0;
  for (const auto& d : g.data_blocks) {
    std::vector<char> touched(static_cast<size_t>(pl.device_count()), 0);
    for (const auto& c : g.comp_blocks) {
      if (c.q_block == d.id || c.kv_block == d.id || c.o_block == d.id)
        touched[static_cast<size_t>(pl.comp_block_device[static_cast<size_t>(c.id)])] = 1;
    }
    const int home = pl.data_block_device[static_cast<size_t>(d.id)];
    for (int dev = 0; dev < pl.device_count(); ++dev)
      if (dev != home && touched[static_cast<size_t>(dev)]) total += d.size_bytes;
  }
  return total;
}

// Spearman rank correlation (average ranks for ties).
inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  auto ranks = [&](const std::vector<double>& v) {
    std::vector<size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](size_t a, size_t b) { return v[a] < v[b]; });
    std::vector<double> r(v.size());
    size_t i = 0;
    while (i < idx.size()) {
      size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
      for (size_t k = i; k <= j; ++k) r[idx[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto rx = ranks(x);
  const auto ry = ranks(y);
  double mx = 0, my = 0;
  for (size_t i = 0; i < n; ++i) {
    mx += rx[i];
    my += ry[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double cov = 0, vx = 0, vy = 0;
  for (size_t i = 0; i < n; ++i) {
    cov += (rx[i] - mx) * (ry[i] - my);
    vx += (rx[i] - mx) * (rx[i] - mx);
    vy += (ry[i] - my) * (ry[i] - my);
  }
  if (vx == 0 || vy == 0) return 0;
  return cov / std::sqrt(vx * vy);
}

}  // namespace oracle
