#pragma once

#include "dcp/types.hpp"

namespace dcp {

// Generates the per-token attend ranges for one sequence. Every mask family
// yields at most two disjoint sorted ranges per token, and no token attends a
// later token. Windows and sinks are clamped to the causal frontier i+1.
inline AttendRanges gen_mask(const SequenceSpec& spec) {
  spec.validate();
  const TokenIndex L = spec.length;
  const MaskDescriptor& m = spec.mask;

  AttendRanges out;
  out.length = L;
  out.rows.resize(static_cast<size_t>(L));

  switch (m.kind) {
    case MaskKind::Causal: {
      for (TokenIndex i = 0; i < L; ++i) out.rows[i].push({0, i + 1});
      break;
    }
    case MaskKind::Lambda: {
      for (TokenIndex i = 0; i < L; ++i) {
        TokenRanges& row = out.rows[i];
        row.push({0, std::min(m.sink_tokens, i + 1)});
        row.push({std::max<TokenIndex>(0, i - m.window + 1), i + 1});
      }
      break;
    }
    case MaskKind::CausalBlockwise: {
      const TokenIndex nblocks = (L + m.block - 1) / m.block;
      const TokenIndex test_start_block =
          std::max<TokenIndex>(0, nblocks - m.test_blocks);
      const TokenIndex sink_end = std::min(m.sink_blocks * m.block, L);
      for (TokenIndex i = 0; i < L; ++i) {
        TokenRanges& row = out.rows[i];
        const TokenIndex bi = i / m.block;
        if (bi >= test_start_block) {
          row.push({0, i + 1});
          continue;
        }
        row.push({0, std::min(sink_end, i + 1)});
        const TokenIndex win_start =
            std::max<TokenIndex>(0, (bi - m.window_blocks + 1) * m.block);
        row.push({win_start, i + 1});
      }
      break;
    }
    case MaskKind::SharedQuestion: {
      for (TokenIndex i = 0; i < m.question_len; ++i)
        out.rows[i].push({0, i + 1});
      TokenIndex seg_start = m.question_len;
      for (TokenIndex alen : m.answer_lens) {
        for (TokenIndex i = seg_start; i < seg_start + alen; ++i) {
          TokenRanges& row = out.rows[i];
          row.push({0, m.question_len});
          row.push({seg_start, i + 1});
        }
        seg_start += alen;
      }
      break;
    }
  }
  return out;
}

// Attended (i, j) pairs of a causal mask over `length` tokens.
inline FlopCount causal_pairs(TokenIndex length) {
  return static_cast<FlopCount>(length) * static_cast<FlopCount>(length + 1) / 2;
}

// Masked FLOPs divided by causal FLOPs for the same lengths. Head count and
// head dimension multiply both sides equally, so the ratio reduces to
// attended-pair counts.
inline double mask_sparsity(const Batch& batch) {
  batch.validate();
  long double masked = 0;
  long double causal = 0;
  const long double per_pair =
      4.0L * batch.heads * batch.head_dim;  // two matmuls, multiply+add
  for (const auto& seq : batch.sequences) {
    masked += per_pair * gen_mask(seq).total_pairs();
    causal += per_pair * causal_pairs(seq.length);
  }
  if (causal == 0) return 1.0;
  return static_cast<double>(masked / causal);
}

}  // namespace dcp
