#pragma once

#include <random>

#include "dcp/types.hpp"

namespace dcp {

enum class LengthDist { LongAlign, LongDataCollections };

inline LengthDist length_dist_from_string(const std::string& s) {
  if (s == "longalign") return LengthDist::LongAlign;
  if (s == "ldc") return LengthDist::LongDataCollections;
  throw Error("unknown length distribution: " + s);
}

struct SynthConfig {
  LengthDist dist = LengthDist::LongAlign;
  double scale = 1.0;  // sequence-length scaling factor
  TokenIndex max_len = 131072;
  TokenIndex min_len = 16;
  MaskKind mask = MaskKind::Causal;
  // lambda defaults
  TokenIndex sink_tokens = 64;
  TokenIndex window = 4096;
  // causal blockwise defaults
  TokenIndex cb_block = 256;
  int cb_window_blocks = 2;
  int cb_sink_blocks = 1;
  int cb_test_blocks = 1;
  // shared question: answers at this fraction of the sequence each
  int sq_answers = 4;
  double sq_answer_frac = 0.2;
};

// Skewed long-tailed sequence lengths: log-normal body, with an extra heavy
// tail for the LongDataCollections-like shape.
inline TokenIndex sample_length(LengthDist dist, std::mt19937_64& rng) {
  double mu, sigma;
  double tail_prob = 0.0, tail_mult = 1.0;
  if (dist == LengthDist::LongAlign) {
    mu = 9.2;
    sigma = 1.1;
  } else {
    mu = 8.0;
    sigma = 1.5;
    tail_prob = 0.08;
    tail_mult = 8.0;
  }
  std::lognormal_distribution<double> body(mu, sigma);
  double len = body(rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < tail_prob) len *= tail_mult;
  return static_cast<TokenIndex>(len);
}

inline MaskDescriptor make_mask(const SynthConfig& cfg, TokenIndex length) {
  switch (cfg.mask) {
    case MaskKind::Causal:
      return MaskDescriptor::causal();
    case MaskKind::Lambda:
      return MaskDescriptor::lambda(cfg.sink_tokens, cfg.window);
    case MaskKind::CausalBlockwise:
      return MaskDescriptor::causal_blockwise(cfg.cb_block, cfg.cb_window_blocks,
                                              cfg.cb_sink_blocks, cfg.cb_test_blocks);
    case MaskKind::SharedQuestion: {
      TokenIndex answer = std::max<TokenIndex>(
          1, static_cast<TokenIndex>(static_cast<double>(length) * cfg.sq_answer_frac));
      int n = cfg.sq_answers;
      while (n > 1 && length - static_cast<TokenIndex>(n) * answer < 1) --n;
      if (length - static_cast<TokenIndex>(n) * answer < 1) {
        n = 1;
        answer = length - 1;
      }
      if (answer < 1) return MaskDescriptor::causal();  // too short to split
      return MaskDescriptor::shared_question(
          length - static_cast<TokenIndex>(n) * answer,
          std::vector<TokenIndex>(static_cast<size_t>(n), answer));
    }
  }
  return MaskDescriptor::causal();
}

inline std::vector<SequenceSpec> synth_sequences(const SynthConfig& cfg, int count,
                                                 std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<SequenceSpec> out;
  out.reserve(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    TokenIndex len = static_cast<TokenIndex>(
        static_cast<double>(sample_length(cfg.dist, rng)) * cfg.scale);
    len = std::clamp(len, cfg.min_len, cfg.max_len);
    SequenceSpec s;
    s.seq_id = "seq" + std::to_string(i);
    s.length = len;
    s.mask = make_mask(cfg, len);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace dcp
