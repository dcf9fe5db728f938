#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcp {

using TokenIndex = std::int64_t;
using ByteCount = std::uint64_t;
using FlopCount = std::uint64_t;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when no device assignment can satisfy the balance caps.
struct InfeasibleError : Error {
  using Error::Error;
};

// Thrown by the exhaustive partitioner above its vertex-count cap.
struct TooLargeError : Error {
  using Error::Error;
};

struct DeadlockError : Error {
  using Error::Error;
};

struct TagMismatchError : Error {
  using Error::Error;
};

struct BufferOverflowError : Error {
  using Error::Error;
};

struct OversizedSequenceError : Error {
  using Error::Error;
};

struct DeviceTopology {
  int machines = 1;             // X
  int devices_per_machine = 1;  // Y
  double intra_bw = 600e9;      // bytes/sec within a machine
  double inter_bw = 50e9;       // bytes/sec across machines (4x100Gbps)
  double latency_intra = 5e-6;  // seconds
  double latency_inter = 20e-6;

  int device_count() const { return machines * devices_per_machine; }
  int machine_of(int device) const { return device / devices_per_machine; }

  void validate() const {
    if (machines < 1 || devices_per_machine < 1)
      throw Error("topology: machines and devices_per_machine must be >= 1");
    if (intra_bw <= 0 || inter_bw <= 0)
      throw Error("topology: bandwidths must be positive");
  }
};

enum class MaskKind { Causal, Lambda, CausalBlockwise, SharedQuestion };

inline const char* to_string(MaskKind k) {
  switch (k) {
    case MaskKind::Causal: return "causal";
    case MaskKind::Lambda: return "lambda";
    case MaskKind::CausalBlockwise: return "causal_blockwise";
    case MaskKind::SharedQuestion: return "shared_question";
  }
  return "?";
}

inline MaskKind mask_kind_from_string(const std::string& s) {
  if (s == "causal") return MaskKind::Causal;
  if (s == "lambda") return MaskKind::Lambda;
  if (s == "causal_blockwise") return MaskKind::CausalBlockwise;
  if (s == "shared_question") return MaskKind::SharedQuestion;
  throw Error("unknown mask kind: " + s);
}

struct MaskDescriptor {
  MaskKind kind = MaskKind::Causal;

  // lambda: sink prefix + sliding window (window counts the token itself)
  TokenIndex sink_tokens = 0;
  TokenIndex window = 0;

  // causal blockwise: sink/window/test expressed in blocks of `block` tokens
  TokenIndex block = 0;
  int window_blocks = 0;
  int sink_blocks = 0;
  int test_blocks = 0;

  // shared question: one question prefix, then contiguous answers
  TokenIndex question_len = 0;
  std::vector<TokenIndex> answer_lens;

  static MaskDescriptor causal() { return {}; }

  static MaskDescriptor lambda(TokenIndex sink, TokenIndex window) {
    MaskDescriptor m;
    m.kind = MaskKind::Lambda;
    m.sink_tokens = sink;
    m.window = window;
    return m;
  }

  static MaskDescriptor causal_blockwise(TokenIndex block, int window_blocks,
                                         int sink_blocks, int test_blocks) {
    MaskDescriptor m;
    m.kind = MaskKind::CausalBlockwise;
    m.block = block;
    m.window_blocks = window_blocks;
    m.sink_blocks = sink_blocks;
    m.test_blocks = test_blocks;
    return m;
  }

  static MaskDescriptor shared_question(TokenIndex question_len,
                                        std::vector<TokenIndex> answer_lens) {
    MaskDescriptor m;
    m.kind = MaskKind::SharedQuestion;
    m.question_len = question_len;
    m.answer_lens = std::move(answer_lens);
    return m;
  }

  void validate(TokenIndex length) const {
    if (length < 1) throw Error("mask: sequence length must be >= 1");
    switch (kind) {
      case MaskKind::Causal:
        break;
      case MaskKind::Lambda:
        if (sink_tokens < 0) throw Error("lambda: sink_tokens must be >= 0");
        if (window < 1) throw Error("lambda: window must be >= 1");
        break;
      case MaskKind::CausalBlockwise:
        if (block < 1) throw Error("causal_blockwise: block must be >= 1");
        if (window_blocks < 1)
          throw Error("causal_blockwise: window_blocks must be >= 1");
        if (sink_blocks < 0 || test_blocks < 0)
          throw Error("causal_blockwise: sink/test blocks must be >= 0");
        break;
      case MaskKind::SharedQuestion: {
        if (question_len < 0)
          throw Error("shared_question: question_len must be >= 0");
        TokenIndex sum = question_len;
        for (TokenIndex a : answer_lens) {
          if (a < 1) throw Error("shared_question: answer lengths must be >= 1");
          sum += a;
        }
        if (sum != length)
          throw Error("shared_question: question + answers must cover the sequence");
        break;
      }
    }
  }
};

struct SequenceSpec {
  std::string seq_id;
  TokenIndex length = 0;
  MaskDescriptor mask;

  void validate() const {
    if (length < 1) throw Error("sequence " + seq_id + ": length must be >= 1");
    mask.validate(length);
  }
};

struct Range {
  TokenIndex begin = 0;
  TokenIndex end = 0;

  bool empty() const { return end <= begin; }
  TokenIndex size() const { return empty() ? 0 : end - begin; }
  bool operator==(const Range&) const = default;
};

// Intersection of two half-open ranges.
inline Range intersect(Range a, Range b) {
  Range r{std::max(a.begin, b.begin), std::min(a.end, b.end)};
  if (r.empty()) return {0, 0};
  return r;
}

// Attend set of one token: at most two disjoint, sorted half-open ranges.
struct TokenRanges {
  std::array<Range, 2> r{};
  int count = 0;

  // Appends a range, merging with the previous one when they touch or overlap.
  void push(Range range) {
    if (range.empty()) return;
    if (count > 0 && range.begin <= r[count - 1].end) {
      if (range.begin < r[count - 1].begin)
        throw Error("token ranges must be pushed in sorted order");
      r[count - 1].end = std::max(r[count - 1].end, range.end);
      return;
    }
    if (count == 2) throw Error("mask produces more than two ranges for a token");
    r[count++] = range;
  }

  TokenIndex total() const {
    TokenIndex t = 0;
    for (int i = 0; i < count; ++i) t += r[i].size();
    return t;
  }

  // Number of attended keys within [begin, end).
  TokenIndex overlap(Range window) const {
    TokenIndex t = 0;
    for (int i = 0; i < count; ++i) t += intersect(r[i], window).size();
    return t;
  }

  bool operator==(const TokenRanges& o) const {
    if (count != o.count) return false;
    for (int i = 0; i < count; ++i)
      if (!(r[i] == o.r[i])) return false;
    return true;
  }
};

// Per-token attend ranges for one sequence.
struct AttendRanges {
  TokenIndex length = 0;
  std::vector<TokenRanges> rows;

  const TokenRanges& row(TokenIndex i) const { return rows[static_cast<size_t>(i)]; }

  TokenIndex total_pairs() const {
    TokenIndex t = 0;
    for (const auto& row : rows) t += row.total();
    return t;
  }
};

struct Batch {
  std::vector<SequenceSpec> sequences;
  TokenIndex token_budget = 0;
  int heads = 1;      // H (query heads)
  int kv_groups = 1;  // G
  int head_dim = 64;  // D
  int bytes_per_element = 2;

  TokenIndex total_tokens() const {
    TokenIndex t = 0;
    for (const auto& s : sequences) t += s.length;
    return t;
  }

  int kv_group_of_head(int head) const {
    return static_cast<int>(static_cast<long long>(head) * kv_groups / heads);
  }

  void validate() const {
    if (heads < 1 || kv_groups < 1 || head_dim < 1)
      throw Error("batch: heads, kv_groups, head_dim must be >= 1");
    if (heads % kv_groups != 0)
      throw Error("batch: heads must be divisible by kv_groups");
    if (bytes_per_element < 1)
      throw Error("batch: bytes_per_element must be >= 1");
    for (const auto& s : sequences) s.validate();
    if (token_budget > 0 && total_tokens() > token_budget)
      throw Error("batch: total tokens exceed token budget");
  }
};

}  // namespace dcp
