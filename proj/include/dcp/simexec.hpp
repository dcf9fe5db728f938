#pragma once

#include <cmath>

#include "dcp/plan.hpp"

namespace dcp {

struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> a;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

// Blockwise attention output plus the online-softmax statistics needed to
// merge partial results: per row the running max m and the sum l of
// exponentials relative to m.
struct PartialBlock {
  Matrix out;
  std::vector<double> m;
  std::vector<double> l;
};

// Numerically stable masked blockwise attention for one (Q tile, KV tile)
// pair. `rows[i]` holds the attended key ranges of q row i, relative to the
// kv tile. Rows with no attended keys produce a zero row with m = -inf, l = 0.
inline PartialBlock exec_attention(const Matrix& q, const Matrix& k, const Matrix& v,
                                   const std::vector<TokenRanges>& rows) {
  if (q.cols != k.cols || k.rows != v.rows || k.cols != v.cols)
    throw Error("exec_attention: inconsistent shapes");
  if (static_cast<int>(rows.size()) != q.rows)
    throw Error("exec_attention: one range row per q token required");
  const int D = q.cols;
  const double scale = 1.0 / std::sqrt(static_cast<double>(D));

  PartialBlock p;
  p.out = Matrix(q.rows, D);
  p.m.assign(static_cast<size_t>(q.rows), -std::numeric_limits<double>::infinity());
  p.l.assign(static_cast<size_t>(q.rows), 0.0);

  std::vector<double> scores(static_cast<size_t>(k.rows));
  for (int i = 0; i < q.rows; ++i) {
    const TokenRanges& rr = rows[static_cast<size_t>(i)];
    double m = -std::numeric_limits<double>::infinity();
    for (int ri = 0; ri < rr.count; ++ri) {
      for (TokenIndex j = rr.r[static_cast<size_t>(ri)].begin; j < rr.r[static_cast<size_t>(ri)].end; ++j) {
        if (j < 0 || j >= k.rows) throw Error("exec_attention: range outside kv tile");
        double s = 0;
        for (int d = 0; d < D; ++d) s += q.at(i, d) * k.at(static_cast<int>(j), d);
        s *= scale;
        scores[static_cast<size_t>(j)] = s;
        m = std::max(m, s);
      }
    }
    if (!std::isfinite(m)) continue;  // fully masked row
    double l = 0;
    for (int ri = 0; ri < rr.count; ++ri)
      for (TokenIndex j = rr.r[static_cast<size_t>(ri)].begin; j < rr.r[static_cast<size_t>(ri)].end; ++j)
        l += std::exp(scores[static_cast<size_t>(j)] - m);
    for (int ri = 0; ri < rr.count; ++ri) {
      for (TokenIndex j = rr.r[static_cast<size_t>(ri)].begin; j < rr.r[static_cast<size_t>(ri)].end; ++j) {
        const double w = std::exp(scores[static_cast<size_t>(j)] - m) / l;
        for (int d = 0; d < D; ++d) p.out.at(i, d) += w * v.at(static_cast<int>(j), d);
      }
    }
    p.m[static_cast<size_t>(i)] = m;
    p.l[static_cast<size_t>(i)] = l;
  }
  return p;
}

// Rescale-and-sum merge of partial attention outputs. Order independent up to
// floating-point rounding; rows where every partial is empty stay zero.
inline PartialBlock exec_reduction(const std::vector<const PartialBlock*>& parts) {
  if (parts.empty()) throw Error("exec_reduction: no partials");
  const int rows = parts[0]->out.rows;
  const int D = parts[0]->out.cols;
  for (const auto* p : parts)
    if (p->out.rows != rows || p->out.cols != D)
      throw Error("exec_reduction: partial shape mismatch");

  PartialBlock r;
  r.out = Matrix(rows, D);
  r.m.assign(static_cast<size_t>(rows), -std::numeric_limits<double>::infinity());
  r.l.assign(static_cast<size_t>(rows), 0.0);

  for (int i = 0; i < rows; ++i) {
    double mstar = -std::numeric_limits<double>::infinity();
    for (const auto* p : parts)
      if (p->l[static_cast<size_t>(i)] > 0) mstar = std::max(mstar, p->m[static_cast<size_t>(i)]);
    if (!std::isfinite(mstar)) continue;
    double lstar = 0;
    for (const auto* p : parts)
      if (p->l[static_cast<size_t>(i)] > 0)
        lstar += p->l[static_cast<size_t>(i)] * std::exp(p->m[static_cast<size_t>(i)] - mstar);
    for (const auto* p : parts) {
      if (p->l[static_cast<size_t>(i)] <= 0) continue;
      const double w = p->l[static_cast<size_t>(i)] * std::exp(p->m[static_cast<size_t>(i)] - mstar) / lstar;
      for (int d = 0; d < D; ++d) r.out.at(i, d) += w * p->out.at(i, d);
    }
    r.m[static_cast<size_t>(i)] = mstar;
    r.l[static_cast<size_t>(i)] = lstar;
  }
  return r;
}

// Random batch payload in double precision; deterministic in the seed and
// independent of any placement.
struct SeqPayload {
  std::vector<Matrix> q;  // per query head, L x D
  std::vector<Matrix> k;  // per kv group
  std::vector<Matrix> v;
};

struct BatchPayload {
  std::vector<SeqPayload> seqs;
};

inline BatchPayload make_payload(const Batch& batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  BatchPayload p;
  const int D = batch.head_dim;
  for (const auto& spec : batch.sequences) {
    SeqPayload sp;
    const int L = static_cast<int>(spec.length);
    auto fill = [&](std::vector<Matrix>& dst, int count) {
      for (int h = 0; h < count; ++h) {
        Matrix m(L, D);
        for (auto& x : m.a) x = dist(rng);
        dst.push_back(std::move(m));
      }
    };
    fill(sp.q, batch.heads);
    fill(sp.k, batch.kv_groups);
    fill(sp.v, batch.kv_groups);
    p.seqs.push_back(std::move(sp));
  }
  return p;
}

// Final attention outputs, per sequence per head.
struct BatchOutputs {
  std::vector<std::vector<Matrix>> o;  // [seq][head] L x D
};

struct SimReport {
  ByteCount total_bytes = 0;
  FlopCount total_flops = 0;
  // Stage-indexed tables; stage T is the output-transfer stage.
  std::vector<std::map<std::pair<int, int>, ByteCount>> comm_bytes;
  std::vector<std::vector<FlopCount>> comp_flops;
  std::vector<ByteCount> per_device_send;
  std::vector<ByteCount> per_device_recv;
  double makespan = 0;
};

struct SimOptions {
  bool numeric = true;  // false: cost accounting only
  CostParams cost{};
};

struct SimResult {
  SimReport report;
  BatchOutputs outputs;  // filled in numeric mode
};

namespace detail {

struct KvPayload {
  Matrix k, v;
};

struct SimDevice {
  const ExecutionPlan* plan = nullptr;
  size_t pc = 0;
  std::vector<Matrix> q_slots;
  std::vector<KvPayload> kv_slots;
  std::vector<PartialBlock> o_slots;
  std::map<std::string, std::vector<int>> recv_slots;  // posted receives
  bool done() const { return pc >= plan->instructions.size(); }
};

struct Message {
  int src = 0;
  int dst = 0;
  int division = 0;
  std::vector<int> blocks;
  std::vector<Matrix> q_payload;
  std::vector<KvPayload> kv_payload;
  std::vector<PartialBlock> o_payload;
  ByteCount bytes = 0;
};

}  // namespace detail

// Deterministic lockstep execution of per-device plans. Each device runs its
// instruction list in order; CommWait blocks until the tagged message has
// been deposited by the sender's CommLaunch. Reports byte/flop accounting and
// the modeled makespan; in numeric mode also the assembled attention outputs.
inline SimResult run(const std::vector<ExecutionPlan>& plans, const BlockGraph& g,
                     const BatchPayload& payload, const DeviceTopology& topo,
                     const SimOptions& options = {}) {
  const int R = static_cast<int>(plans.size());
  if (R != topo.device_count())
    throw Error("run: plan count does not match topology");
  const int D = g.batch.head_dim;
  const int T = plans.empty() ? 0 : plans[0].divisions;

  std::vector<detail::SimDevice> devices(static_cast<size_t>(R));
  for (int dev = 0; dev < R; ++dev) {
    auto& sd = devices[static_cast<size_t>(dev)];
    sd.plan = &plans[static_cast<size_t>(dev)];
    sd.q_slots.resize(static_cast<size_t>(sd.plan->buffers.capacity[0]));
    sd.kv_slots.resize(static_cast<size_t>(sd.plan->buffers.capacity[1]));
    sd.o_slots.resize(static_cast<size_t>(sd.plan->buffers.capacity[2]));
    if (options.numeric) {
      for (const auto& r : sd.plan->buffers.resident_q) {
        const auto& d = g.data_blocks[static_cast<size_t>(r.block)];
        Matrix m(static_cast<int>(d.tokens.size()), D);
        const Matrix& src = payload.seqs[static_cast<size_t>(d.seq)].q[static_cast<size_t>(d.head)];
        for (int i = 0; i < m.rows; ++i)
          for (int c = 0; c < D; ++c) m.at(i, c) = src.at(static_cast<int>(d.tokens.begin) + i, c);
        sd.q_slots[static_cast<size_t>(r.slot)] = std::move(m);
      }
      for (const auto& r : sd.plan->buffers.resident_kv) {
        const auto& d = g.data_blocks[static_cast<size_t>(r.block)];
        detail::KvPayload kv;
        kv.k = Matrix(static_cast<int>(d.tokens.size()), D);
        kv.v = Matrix(static_cast<int>(d.tokens.size()), D);
        const Matrix& ks = payload.seqs[static_cast<size_t>(d.seq)].k[static_cast<size_t>(d.head)];
        const Matrix& vs = payload.seqs[static_cast<size_t>(d.seq)].v[static_cast<size_t>(d.head)];
        for (int i = 0; i < kv.k.rows; ++i)
          for (int c = 0; c < D; ++c) {
            kv.k.at(i, c) = ks.at(static_cast<int>(d.tokens.begin) + i, c);
            kv.v.at(i, c) = vs.at(static_cast<int>(d.tokens.begin) + i, c);
          }
        sd.kv_slots[static_cast<size_t>(r.slot)] = std::move(kv);
      }
    }
  }

  std::map<std::string, detail::Message> inbox;
  SimReport report;
  report.comm_bytes.resize(static_cast<size_t>(T) + 1);
  report.comp_flops.assign(static_cast<size_t>(T) + 1,
                           std::vector<FlopCount>(static_cast<size_t>(R), 0));
  report.per_device_send.assign(static_cast<size_t>(R), 0);
  report.per_device_recv.assign(static_cast<size_t>(R), 0);

  // One step: execute instructions until done or blocked on a wait.
  auto step = [&](int dev) -> bool {
    auto& sd = devices[static_cast<size_t>(dev)];
    bool progressed = false;
    while (!sd.done()) {
      const Instruction& ins = sd.plan->instructions[sd.pc];
      if (const auto* w = std::get_if<CommWaitInstr>(&ins.op)) {
        auto it = inbox.find(w->tag);
        if (it == inbox.end()) return progressed;  // blocked
        detail::Message& msg = it->second;
        if (msg.dst != dev)
          throw TagMismatchError("message " + w->tag + " delivered to wrong device");
        // Deliver into the posted receive slots recorded at launch time.
        auto rs = sd.recv_slots.find(w->tag);
        if (rs == sd.recv_slots.end())
          throw TagMismatchError("device " + std::to_string(dev) + " waits on " +
                                 w->tag + " without a posted receive");
        const auto& slots = rs->second;
        if (options.numeric) {
          size_t qi = 0, kvi = 0, oi = 0;
          for (size_t b = 0; b < msg.blocks.size(); ++b) {
            const auto& dblk = g.data_blocks[static_cast<size_t>(msg.blocks[b])];
            const int slot = slots[b];
            if (dblk.kind == BlockKind::Q)
              sd.q_slots[static_cast<size_t>(slot)] = std::move(msg.q_payload[qi++]);
            else if (dblk.kind == BlockKind::KV)
              sd.kv_slots[static_cast<size_t>(slot)] = std::move(msg.kv_payload[kvi++]);
            else
              sd.o_slots[static_cast<size_t>(slot)] = std::move(msg.o_payload[oi++]);
          }
        }
        inbox.erase(it);
        sd.recv_slots.erase(w->tag);
        ++sd.pc;
        progressed = true;
        continue;
      }
      if (const auto* l = std::get_if<CommLaunchInstr>(&ins.op)) {
        if (l->send) {
          detail::Message msg;
          msg.src = dev;
          msg.dst = l->peer;
          msg.division = ins.division;
          for (const auto& tb : l->blocks) {
            const auto& dblk = g.data_blocks[static_cast<size_t>(tb.block)];
            msg.blocks.push_back(tb.block);
            msg.bytes += dblk.size_bytes;
            if (options.numeric) {
              if (dblk.kind == BlockKind::Q)
                msg.q_payload.push_back(sd.q_slots[static_cast<size_t>(tb.slot)]);
              else if (dblk.kind == BlockKind::KV)
                msg.kv_payload.push_back(sd.kv_slots[static_cast<size_t>(tb.slot)]);
              else
                msg.o_payload.push_back(sd.o_slots[static_cast<size_t>(tb.slot)]);
            }
          }
          report.total_bytes += msg.bytes;
          report.per_device_send[static_cast<size_t>(dev)] += msg.bytes;
          report.per_device_recv[static_cast<size_t>(msg.dst)] += msg.bytes;
          report.comm_bytes[static_cast<size_t>(ins.division)][{dev, msg.dst}] += msg.bytes;
          if (!inbox.emplace(l->tag, std::move(msg)).second)
            throw TagMismatchError("duplicate message tag " + l->tag);
        } else {
          std::vector<int> slots;
          for (const auto& tb : l->blocks) slots.push_back(tb.slot);
          sd.recv_slots[l->tag] = std::move(slots);
        }
        ++sd.pc;
        progressed = true;
        continue;
      }
      if (const auto* a = std::get_if<AttentionInstr>(&ins.op)) {
        for (const auto& item : a->items) {
          FlopCount pairs = 0;
          for (const auto& row : item.rows) pairs += static_cast<FlopCount>(row.total());
          report.comp_flops[static_cast<size_t>(ins.division)][static_cast<size_t>(dev)] +=
              4 * pairs * static_cast<FlopCount>(D);
          report.total_flops += 4 * pairs * static_cast<FlopCount>(D);
          if (options.numeric) {
            const auto& kv = sd.kv_slots[static_cast<size_t>(item.kv_slot)];
            sd.o_slots[static_cast<size_t>(item.out_slot)] =
                exec_attention(sd.q_slots[static_cast<size_t>(item.q_slot)], kv.k, kv.v, item.rows);
          }
        }
        ++sd.pc;
        progressed = true;
        continue;
      }
      if (const auto* r = std::get_if<ReductionInstr>(&ins.op)) {
        if (options.numeric) {
          std::vector<const PartialBlock*> parts;
          for (int ssrc : r->srcs) parts.push_back(&sd.o_slots[static_cast<size_t>(ssrc)]);
          sd.o_slots[static_cast<size_t>(r->dst)] = exec_reduction(parts);
        }
        ++sd.pc;
        progressed = true;
        continue;
      }
      if (const auto* c = std::get_if<CopyInstr>(&ins.op)) {
        if (options.numeric) {
          for (const auto& item : c->items) {
            PartialBlock final_block;
            final_block.out = sd.o_slots[static_cast<size_t>(item.src_slot)].out;
            final_block.m.assign(static_cast<size_t>(final_block.out.rows), 0.0);
            final_block.l.assign(static_cast<size_t>(final_block.out.rows), 0.0);
            sd.o_slots[static_cast<size_t>(item.dst_slot)] = std::move(final_block);
          }
        }
        ++sd.pc;
        progressed = true;
        continue;
      }
      throw Error("run: unknown instruction");
    }
    return progressed;
  };

  // Lockstep rounds: iterate until all devices finish or no one progresses.
  while (true) {
    bool all_done = true;
    bool any_progress = false;
    for (int dev = 0; dev < R; ++dev) {
      if (devices[static_cast<size_t>(dev)].done()) continue;
      all_done = false;
      if (step(dev)) any_progress = true;
    }
    if (all_done) break;
    if (!any_progress) {
      std::string detail = "deadlock: ";
      for (int dev = 0; dev < R; ++dev) {
        const auto& sd = devices[static_cast<size_t>(dev)];
        if (sd.done()) continue;
        const auto& ins = sd.plan->instructions[sd.pc];
        if (const auto* w = std::get_if<CommWaitInstr>(&ins.op))
          detail += "device " + std::to_string(dev) + " waits on " + w->tag + "; ";
      }
      throw DeadlockError(detail);
    }
  }
  if (!inbox.empty())
    throw TagMismatchError("messages left undelivered at termination");

  report.makespan =
      detail::cost_from_tables(report.comp_flops, report.comm_bytes, topo, options.cost)
          .makespan;

  SimResult result;
  result.report = std::move(report);
  if (options.numeric) {
    result.outputs.o.resize(g.batch.sequences.size());
    for (size_t s = 0; s < g.batch.sequences.size(); ++s) {
      result.outputs.o[s].assign(static_cast<size_t>(g.batch.heads),
                                 Matrix(static_cast<int>(g.batch.sequences[s].length), D));
    }
    for (int dev = 0; dev < R; ++dev) {
      const auto& sd = devices[static_cast<size_t>(dev)];
      for (const auto& r : sd.plan->buffers.resident_o) {
        const auto& dblk = g.data_blocks[static_cast<size_t>(r.block)];
        const Matrix& src = sd.o_slots[static_cast<size_t>(r.slot)].out;
        Matrix& dst = result.outputs.o[static_cast<size_t>(dblk.seq)][static_cast<size_t>(dblk.head)];
        for (int i = 0; i < src.rows; ++i)
          for (int c = 0; c < D; ++c) dst.at(static_cast<int>(dblk.tokens.begin) + i, c) = src.at(i, c);
      }
    }
  }
  return result;
}

inline double max_abs_error(const BatchOutputs& a, const BatchOutputs& b) {
  double err = 0;
  for (size_t s = 0; s < a.o.size(); ++s)
    for (size_t h = 0; h < a.o[s].size(); ++h)
      for (size_t i = 0; i < a.o[s][h].a.size(); ++i)
        err = std::max(err, std::abs(a.o[s][h].a[i] - b.o[s][h].a[i]));
  return err;
}

}  // namespace dcp
