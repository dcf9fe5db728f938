#pragma once

#include <map>
#include <set>
#include <variant>

#include "dcp/schedule.hpp"

namespace dcp {

// First-fit slot allocator for one block buffer: freed indices are reused
// smallest-first; capacity is the high-water mark.
class BufferAllocator {
 public:
  int allocate() {
    if (!free_.empty()) {
      const int slot = *free_.begin();
      free_.erase(free_.begin());
      return slot;
    }
    return next_++;
  }

  void release(int slot) {
    if (slot < 0 || slot >= next_ || free_.count(slot))
      throw Error("buffer allocator: invalid release of slot " + std::to_string(slot));
    free_.insert(slot);
  }

  int capacity() const { return next_; }

 private:
  std::set<int> free_;
  int next_ = 0;
};

struct AttentionItem {
  int comp_id = 0;
  int q_slot = 0;
  int kv_slot = 0;
  int out_slot = 0;  // O-kind scratch slot receiving (out, m, l)
  int seq = 0;
  int head = 0;
  Range q_tokens;
  Range kv_tokens;
  // Per q-token attend ranges, relative to kv_tokens.begin.
  std::vector<TokenRanges> rows;
};

struct AttentionInstr {
  std::vector<AttentionItem> items;
};

struct ReductionInstr {
  int dst = 0;
  std::vector<int> srcs;  // may include dst; merged value overwrites dst
};

struct CopyItem {
  int src_slot = 0;
  int dst_slot = 0;
};

struct CopyInstr {
  std::vector<CopyItem> items;  // O-kind slots
};

struct TransferBlock {
  int block = 0;  // data block id
  int slot = 0;   // sender: source slot; receiver: destination slot
};

struct CommLaunchInstr {
  bool send = false;
  int peer = 0;
  std::vector<TransferBlock> blocks;
  std::string tag;
};

struct CommWaitInstr {
  std::string tag;
};

struct Instruction {
  int division = 0;  // division the cost is charged to
  std::variant<AttentionInstr, ReductionInstr, CopyInstr, CommLaunchInstr, CommWaitInstr> op;
};

struct ResidentBlock {
  int block = 0;
  int slot = 0;
};

struct BufferLayout {
  std::array<int, 3> capacity{0, 0, 0};  // indexed by BlockKind
  std::vector<ResidentBlock> resident_q;
  std::vector<ResidentBlock> resident_kv;
  std::vector<ResidentBlock> resident_o;  // final output slots
};

struct ExecutionPlan {
  int version = 1;
  int device = 0;
  int divisions = 0;
  BufferLayout buffers;
  std::vector<Instruction> instructions;
};

struct CompileOptions {
  // 0 means unlimited; otherwise compilation fails if any buffer needs more.
  int max_slots_per_kind = 0;
};

namespace detail {

inline std::string comm_tag(int division, int src, int dst) {
  return "d" + std::to_string(division) + ":" + std::to_string(src) + ">" +
         std::to_string(dst);
}

inline int kind_index(BlockKind k) { return static_cast<int>(k); }

}  // namespace detail

// Compiles a division schedule into per-device instruction lists over block
// buffers. Per division t: launches for division t+1's fetches, blockwise
// attention for t, reductions of t's partials, waits for t+1's arrivals.
// After the last division: output partial transfers, final reductions, and
// copies into the final output slots.
inline std::vector<ExecutionPlan> compile_plans(const DivisionSchedule& s,
                                                const BlockGraph& g,
                                                const PlacementResult& pl,
                                                const CompileOptions& options = {}) {
  const int R = s.devices;
  const int T = s.divisions;

  std::vector<ExecutionPlan> plans(static_cast<size_t>(R));
  std::vector<std::array<BufferAllocator, 3>> alloc(static_cast<size_t>(R));
  // (device, block) -> current slot, for blocks resident or fetched.
  std::vector<std::map<int, int>> slot_of(static_cast<size_t>(R));
  // (device, o block) -> accumulator slot holding the merged local partial.
  std::vector<std::map<int, int>> acc_of(static_cast<size_t>(R));

  // Residents: every local data block gets a permanent slot, in block order.
  for (int dev = 0; dev < R; ++dev) {
    plans[static_cast<size_t>(dev)].device = dev;
    plans[static_cast<size_t>(dev)].divisions = T;
    for (const auto& d : g.data_blocks) {
      if (pl.data_block_device[static_cast<size_t>(d.id)] != dev) continue;
      const int k = detail::kind_index(d.kind);
      const int slot = alloc[static_cast<size_t>(dev)][static_cast<size_t>(k)].allocate();
      slot_of[static_cast<size_t>(dev)][d.id] = slot;
      auto& layout = plans[static_cast<size_t>(dev)].buffers;
      if (d.kind == BlockKind::Q) layout.resident_q.push_back({d.id, slot});
      else if (d.kind == BlockKind::KV) layout.resident_kv.push_back({d.id, slot});
      else layout.resident_o.push_back({d.id, slot});
    }
  }

  // Last division in which a fetched block is consumed on a device.
  std::vector<std::map<int, int>> last_use(static_cast<size_t>(R));
  for (int t = 0; t < T; ++t)
    for (int dev = 0; dev < R; ++dev)
      for (int c_id : s.div[static_cast<size_t>(t)][static_cast<size_t>(dev)].comp_blocks) {
        const auto& c = g.comp_blocks[static_cast<size_t>(c_id)];
        if (pl.data_block_device[static_cast<size_t>(c.q_block)] != dev) last_use[static_cast<size_t>(dev)][c.q_block] = t;
        if (pl.data_block_device[static_cast<size_t>(c.kv_block)] != dev) last_use[static_cast<size_t>(dev)][c.kv_block] = t;
      }

  // Sends per (division, sender): inverted from the fetch lists.
  // sends[t][src][dst] = blocks, meaning dst fetches them for its division t.
  std::vector<std::vector<std::map<int, std::vector<int>>>> sends(
      static_cast<size_t>(T),
      std::vector<std::map<int, std::vector<int>>>(static_cast<size_t>(R)));
  for (int t = 0; t < T; ++t)
    for (int dev = 0; dev < R; ++dev)
      for (const auto& f : s.div[static_cast<size_t>(t)][static_cast<size_t>(dev)].fetches)
        sends[static_cast<size_t>(t)][static_cast<size_t>(f.src)][dev].push_back(f.block);

  for (int dev = 0; dev < R; ++dev) {
    auto& plan = plans[static_cast<size_t>(dev)];
    auto& my_alloc = alloc[static_cast<size_t>(dev)];
    auto& my_slot = slot_of[static_cast<size_t>(dev)];
    auto& my_acc = acc_of[static_cast<size_t>(dev)];

    for (int t = 0; t < T; ++t) {
      // 1. Launches for division t+1: receive our fetches, send peers' fetches.
      if (t + 1 < T) {
        std::map<int, std::vector<TransferBlock>> recvs;  // src -> blocks
        for (const auto& f : s.div[static_cast<size_t>(t + 1)][static_cast<size_t>(dev)].fetches) {
          const int k = detail::kind_index(g.data_blocks[static_cast<size_t>(f.block)].kind);
          const int slot = my_alloc[static_cast<size_t>(k)].allocate();
          my_slot[f.block] = slot;
          recvs[f.src].push_back({f.block, slot});
        }
        for (auto& [src, blocks] : recvs) {
          CommLaunchInstr instr;
          instr.send = false;
          instr.peer = src;
          instr.blocks = blocks;
          instr.tag = detail::comm_tag(t + 1, src, dev);
          plan.instructions.push_back({t + 1, std::move(instr)});
        }
        for (auto& [dst, blocks] : sends[static_cast<size_t>(t + 1)][static_cast<size_t>(dev)]) {
          CommLaunchInstr instr;
          instr.send = true;
          instr.peer = dst;
          for (int b : blocks) instr.blocks.push_back({b, my_slot.at(b)});
          instr.tag = detail::comm_tag(t + 1, dev, dst);
          plan.instructions.push_back({t + 1, std::move(instr)});
        }
      }

      // 2. Blockwise attention for division t.
      const auto& dd = s.div[static_cast<size_t>(t)][static_cast<size_t>(dev)];
      // Scratch partial slots per computation block, grouped by output block.
      std::map<int, std::vector<int>> partials_by_o;  // o block -> scratch slots
      if (!dd.comp_blocks.empty()) {
        AttentionInstr attn;
        for (int c_id : dd.comp_blocks) {
          const auto& c = g.comp_blocks[static_cast<size_t>(c_id)];
          AttentionItem item;
          item.comp_id = c_id;
          item.q_slot = my_slot.at(c.q_block);
          item.kv_slot = my_slot.at(c.kv_block);
          item.out_slot = my_alloc[detail::kind_index(BlockKind::O)].allocate();
          item.seq = c.seq;
          item.head = c.head;
          item.q_tokens = g.data_blocks[static_cast<size_t>(c.q_block)].tokens;
          item.kv_tokens = g.data_blocks[static_cast<size_t>(c.kv_block)].tokens;
          const auto& mask = g.masks[static_cast<size_t>(c.seq)];
          for (TokenIndex i = item.q_tokens.begin; i < item.q_tokens.end; ++i) {
            TokenRanges rel;
            const TokenRanges& row = mask.row(i);
            for (int ri = 0; ri < row.count; ++ri) {
              Range overlap = intersect(row.r[static_cast<size_t>(ri)], item.kv_tokens);
              if (!overlap.empty())
                rel.push({overlap.begin - item.kv_tokens.begin,
                          overlap.end - item.kv_tokens.begin});
            }
            item.rows.push_back(rel);
          }
          partials_by_o[c.o_block].push_back(item.out_slot);
          attn.items.push_back(std::move(item));
        }
        plan.instructions.push_back({t, std::move(attn)});
      }

      // 3. Reductions: merge this division's partials into the accumulators.
      for (auto& [o_block, scratches] : partials_by_o) {
        auto it = my_acc.find(o_block);
        if (it == my_acc.end() && scratches.size() == 1) {
          my_acc[o_block] = scratches[0];  // single partial becomes the accumulator
          continue;
        }
        ReductionInstr red;
        std::vector<int> srcs;
        int dst;
        if (it != my_acc.end()) {
          dst = it->second;
        } else {
          dst = scratches[0];
          my_acc[o_block] = dst;
        }
        srcs.push_back(dst);  // dst's current partial participates in the merge
        for (int sslot : scratches) if (sslot != dst) srcs.push_back(sslot);
        red.dst = dst;
        red.srcs = std::move(srcs);
        plan.instructions.push_back({t, std::move(red)});
        for (int sslot : scratches)
          if (sslot != dst) my_alloc[detail::kind_index(BlockKind::O)].release(sslot);
      }

      // 4. Free fetched inputs whose last use was this division.
      for (auto& [block, last] : last_use[static_cast<size_t>(dev)]) {
        if (last != t) continue;
        const int k = detail::kind_index(g.data_blocks[static_cast<size_t>(block)].kind);
        my_alloc[static_cast<size_t>(k)].release(my_slot.at(block));
        my_slot.erase(block);
      }

      // 5. Waits for division t+1's arrivals.
      if (t + 1 < T) {
        std::set<int> srcs;
        for (const auto& f : s.div[static_cast<size_t>(t + 1)][static_cast<size_t>(dev)].fetches) srcs.insert(f.src);
        for (int src : srcs)
          plan.instructions.push_back(
              {t + 1, CommWaitInstr{detail::comm_tag(t + 1, src, dev)}});
      }
    }
  }

  // Output stage: partial transfers to owners, final reductions and copies.
  const int out_division = T;
  // Received partial slots per (owner device, o block), in source order.
  std::vector<std::map<int, std::vector<int>>> received(static_cast<size_t>(R));
  for (int dev = 0; dev < R; ++dev) {
    auto& plan = plans[static_cast<size_t>(dev)];
    auto& my_alloc = alloc[static_cast<size_t>(dev)];
    auto& my_acc = acc_of[static_cast<size_t>(dev)];

    // Sends of local accumulators for remotely-owned outputs.
    std::map<int, std::vector<TransferBlock>> out_sends;  // dst -> blocks
    for (const auto& ot : s.output_transfers)
      if (ot.src == dev) out_sends[ot.dst].push_back({ot.block, my_acc.at(ot.block)});
    for (auto& [dst, blocks] : out_sends) {
      CommLaunchInstr instr;
      instr.send = true;
      instr.peer = dst;
      instr.blocks = blocks;
      instr.tag = detail::comm_tag(out_division, dev, dst);
      plan.instructions.push_back({out_division, std::move(instr)});
    }

    // Receives of remote partials for locally-owned outputs.
    std::map<int, std::vector<TransferBlock>> out_recvs;  // src -> blocks
    for (const auto& ot : s.output_transfers) {
      if (ot.dst != dev) continue;
      const int slot = my_alloc[detail::kind_index(BlockKind::O)].allocate();
      received[static_cast<size_t>(dev)][ot.block].push_back(slot);
      out_recvs[ot.src].push_back({ot.block, slot});
    }
    for (auto& [src, blocks] : out_recvs) {
      CommLaunchInstr instr;
      instr.send = false;
      instr.peer = src;
      instr.blocks = blocks;
      instr.tag = detail::comm_tag(out_division, src, dev);
      plan.instructions.push_back({out_division, std::move(instr)});
    }
    for (auto& [src, blocks] : out_recvs)
      plan.instructions.push_back(
          {out_division, CommWaitInstr{detail::comm_tag(out_division, src, dev)}});
  }

  for (int dev = 0; dev < R; ++dev) {
    auto& plan = plans[static_cast<size_t>(dev)];
    auto& my_alloc = alloc[static_cast<size_t>(dev)];
    auto& my_acc = acc_of[static_cast<size_t>(dev)];
    auto& my_slot = slot_of[static_cast<size_t>(dev)];

    CopyInstr copies;
    for (const auto& d : g.data_blocks) {
      if (d.kind != BlockKind::O || pl.data_block_device[static_cast<size_t>(d.id)] != dev) continue;
      std::vector<int> parts;
      auto accit = my_acc.find(d.id);
      if (accit != my_acc.end()) parts.push_back(accit->second);
      auto rxit = received[static_cast<size_t>(dev)].find(d.id);
      if (rxit != received[static_cast<size_t>(dev)].end())
        parts.insert(parts.end(), rxit->second.begin(), rxit->second.end());
      if (parts.empty())
        throw Error("compile: output block " + std::to_string(d.id) + " has no partials");
      int final_src = parts[0];
      if (parts.size() > 1) {
        ReductionInstr red;
        red.dst = parts[0];
        red.srcs = parts;
        plan.instructions.push_back({out_division, std::move(red)});
      }
      copies.items.push_back({final_src, my_slot.at(d.id)});
      for (size_t i = 1; i < parts.size(); ++i)
        my_alloc[detail::kind_index(BlockKind::O)].release(parts[static_cast<size_t>(i)]);
    }
    if (!copies.items.empty())
      plan.instructions.push_back({out_division, std::move(copies)});
  }

  for (int dev = 0; dev < R; ++dev) {
    auto& layout = plans[static_cast<size_t>(dev)].buffers;
    for (int k = 0; k < 3; ++k) {
      layout.capacity[static_cast<size_t>(k)] = alloc[static_cast<size_t>(dev)][static_cast<size_t>(k)].capacity();
      if (options.max_slots_per_kind > 0 &&
          layout.capacity[static_cast<size_t>(k)] > options.max_slots_per_kind)
        throw BufferOverflowError(
            "compile: device " + std::to_string(dev) + " needs " +
            std::to_string(layout.capacity[static_cast<size_t>(k)]) + " slots of kind " +
            std::to_string(k) + " (limit " + std::to_string(options.max_slots_per_kind) +
            "); reduce block size or relax epsilon");
    }
  }
  return plans;
}

// Static verification: replays instruction effects symbolically per device
// (every attention/reduction/copy/send input must be resident when executed)
// and checks that communication tags pair up one send, one receive, and one
// wait across plans with identical block lists.
inline void verify_plans(const std::vector<ExecutionPlan>& plans, const BlockGraph& g) {
  struct MessageSide {
    int device = -1;
    int peer = -1;
    std::vector<int> blocks;
  };
  std::map<std::string, MessageSide> send_side, recv_side;
  std::map<std::string, int> wait_count;

  for (const auto& plan : plans) {
    // written[kind] = set of slots holding defined data.
    std::array<std::set<int>, 3> written;
    for (const auto& r : plan.buffers.resident_q) written[0].insert(r.slot);
    for (const auto& r : plan.buffers.resident_kv) written[1].insert(r.slot);
    std::map<std::string, std::vector<std::pair<int, int>>> pending;  // tag -> (kind, slot)

    auto require = [&](int kind, int slot, const char* what) {
      if (!written[static_cast<size_t>(kind)].count(slot))
        throw Error("plan verify: device " + std::to_string(plan.device) + ": " + what +
                    " reads slot " + std::to_string(slot) + " before it is written");
    };

    for (const auto& ins : plan.instructions) {
      if (const auto* a = std::get_if<AttentionInstr>(&ins.op)) {
        for (const auto& item : a->items) {
          require(0, item.q_slot, "attention");
          require(1, item.kv_slot, "attention");
          written[2].insert(item.out_slot);
        }
      } else if (const auto* r = std::get_if<ReductionInstr>(&ins.op)) {
        for (int ssrc : r->srcs) require(2, ssrc, "reduction");
        written[2].insert(r->dst);
      } else if (const auto* c = std::get_if<CopyInstr>(&ins.op)) {
        for (const auto& item : c->items) {
          require(2, item.src_slot, "copy");
          written[2].insert(item.dst_slot);
        }
      } else if (const auto* l = std::get_if<CommLaunchInstr>(&ins.op)) {
        if (l->send) {
          for (const auto& tb : l->blocks) {
            const int k = detail::kind_index(g.data_blocks[static_cast<size_t>(tb.block)].kind);
            require(k, tb.slot, "send");
          }
          auto [it, inserted] = send_side.insert({l->tag, {}});
          if (!inserted) throw TagMismatchError("duplicate send tag " + l->tag);
          it->second.device = plan.device;
          it->second.peer = l->peer;
          for (const auto& tb : l->blocks) it->second.blocks.push_back(tb.block);
        } else {
          auto [it, inserted] = recv_side.insert({l->tag, {}});
          if (!inserted) throw TagMismatchError("duplicate recv tag " + l->tag);
          it->second.device = plan.device;
          it->second.peer = l->peer;
          for (const auto& tb : l->blocks) {
            it->second.blocks.push_back(tb.block);
            const int k = detail::kind_index(g.data_blocks[static_cast<size_t>(tb.block)].kind);
            pending[l->tag].push_back({k, tb.slot});
          }
        }
      } else if (const auto* w = std::get_if<CommWaitInstr>(&ins.op)) {
        auto it = pending.find(w->tag);
        if (it == pending.end())
          throw TagMismatchError("device " + std::to_string(plan.device) +
                                 " waits on tag " + w->tag + " without a posted receive");
        for (auto [k, slot] : it->second) written[static_cast<size_t>(k)].insert(slot);
        pending.erase(it);
        ++wait_count[w->tag];
      }
    }
    if (!pending.empty())
      throw TagMismatchError("device " + std::to_string(plan.device) +
                             " has posted receives never waited on");
  }

  if (send_side.size() != recv_side.size())
    throw TagMismatchError("send/recv launch counts differ");
  for (const auto& [tag, snd] : send_side) {
    auto it = recv_side.find(tag);
    if (it == recv_side.end()) throw TagMismatchError("send tag " + tag + " has no receive");
    const auto& rcv = it->second;
    if (snd.peer != rcv.device || rcv.peer != snd.device)
      throw TagMismatchError("tag " + tag + " connects mismatched peers");
    if (snd.blocks != rcv.blocks)
      throw TagMismatchError("tag " + tag + " transfers mismatched block lists");
    if (wait_count[tag] != 1)
      throw TagMismatchError("tag " + tag + " must be waited on exactly once");
  }
}

}  // namespace dcp
