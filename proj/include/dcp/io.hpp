#pragma once

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dcp/simexec.hpp"

namespace dcp {

using Json = nlohmann::ordered_json;

// ---- batch JSONL -----------------------------------------------------------
// First line is a header object carrying the batch-level attention spec;
// each following line describes one sequence.

inline Json mask_to_json(const MaskDescriptor& m) {
  Json j;
  j["kind"] = to_string(m.kind);
  switch (m.kind) {
    case MaskKind::Causal: break;
    case MaskKind::Lambda:
      j["sink_tokens"] = m.sink_tokens;
      j["window"] = m.window;
      break;
    case MaskKind::CausalBlockwise:
      j["block"] = m.block;
      j["window_blocks"] = m.window_blocks;
      j["sink_blocks"] = m.sink_blocks;
      j["test_blocks"] = m.test_blocks;
      break;
    case MaskKind::SharedQuestion:
      j["question_len"] = m.question_len;
      j["answer_lens"] = m.answer_lens;
      break;
  }
  return j;
}

inline MaskDescriptor mask_from_json(const Json& j) {
  MaskDescriptor m;
  m.kind = mask_kind_from_string(j.at("kind").get<std::string>());
  switch (m.kind) {
    case MaskKind::Causal: break;
    case MaskKind::Lambda:
      m.sink_tokens = j.at("sink_tokens").get<TokenIndex>();
      m.window = j.at("window").get<TokenIndex>();
      break;
    case MaskKind::CausalBlockwise:
      m.block = j.at("block").get<TokenIndex>();
      m.window_blocks = j.at("window_blocks").get<int>();
      m.sink_blocks = j.at("sink_blocks").get<int>();
      m.test_blocks = j.at("test_blocks").get<int>();
      break;
    case MaskKind::SharedQuestion:
      m.question_len = j.at("question_len").get<TokenIndex>();
      m.answer_lens = j.at("answer_lens").get<std::vector<TokenIndex>>();
      break;
  }
  return m;
}

struct BatchHeader {
  int heads = 1;
  int kv_groups = 1;
  int head_dim = 64;
  TokenIndex token_budget = 0;
  int bytes_per_element = 2;
};

inline void write_sequences_jsonl(std::ostream& os, const BatchHeader& header,
                                  const std::vector<SequenceSpec>& seqs) {
  Json h;
  h["heads"] = header.heads;
  h["kv_groups"] = header.kv_groups;
  h["head_dim"] = header.head_dim;
  h["token_budget"] = header.token_budget;
  h["bytes_per_element"] = header.bytes_per_element;
  os << h.dump() << "\n";
  for (const auto& s : seqs) {
    Json j;
    j["seq_id"] = s.seq_id;
    j["length"] = s.length;
    j["mask"] = mask_to_json(s.mask);
    os << j.dump() << "\n";
  }
}

inline std::pair<BatchHeader, std::vector<SequenceSpec>> read_sequences_jsonl(
    std::istream& is) {
  std::string line;
  BatchHeader header;
  std::vector<SequenceSpec> seqs;
  bool have_header = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    Json j = Json::parse(line);
    if (!have_header) {
      if (j.contains("seq_id"))
        throw Error("batch input: first line must be the batch header");
      header.heads = j.at("heads").get<int>();
      header.kv_groups = j.at("kv_groups").get<int>();
      header.head_dim = j.at("head_dim").get<int>();
      header.token_budget = j.at("token_budget").get<TokenIndex>();
      header.bytes_per_element = j.value("bytes_per_element", 2);
      have_header = true;
      continue;
    }
    SequenceSpec s;
    s.seq_id = j.at("seq_id").get<std::string>();
    s.length = j.at("length").get<TokenIndex>();
    s.mask = mask_from_json(j.at("mask"));
    s.validate();
    seqs.push_back(std::move(s));
  }
  if (!have_header) throw Error("batch input: missing header line");
  return {header, std::move(seqs)};
}

inline Batch make_batch(const BatchHeader& header, std::vector<SequenceSpec> seqs) {
  Batch b;
  b.sequences = std::move(seqs);
  b.token_budget = header.token_budget;
  b.heads = header.heads;
  b.kv_groups = header.kv_groups;
  b.head_dim = header.head_dim;
  b.bytes_per_element = header.bytes_per_element;
  b.validate();
  return b;
}

// ---- block graph dump ------------------------------------------------------

inline Json block_graph_to_json(const BlockGraph& g) {
  Json j;
  j["data_blocks"] = Json::array();
  for (const auto& d : g.data_blocks) {
    Json b;
    b["id"] = d.id;
    b["kind"] = to_string(d.kind);
    b["seq"] = d.seq;
    b["head"] = d.head;
    b["tile"] = d.tile;
    b["start"] = d.tokens.begin;
    b["end"] = d.tokens.end;
    b["size_bytes"] = d.size_bytes;
    b["group"] = g.group_of_block[static_cast<size_t>(d.id)];
    j["data_blocks"].push_back(std::move(b));
  }
  j["comp_blocks"] = Json::array();
  for (const auto& c : g.comp_blocks) {
    Json b;
    b["id"] = c.id;
    b["q_block"] = c.q_block;
    b["kv_block"] = c.kv_block;
    b["o_block"] = c.o_block;
    b["attended_pairs"] = c.attended_pairs;
    b["flops_weight"] = c.flops_weight;
    j["comp_blocks"].push_back(std::move(b));
  }
  j["groups"] = Json::array();
  for (const auto& grp : g.groups) {
    Json b;
    b["id"] = grp.id;
    b["seq"] = grp.seq;
    b["tile"] = grp.tile;
    b["blocks"] = grp.block_ids;
    j["groups"].push_back(std::move(b));
  }
  return j;
}

// ---- partition / placement dumps -------------------------------------------

inline Json partition_to_json(const Partition& p) {
  Json j = Json::object();
  for (size_t v = 0; v < p.assignment.size(); ++v)
    j[std::to_string(v)] = p.assignment[v];
  return j;
}

inline Json placement_to_json(const BlockGraph& g, const PlacementResult& pl) {
  Json j;
  j["machines"] = pl.machines;
  j["devices_per_machine"] = pl.devices_per_machine;
  j["inter_machine_bytes"] = pl.inter_machine_bytes;
  j["intra_machine_bytes"] = pl.intra_machine_bytes;
  j["group_device"] = pl.group_device;
  j["data_block_device"] = pl.data_block_device;
  j["comp_block_device"] = pl.comp_block_device;
  j["balance"] = Json::array();
  for (const auto& b : pl.balance) {
    Json d;
    d["flops"] = b.flops;
    d["bytes"] = b.bytes;
    d["tokens"] = b.tokens;
    j["balance"].push_back(std::move(d));
  }
  const TokenManifest manifest = token_manifest(g, pl);
  j["token_manifest"] = Json::array();
  for (size_t dev = 0; dev < manifest.owned.size(); ++dev) {
    Json d;
    d["device"] = dev;
    d["tokens"] = Json::array();
    for (const auto& [seq, range] : manifest.owned[dev]) {
      Json t;
      t["seq"] = seq;
      t["start"] = range.begin;
      t["end"] = range.end;
      d["tokens"].push_back(std::move(t));
    }
    j["token_manifest"].push_back(std::move(d));
  }
  return j;
}

inline Json schedule_to_json(const DivisionSchedule& s) {
  Json j;
  j["divisions"] = s.divisions;
  j["devices"] = s.devices;
  j["plan"] = Json::array();
  for (int t = 0; t < s.divisions; ++t) {
    Json div = Json::array();
    for (int d = 0; d < s.devices; ++d) {
      Json dd;
      dd["device"] = d;
      dd["comp_blocks"] = s.div[static_cast<size_t>(t)][static_cast<size_t>(d)].comp_blocks;
      dd["fetches"] = Json::array();
      for (const auto& f : s.div[static_cast<size_t>(t)][static_cast<size_t>(d)].fetches) {
        Json fj;
        fj["block"] = f.block;
        fj["src"] = f.src;
        dd["fetches"].push_back(std::move(fj));
      }
      div.push_back(std::move(dd));
    }
    j["plan"].push_back(std::move(div));
  }
  j["output_transfers"] = Json::array();
  for (const auto& ot : s.output_transfers) {
    Json o;
    o["block"] = ot.block;
    o["src"] = ot.src;
    o["dst"] = ot.dst;
    j["output_transfers"].push_back(std::move(o));
  }
  return j;
}

// ---- execution plan files ---------------------------------------------------
// One JSON document per device; field order is canonical so identical inputs
// produce byte-identical files.

inline Json token_ranges_to_json(const TokenRanges& r) {
  Json a = Json::array();
  for (int i = 0; i < r.count; ++i) {
    a.push_back(r.r[static_cast<size_t>(i)].begin);
    a.push_back(r.r[static_cast<size_t>(i)].end);
  }
  return a;
}

inline TokenRanges token_ranges_from_json(const Json& a) {
  TokenRanges r;
  for (size_t i = 0; i + 1 < a.size(); i += 2)
    r.push({a[i].get<TokenIndex>(), a[i + 1].get<TokenIndex>()});
  return r;
}

inline Json plan_to_json(const ExecutionPlan& plan) {
  Json j;
  j["version"] = plan.version;
  j["device"] = plan.device;
  j["divisions"] = plan.divisions;
  Json buffers;
  auto resident = [](const std::vector<ResidentBlock>& blocks) {
    Json a = Json::array();
    for (const auto& r : blocks) {
      Json b;
      b["block"] = r.block;
      b["slot"] = r.slot;
      a.push_back(std::move(b));
    }
    return a;
  };
  buffers["q"] = Json{{"capacity", plan.buffers.capacity[0]},
                      {"resident", resident(plan.buffers.resident_q)}};
  buffers["kv"] = Json{{"capacity", plan.buffers.capacity[1]},
                       {"resident", resident(plan.buffers.resident_kv)}};
  buffers["o"] = Json{{"capacity", plan.buffers.capacity[2]},
                      {"resident", resident(plan.buffers.resident_o)}};
  j["buffers"] = std::move(buffers);

  j["instructions"] = Json::array();
  for (const auto& ins : plan.instructions) {
    Json op;
    op["division"] = ins.division;
    if (const auto* a = std::get_if<AttentionInstr>(&ins.op)) {
      op["op"] = "blockwise_attention";
      op["items"] = Json::array();
      for (const auto& item : a->items) {
        Json it;
        it["comp"] = item.comp_id;
        it["q_slot"] = item.q_slot;
        it["kv_slot"] = item.kv_slot;
        it["out_slot"] = item.out_slot;
        it["seq"] = item.seq;
        it["head"] = item.head;
        it["q_start"] = item.q_tokens.begin;
        it["q_end"] = item.q_tokens.end;
        it["kv_start"] = item.kv_tokens.begin;
        it["kv_end"] = item.kv_tokens.end;
        it["rows"] = Json::array();
        for (const auto& row : item.rows) it["rows"].push_back(token_ranges_to_json(row));
        op["items"].push_back(std::move(it));
      }
    } else if (const auto* r = std::get_if<ReductionInstr>(&ins.op)) {
      op["op"] = "blockwise_reduction";
      op["dst"] = r->dst;
      op["srcs"] = r->srcs;
    } else if (const auto* c = std::get_if<CopyInstr>(&ins.op)) {
      op["op"] = "blockwise_copy";
      op["items"] = Json::array();
      for (const auto& item : c->items) {
        Json it;
        it["src"] = item.src_slot;
        it["dst"] = item.dst_slot;
        op["items"].push_back(std::move(it));
      }
    } else if (const auto* l = std::get_if<CommLaunchInstr>(&ins.op)) {
      op["op"] = "comm_launch";
      op["dir"] = l->send ? "send" : "recv";
      op["peer"] = l->peer;
      op["tag"] = l->tag;
      op["blocks"] = Json::array();
      for (const auto& tb : l->blocks) {
        Json b;
        b["block"] = tb.block;
        b["slot"] = tb.slot;
        op["blocks"].push_back(std::move(b));
      }
    } else if (const auto* w = std::get_if<CommWaitInstr>(&ins.op)) {
      op["op"] = "comm_wait";
      op["tag"] = w->tag;
    }
    j["instructions"].push_back(std::move(op));
  }
  return j;
}

inline ExecutionPlan plan_from_json(const Json& j) {
  ExecutionPlan plan;
  plan.version = j.at("version").get<int>();
  if (plan.version != 1) throw Error("unsupported plan version");
  plan.device = j.at("device").get<int>();
  plan.divisions = j.at("divisions").get<int>();
  auto resident = [](const Json& a) {
    std::vector<ResidentBlock> out;
    for (const auto& b : a) out.push_back({b.at("block").get<int>(), b.at("slot").get<int>()});
    return out;
  };
  plan.buffers.capacity[0] = j.at("buffers").at("q").at("capacity").get<int>();
  plan.buffers.capacity[1] = j.at("buffers").at("kv").at("capacity").get<int>();
  plan.buffers.capacity[2] = j.at("buffers").at("o").at("capacity").get<int>();
  plan.buffers.resident_q = resident(j.at("buffers").at("q").at("resident"));
  plan.buffers.resident_kv = resident(j.at("buffers").at("kv").at("resident"));
  plan.buffers.resident_o = resident(j.at("buffers").at("o").at("resident"));
  for (const auto& op : j.at("instructions")) {
    Instruction ins;
    ins.division = op.at("division").get<int>();
    const std::string kind = op.at("op").get<std::string>();
    if (kind == "blockwise_attention") {
      AttentionInstr a;
      for (const auto& it : op.at("items")) {
        AttentionItem item;
        item.comp_id = it.at("comp").get<int>();
        item.q_slot = it.at("q_slot").get<int>();
        item.kv_slot = it.at("kv_slot").get<int>();
        item.out_slot = it.at("out_slot").get<int>();
        item.seq = it.at("seq").get<int>();
        item.head = it.at("head").get<int>();
        item.q_tokens = {it.at("q_start").get<TokenIndex>(), it.at("q_end").get<TokenIndex>()};
        item.kv_tokens = {it.at("kv_start").get<TokenIndex>(), it.at("kv_end").get<TokenIndex>()};
        for (const auto& row : it.at("rows")) item.rows.push_back(token_ranges_from_json(row));
        a.items.push_back(std::move(item));
      }
      ins.op = std::move(a);
    } else if (kind == "blockwise_reduction") {
      ReductionInstr r;
      r.dst = op.at("dst").get<int>();
      r.srcs = op.at("srcs").get<std::vector<int>>();
      ins.op = std::move(r);
    } else if (kind == "blockwise_copy") {
      CopyInstr c;
      for (const auto& it : op.at("items"))
        c.items.push_back({it.at("src").get<int>(), it.at("dst").get<int>()});
      ins.op = std::move(c);
    } else if (kind == "comm_launch") {
      CommLaunchInstr l;
      l.send = op.at("dir").get<std::string>() == "send";
      l.peer = op.at("peer").get<int>();
      l.tag = op.at("tag").get<std::string>();
      for (const auto& b : op.at("blocks"))
        l.blocks.push_back({b.at("block").get<int>(), b.at("slot").get<int>()});
      ins.op = std::move(l);
    } else if (kind == "comm_wait") {
      ins.op = CommWaitInstr{op.at("tag").get<std::string>()};
    } else {
      throw Error("unknown instruction op: " + kind);
    }
    plan.instructions.push_back(std::move(ins));
  }
  return plan;
}

// ---- simulation report ------------------------------------------------------

inline Json sim_report_to_json(const SimReport& r) {
  Json j;
  j["total_bytes"] = r.total_bytes;
  j["total_flops"] = r.total_flops;
  j["makespan"] = r.makespan;
  j["per_device_send"] = r.per_device_send;
  j["per_device_recv"] = r.per_device_recv;
  j["divisions"] = Json::array();
  for (size_t t = 0; t < r.comm_bytes.size(); ++t) {
    Json d;
    d["division"] = t;
    d["comp_flops"] = t < r.comp_flops.size() ? Json(r.comp_flops[t]) : Json::array();
    d["links"] = Json::array();
    for (const auto& [link, bytes] : r.comm_bytes[t]) {
      Json l;
      l["src"] = link.first;
      l["dst"] = link.second;
      l["bytes"] = bytes;
      d["links"].push_back(std::move(l));
    }
    j["divisions"].push_back(std::move(d));
  }
  return j;
}

inline std::string sim_report_csv(const SimReport& r) {
  std::ostringstream os;
  os << "division,src,dst,bytes\n";
  for (size_t t = 0; t < r.comm_bytes.size(); ++t)
    for (const auto& [link, bytes] : r.comm_bytes[t])
      os << t << "," << link.first << "," << link.second << "," << bytes << "\n";
  return os.str();
}

// ---- file helpers -----------------------------------------------------------

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open for writing: " + path);
  os << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

}  // namespace dcp
