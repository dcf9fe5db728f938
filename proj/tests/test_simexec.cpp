#include <catch2/catch_amalgamated.hpp>

#include "dcp/simexec.hpp"
#include "fixtures.hpp"
#include "oracle.hpp"

using namespace dcp;

namespace {

Matrix random_matrix(int rows, int cols, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix m(rows, cols);
  for (auto& x : m.a) x = dist(rng);
  return m;
}

std::vector<TokenRanges> full_rows(int rows, int kv_len) {
  std::vector<TokenRanges> out(static_cast<size_t>(rows));
  for (auto& r : out) r.push({0, kv_len});
  return out;
}

SimResult run_planned(const Batch& b, TokenIndex block_size, const DeviceTopology& topo,
                      const PlacementConfig& pcfg, int divisions, std::uint64_t seed) {
  BlockGraph g = generate_blocks(b, block_size);
  const PlacementResult pl = place(g, topo, pcfg);
  const DivisionSchedule s = schedule(g, pl, divisions);
  const auto plans = compile_plans(s, g, pl);
  verify_plans(plans, g);
  return run(plans, g, make_payload(b, seed), topo, {});
}

}  // namespace

TEST_CASE("self-only attention returns v exactly") {
  std::mt19937_64 rng(97);
  const Matrix q = random_matrix(5, 3, rng);
  const Matrix k = random_matrix(5, 3, rng);
  const Matrix v = random_matrix(5, 3, rng);
  std::vector<TokenRanges> rows(5);
  for (int i = 0; i < 5; ++i) rows[static_cast<size_t>(i)].push({i, i + 1});
  const PartialBlock p = exec_attention(q, k, v, rows);
  for (int i = 0; i < 5; ++i) {
    CHECK(p.l[static_cast<size_t>(i)] == 1.0);
    for (int d = 0; d < 3; ++d) CHECK(p.out.at(i, d) == v.at(i, d));
  }
}

TEST_CASE("uniform scores give equal weights") {
  Matrix q(2, 1), k(2, 1), v(2, 1);
  const std::vector<TokenRanges> rows = {[] {
                                           TokenRanges r;
                                           r.push({0, 1});
                                           return r;
                                         }(),
                                         [] {
                                           TokenRanges r;
                                           r.push({0, 2});
                                           return r;
                                         }()};
  const PartialBlock p = exec_attention(q, k, v, rows);
  CHECK(p.out.at(0, 0) == 0.0);
  CHECK(p.out.at(1, 0) == 0.0);
  CHECK(p.m[1] == 0.0);
  CHECK(p.l[1] == 2.0);  // two keys, equal half weights
}

TEST_CASE("fully masked rows yield zero with empty stats") {
  std::mt19937_64 rng(101);
  const Matrix q = random_matrix(3, 2, rng);
  const Matrix k = random_matrix(3, 2, rng);
  const Matrix v = random_matrix(3, 2, rng);
  std::vector<TokenRanges> rows(3);
  rows[0].push({0, 2});  // rows 1 and 2 empty
  const PartialBlock p = exec_attention(q, k, v, rows);
  CHECK(p.l[1] == 0.0);
  CHECK(std::isinf(p.m[1]));
  for (int d = 0; d < 2; ++d) CHECK(p.out.at(1, d) == 0.0);
}

TEST_CASE("blockwise attention matches dense masked softmax") {
  std::mt19937_64 rng(103);
  const int L = 7, D = 3;
  const Matrix q = random_matrix(L, D, rng);
  const Matrix k = random_matrix(L, D, rng);
  const Matrix v = random_matrix(L, D, rng);
  std::vector<TokenRanges> rows(static_cast<size_t>(L));
  for (int i = 0; i < L; ++i) rows[static_cast<size_t>(i)].push({0, i + 1});
  const PartialBlock p = exec_attention(q, k, v, rows);

  // Dense reference.
  const double scale = 1.0 / std::sqrt(static_cast<double>(D));
  for (int i = 0; i < L; ++i) {
    std::vector<double> s(static_cast<size_t>(i) + 1);
    double m = -1e300;
    for (int j = 0; j <= i; ++j) {
      double dot = 0;
      for (int d = 0; d < D; ++d) dot += q.at(i, d) * k.at(j, d);
      s[static_cast<size_t>(j)] = dot * scale;
      m = std::max(m, s[static_cast<size_t>(j)]);
    }
    double l = 0;
    for (int j = 0; j <= i; ++j) l += std::exp(s[static_cast<size_t>(j)] - m);
    for (int d = 0; d < D; ++d) {
      double o = 0;
      for (int j = 0; j <= i; ++j) o += std::exp(s[static_cast<size_t>(j)] - m) / l * v.at(j, d);
      CHECK(std::abs(p.out.at(i, d) - o) <= 1e-12);
    }
  }
}

TEST_CASE("reduction of a single partial is the identity") {
  std::mt19937_64 rng(107);
  const Matrix q = random_matrix(4, 2, rng);
  const Matrix k = random_matrix(4, 2, rng);
  const Matrix v = random_matrix(4, 2, rng);
  const PartialBlock p = exec_attention(q, k, v, full_rows(4, 4));
  const PartialBlock r = exec_reduction({&p});
  for (size_t i = 0; i < p.out.a.size(); ++i) CHECK(r.out.a[i] == p.out.a[i]);
  CHECK(r.m == p.m);
  CHECK(r.l == p.l);
}

TEST_CASE("empty partials are absorbed by reduction") {
  std::mt19937_64 rng(109);
  const Matrix q = random_matrix(4, 2, rng);
  const Matrix k = random_matrix(4, 2, rng);
  const Matrix v = random_matrix(4, 2, rng);
  const PartialBlock p = exec_attention(q, k, v, full_rows(4, 4));
  PartialBlock empty;
  empty.out = Matrix(4, 2);
  empty.m.assign(4, -std::numeric_limits<double>::infinity());
  empty.l.assign(4, 0.0);
  const PartialBlock r = exec_reduction({&empty, &p});
  for (size_t i = 0; i < p.out.a.size(); ++i) CHECK(r.out.a[i] == Catch::Approx(p.out.a[i]).margin(1e-15));
}

TEST_CASE("splitting kv and reducing equals joint attention") {
  std::mt19937_64 rng(113);
  const int L = 9, D = 4;
  const Matrix q = random_matrix(L, D, rng);
  const Matrix k = random_matrix(L, D, rng);
  const Matrix v = random_matrix(L, D, rng);

  const PartialBlock joint = exec_attention(q, k, v, full_rows(L, L));

  auto slice = [&](const Matrix& m, int from, int to) {
    Matrix out(to - from, D);
    for (int i = from; i < to; ++i)
      for (int d = 0; d < D; ++d) out.at(i - from, d) = m.at(i, d);
    return out;
  };
  const int split = 4;
  const PartialBlock left =
      exec_attention(q, slice(k, 0, split), slice(v, 0, split), full_rows(L, split));
  const PartialBlock right = exec_attention(q, slice(k, split, L), slice(v, split, L),
                                            full_rows(L, L - split));
  const PartialBlock merged = exec_reduction({&left, &right});
  for (size_t i = 0; i < joint.out.a.size(); ++i)
    CHECK(std::abs(merged.out.a[i] - joint.out.a[i]) <= 1e-12);
}

TEST_CASE("single device run equals the dense oracle") {
  std::mt19937_64 rng(127);
  for (int rep = 0; rep < 5; ++rep) {
    Batch b = fixtures::random_batch(rng, 48, 3, 2, 6);
    const BatchPayload payload = make_payload(b, 1000 + static_cast<std::uint64_t>(rep));
    BlockGraph g = generate_blocks(b, 8);
    DeviceTopology topo;
    const PlacementResult pl = place(g, topo, {});
    const DivisionSchedule s = schedule(g, pl, 2);
    const auto plans = compile_plans(s, g, pl);
    const SimResult sim = run(plans, g, payload, topo, {});
    const BatchOutputs expect = oracle::dense_attention(b, payload);
    CHECK(max_abs_error(sim.outputs, expect) <= 1e-10);
  }
}

TEST_CASE("multi-device run equals the dense oracle and counts bytes exactly") {
  std::mt19937_64 rng(131);
  for (int rep = 0; rep < 6; ++rep) {
    Batch b = fixtures::random_batch(rng, 40, 3, 2, 4);
    DeviceTopology topo;
    topo.machines = 1 + static_cast<int>(rng() % 2);
    topo.devices_per_machine = 1 + static_cast<int>(rng() % 2);
    PlacementConfig pcfg;
    pcfg.eps_intra = 0.4;
    pcfg.eps_inter = 0.4;
    pcfg.eps_data = 0.6;
    pcfg.seed = static_cast<std::uint64_t>(rep);
    BlockGraph g = generate_blocks(b, 4);
    PlacementResult pl;
    try {
      pl = place(g, topo, pcfg);
    } catch (const InfeasibleError&) {
      continue;
    }
    const DivisionSchedule s = schedule(g, pl, 4);
    const auto plans = compile_plans(s, g, pl);
    verify_plans(plans, g);
    const BatchPayload payload = make_payload(b, 77);
    const SimResult sim = run(plans, g, payload, topo, {});
    const BatchOutputs expect = oracle::dense_attention(b, payload);
    CHECK(max_abs_error(sim.outputs, expect) <= 1e-10);
    CHECK(sim.report.total_bytes == communication_volume(g, pl).total);
  }
}

TEST_CASE("outputs are independent of the placement") {
  std::mt19937_64 rng(137);
  Batch b = fixtures::random_batch(rng, 48, 2, 2, 4);
  DeviceTopology one;
  DeviceTopology four;
  four.devices_per_machine = 4;
  PlacementConfig pcfg;
  pcfg.eps_intra = 0.5;
  pcfg.eps_data = 0.6;
  const SimResult a = run_planned(b, 4, one, pcfg, 2, 42);
  const SimResult c = run_planned(b, 2, four, pcfg, 4, 42);
  CHECK(max_abs_error(a.outputs, c.outputs) <= 1e-8);
}

TEST_CASE("cost mode reports the same bytes as numeric mode") {
  BlockGraph g = fixtures::fig7_graph();
  const PlacementResult pl = ring_placement(g, fixtures::four_devices());
  const DivisionSchedule s = schedule(g, pl, 4);
  const auto plans = compile_plans(s, g, pl);
  const BatchPayload payload = make_payload(g.batch, 3);
  SimOptions cost_mode;
  cost_mode.numeric = false;
  const SimResult numeric = run(plans, g, payload, fixtures::four_devices(), {});
  const SimResult cost = run(plans, g, {}, fixtures::four_devices(), cost_mode);
  CHECK(numeric.report.total_bytes == cost.report.total_bytes);
  CHECK(numeric.report.total_flops == cost.report.total_flops);
  for (size_t t = 0; t < numeric.report.comm_bytes.size(); ++t)
    CHECK(numeric.report.comm_bytes[t] == cost.report.comm_bytes[t]);
}

TEST_CASE("simulated makespan matches the schedule cost model") {
  BlockGraph g = fixtures::fig5_graph();
  const PlacementResult pl = fixtures::fig5_mixed(g);
  const DivisionSchedule s = schedule(g, pl, 4);
  const auto plans = compile_plans(s, g, pl);
  const DeviceTopology topo = fixtures::two_devices();
  const SimResult sim = run(plans, g, make_payload(g.batch, 5), topo, {});
  const ScheduleCost sc = schedule_cost(s, g, topo, {});
  CHECK(sim.report.makespan == Catch::Approx(sc.makespan));
}

TEST_CASE("missing sender is reported as a deadlock") {
  Batch b = fixtures::single_seq_batch(4, MaskDescriptor::causal());
  BlockGraph g = generate_blocks(b, 2);
  std::vector<int> group_dev = {0, 1};
  std::vector<int> comp_dev(g.comp_blocks.size());
  for (const auto& c : g.comp_blocks) comp_dev[static_cast<size_t>(c.id)] = c.q_tile;
  const PlacementResult pl =
      detail::make_placement(g, fixtures::two_devices(), group_dev, comp_dev);
  const DivisionSchedule s = schedule(g, pl, 2);
  auto plans = compile_plans(s, g, pl);
  auto& instrs = plans[0].instructions;
  instrs.erase(std::remove_if(instrs.begin(), instrs.end(),
                              [](const Instruction& ins) {
                                const auto* l = std::get_if<CommLaunchInstr>(&ins.op);
                                return l && l->send;
                              }),
               instrs.end());
  CHECK_THROWS_AS(run(plans, g, make_payload(b, 1), fixtures::two_devices(), {}),
                  DeadlockError);
}
