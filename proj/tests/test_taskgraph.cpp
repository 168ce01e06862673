#include <gtest/gtest.h>

#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "hssulv/executor.hpp"
#include "hssulv/taskgraph.hpp"
#include "hssulv/ulv.hpp"

using namespace hssulv;

namespace {

std::map<TaskKind, int> kind_counts(const TaskGraph& g) {
  std::map<TaskKind, int> c;
  for (const auto& t : g.tasks()) ++c[t.kind];
  return c;
}

/// reach[a][b]: b is reachable from a.
std::vector<std::vector<bool>> reachability(const TaskGraph& g) {
  const auto order = topological_order(g);
  std::vector<std::vector<bool>> reach(g.size(), std::vector<bool>(g.size(), false));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    for (TaskId s : g.task(*it).successors) {
      reach[*it][s] = true;
      for (TaskId k = 0; k < g.size(); ++k)
        if (reach[s][k]) reach[*it][k] = true;
    }
  }
  return reach;
}

std::size_t longest_chain(const TaskGraph& g) {
  std::vector<std::size_t> depth(g.size(), 1);
  for (TaskId id : topological_order(g))
    for (TaskId d : g.task(id).deps) depth[id] = std::max(depth[id], depth[d] + 1);
  return *std::max_element(depth.begin(), depth.end());
}

HssMatrix small_hss(Index n, Index nleaf, Index rank, KernelSpec k = KernelSpec::yukawa()) {
  const PointSet ps = generate_grid(n).with_leaf_size(nleaf);
  return build_hss(k, ps, nleaf, rank);
}

}  // namespace

TEST(Dag, OneLevelHasSixTasks) {
  const TaskGraph g = build_dag(1);
  EXPECT_EQ(g.size(), 6u);
  const auto c = kind_counts(g);
  EXPECT_EQ(c.at(TaskKind::DiagProduct), 2);
  EXPECT_EQ(c.at(TaskKind::PartialFactor), 2);
  EXPECT_EQ(c.at(TaskKind::Merge), 1);
  EXPECT_EQ(c.at(TaskKind::RootFactor), 1);
}

TEST(Dag, TwoLevelsLeafFactorsIndependent) {
  const TaskGraph g = build_dag(2);
  EXPECT_EQ(g.size(), 16u);
  const auto reach = reachability(g);
  for (Index a = 0; a < 4; ++a) {
    for (Index b = 0; b < 4; ++b) {
      if (a == b) continue;
      const TaskId ta = g.find(TaskKind::PartialFactor, 2, a);
      const TaskId tb = g.find(TaskKind::PartialFactor, 2, b);
      EXPECT_FALSE(reach[ta][tb]);
    }
  }
}

TEST(Dag, LongestChainIsThreeTasksPerLevelPlusRoot) {
  for (int l = 1; l <= 6; ++l) EXPECT_EQ(longest_chain(build_dag(l)), static_cast<std::size_t>(3 * l + 1)) << l;
}

TEST(Dag, CountFormulaAndDependencyRules) {
  for (int top = 1; top <= 8; ++top) {
    const TaskGraph g = build_dag(top);
    const std::size_t leaves = std::size_t{1} << top;
    EXPECT_EQ(g.size(), 2 * (2 * leaves - 2) + (leaves - 1) + 1);
    EXPECT_EQ(g.size(), expected_task_count(top));
    EXPECT_NO_THROW(topological_order(g));
    for (const auto& t : g.tasks()) {
      std::vector<TaskId> want;
      switch (t.kind) {
        case TaskKind::DiagProduct:
          if (t.level < top) want = {g.find(TaskKind::Merge, t.level + 1, t.node)};
          break;
        case TaskKind::PartialFactor:
          want = {g.find(TaskKind::DiagProduct, t.level, t.node)};
          break;
        case TaskKind::Merge:
          want = {g.find(TaskKind::PartialFactor, t.level, 2 * t.node),
                  g.find(TaskKind::PartialFactor, t.level, 2 * t.node + 1)};
          break;
        case TaskKind::RootFactor:
          want = {g.find(TaskKind::Merge, 1, 0)};
          break;
      }
      std::vector<TaskId> got = t.deps;
      std::sort(got.begin(), got.end());
      std::sort(want.begin(), want.end());
      EXPECT_EQ(got, want) << task_kind_name(t.kind) << "(" << t.level << "," << t.node << ")";
      for (TaskId d : t.deps) {
        const Task& p = g.task(d);
        EXPECT_FALSE(p.kind == t.kind && p.level == t.level);
        const auto& succ = p.successors;
        EXPECT_NE(std::find(succ.begin(), succ.end(), t.id), succ.end());
      }
    }
  }
  EXPECT_THROW(build_dag(0), std::invalid_argument);
  EXPECT_THROW(build_dag(3).find(TaskKind::Merge, 4, 0), std::out_of_range);
}

TEST(Dag, TaskCountLinearInLeafCount) {
  for (int top = 1; top <= 10; ++top) {
    const std::size_t leaves = std::size_t{1} << top;
    EXPECT_EQ(expected_task_count(top), 5 * leaves - 4);
  }
}

TEST(Owners, SingleProcessOwnsEverything) {
  const TaskGraph g = build_dag(3);
  const OwnerMap m = assign_owners(g, 1);
  for (const auto& t : g.tasks()) EXPECT_EQ(m.owner_of(t), 0);
  EXPECT_THROW(assign_owners(g, 0), std::invalid_argument);
}

TEST(Owners, RowCyclicWithLeftChildInheritance) {
  const TaskGraph g = build_dag(2);
  const OwnerMap m = assign_owners(g, 2);
  EXPECT_EQ(m.assignment[2], (std::vector<int>{0, 1, 0, 1}));
  EXPECT_EQ(m.assignment[1], (std::vector<int>{0, 0}));
  EXPECT_EQ(m.owner(0, 0), 0);
  for (const auto& t : g.tasks()) {
    const int level = t.kind == TaskKind::Merge ? t.level - 1 : t.level;
    EXPECT_EQ(m.owner_of(t), m.owner(level, t.node));
  }
}

TEST(Owners, BalancedLeaves) {
  const OwnerMap m = assign_owners(build_dag(4), 4);
  std::map<int, int> per_rank;
  for (int r : m.assignment[4]) ++per_rank[r];
  ASSERT_EQ(per_rank.size(), 4u);
  for (const auto& [rank, count] : per_rank) EXPECT_EQ(count, 4);
}

TEST(Comm, SingleProcessHasNoEvents) {
  const HssMatrix h = small_hss(1024, 128, 20);
  const TaskGraph g = build_dag(h);
  const CommTrace t = simulate_comm(g, assign_owners(g, 1), h);
  EXPECT_TRUE(t.events.empty());
  EXPECT_EQ(t.total_entries(), 0);
}

TEST(Comm, TwoLevelsTwoProcesses) {
  const HssMatrix h = small_hss(1024, 256, 40);
  const TaskGraph g = build_dag(h);
  const OwnerMap m = assign_owners(g, 2);
  const CommTrace t = simulate_comm(g, m, h);
  // Only the right leaves (1 and 3, rank 1) send their SS remainders to rank-0 merges.
  EXPECT_EQ(t.events_at_level(2), 2);
  EXPECT_EQ(t.events_at_level(1), 0);
  ASSERT_EQ(t.events.size(), 2u);
  for (const auto& e : t.events) {
    EXPECT_EQ(e.src, 1);
    EXPECT_EQ(e.dst, 0);
    EXPECT_EQ(g.task(e.task).kind, TaskKind::Merge);
  }
  EXPECT_EQ(t.events[0].entries, h.rank(2, 1) * h.rank(2, 1));
  EXPECT_EQ(t.events[1].entries, h.rank(2, 3) * h.rank(2, 3));
}

TEST(Comm, EventsMatchCrossOwnerEdges) {
  const HssMatrix h = small_hss(2048, 64, 16);
  const TaskGraph g = build_dag(h);
  for (int nprocs : {2, 3, 4, 7}) {
    const OwnerMap m = assign_owners(g, nprocs);
    const CommTrace t = simulate_comm(g, m, h);
    Index crossing = 0;
    for (const auto& task : g.tasks())
      for (TaskId d : task.deps) crossing += m.owner_of(g.task(d)) != m.owner_of(task) ? 1 : 0;
    EXPECT_EQ(static_cast<Index>(t.events.size()), crossing);
    Index total = 0;
    for (const auto& e : t.events) {
      EXPECT_NE(e.src, e.dst);
      total += e.entries;
    }
    EXPECT_EQ(total, t.total_entries());
    Index pair_events = 0;
    for (const auto& [pair, tot] : t.totals) pair_events += tot.events;
    EXPECT_EQ(pair_events, crossing);
  }
}

TEST(Comm, CsvExport) {
  const HssMatrix h = small_hss(1024, 256, 40);
  const TaskGraph g = build_dag(h);
  std::ostringstream out;
  write_comm_csv(out, simulate_comm(g, assign_owners(g, 2), h));
  const Index e = h.rank(2, 1) * h.rank(2, 1) + h.rank(2, 3) * h.rank(2, 3);
  EXPECT_EQ(out.str(), "src,dst,entries,events\n1,0," + std::to_string(e) + ",2\n");
}

TEST(Executor, SingleWorkerMatchesSequential) {
  const HssMatrix h = small_hss(1024, 128, 30);
  const auto res = execute(build_dag(h), h, {});
  EXPECT_TRUE(res.factors == ulv_factor_hss(h));
  EXPECT_EQ(res.stats.schedule.size(), expected_task_count(3));
}

TEST(Executor, WorkerCountDoesNotChangeFactors) {
  const HssMatrix h = small_hss(2048, 128, 40, KernelSpec::laplace2d());
  const TaskGraph g = build_dag(h);
  const UlvFactors reference = ulv_factor_hss(h);
  for (int w : {1, 2, 4, 8}) {
    ExecuteOptions o;
    o.workers = w;
    const auto res = execute(g, h, o);
    EXPECT_TRUE(res.factors == reference) << w << " workers";
    EXPECT_EQ(res.stats.worker_busy_seconds.size(), static_cast<std::size_t>(w));
    EXPECT_LE(res.stats.max_concurrency, w);
    EXPECT_GE(res.stats.max_concurrency, 1);
  }
}

TEST(Executor, MergeFiresBeforeLastSameLevelFactor) {
  const HssMatrix h = small_hss(1024, 128, 30);
  ASSERT_EQ(h.max_level, 3);
  for (int w : {1, 2}) {
    ExecuteOptions o;
    o.workers = w;
    const auto res = execute(build_dag(h), h, o);
    std::int64_t first_merge_end = INT64_MAX;
    std::int64_t last_factor_start = 0;
    for (const auto& r : res.stats.schedule) {
      if (r.level != 3) continue;
      if (r.kind == TaskKind::Merge) first_merge_end = std::min(first_merge_end, r.end_ns);
      if (r.kind == TaskKind::PartialFactor) last_factor_start = std::max(last_factor_start, r.start_ns);
    }
    EXPECT_LT(first_merge_end, last_factor_start) << w << " workers";
  }
}

TEST(Executor, ScheduleRespectsDependenciesAndAccounting) {
  const HssMatrix h = small_hss(2048, 128, 30);
  const TaskGraph g = build_dag(h);
  ExecuteOptions o;
  o.workers = 3;
  const auto res = execute(g, h, o);
  const auto& s = res.stats;
  ASSERT_EQ(s.schedule.size(), g.size());
  std::map<TaskId, ScheduleRecord> by_id;
  for (const auto& r : s.schedule) by_id[r.id] = r;
  ASSERT_EQ(by_id.size(), g.size());
  for (const auto& t : g.tasks()) {
    for (TaskId d : t.deps) EXPECT_LE(by_id[d].end_ns, by_id[t.id].start_ns);
  }
  double per_task = 0.0;
  for (const auto& r : s.schedule) per_task += static_cast<double>(r.end_ns - r.start_ns) * 1e-9;
  double per_kind = 0.0;
  for (double k : s.kind_seconds) per_kind += k;
  EXPECT_NEAR(per_kind, per_task, 1e-9);
  EXPECT_NEAR(s.busy_total(), per_task, 1e-9);
  EXPECT_LE(per_task, 3 * s.makespan_seconds);
}

TEST(Executor, RandomizedOrdersAlwaysComplete) {
  const HssMatrix h = small_hss(1024, 64, 16);
  const TaskGraph g = build_dag(h);
  const UlvFactors reference = ulv_factor_hss(h);
  for (std::uint64_t seed = 1; seed <= 25; ++seed) {
    ExecuteOptions o;
    o.workers = 1 + static_cast<int>(seed % 4);
    o.shuffle_seed = seed;
    const auto res = execute(g, h, o);
    EXPECT_EQ(res.stats.schedule.size(), g.size());
    EXPECT_TRUE(res.factors == reference) << "seed " << seed;
  }
}

TEST(Executor, FailureCancelsExactlyTheDependents) {
  HssMatrix h = small_hss(1024, 128, 30);
  h.leaf_diag[5] = -h.leaf_diag[5];
  const TaskGraph g = build_dag(h);
  const auto reach = reachability(g);
  const TaskId failing = g.find(TaskKind::PartialFactor, 3, 5);
  for (int w : {1, 4}) {
    ExecuteOptions o;
    o.workers = w;
    const auto out = run_task_graph(g, h, o);
    ASSERT_TRUE(out.error);
    ASSERT_TRUE(out.failed_task.has_value());
    EXPECT_EQ(*out.failed_task, failing);
    std::vector<TaskId> want;
    for (TaskId k = 0; k < g.size(); ++k)
      if (reach[failing][k]) want.push_back(k);
    EXPECT_EQ(out.cancelled, want);
    std::set<TaskId> ran;
    for (const auto& r : out.stats.schedule) ran.insert(r.id);
    EXPECT_EQ(ran.size() + want.size() + 1, g.size());
    EXPECT_FALSE(ran.count(failing));
    try {
      execute(g, h, o);
      FAIL();
    } catch (const FactorizationError& e) {
      EXPECT_EQ(e.level(), 3);
      EXPECT_EQ(e.node(), 5);
    }
  }
}

TEST(Executor, SmallestFailingTaskIsReported) {
  HssMatrix h = small_hss(1024, 128, 30);
  h.leaf_diag[6] = -h.leaf_diag[6];
  h.leaf_diag[2] = -h.leaf_diag[2];
  const TaskGraph g = build_dag(h);
  ExecuteOptions o;
  o.workers = 2;
  const auto out = run_task_graph(g, h, o);
  ASSERT_TRUE(out.failed_task.has_value());
  EXPECT_EQ(*out.failed_task, g.find(TaskKind::PartialFactor, 3, 2));
}

TEST(Executor, RejectsBadInputs) {
  const HssMatrix h = small_hss(1024, 128, 30);
  ExecuteOptions o;
  o.workers = 0;
  EXPECT_THROW(execute(build_dag(h), h, o), std::invalid_argument);
  EXPECT_THROW(execute(build_dag(2), h, {}), std::invalid_argument);
}

TEST(Executor, ScheduleJsonLines) {
  const HssMatrix h = small_hss(512, 128, 30);
  const TaskGraph g = build_dag(h);
  const OwnerMap owners = assign_owners(g, 2);
  ExecuteOptions o;
  o.workers = 2;
  o.owners = &owners;
  const auto res = execute(g, h, o);
  std::ostringstream out;
  write_schedule_jsonl(out, res.stats);
  std::istringstream in(out.str());
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"id", "kind", "level", "node", "owner", "start_ns", "end_ns", "worker"}) {
      EXPECT_TRUE(j.contains(key)) << key;
    }
    const Task& t = g.task(j["id"].get<TaskId>());
    EXPECT_EQ(j["kind"].get<std::string>(), task_kind_name(t.kind));
    EXPECT_EQ(j["owner"].get<int>(), owners.owner_of(t));
    EXPECT_LE(j["start_ns"].get<std::int64_t>(), j["end_ns"].get<std::int64_t>());
    ++lines;
  }
  EXPECT_EQ(lines, g.size());
}
