#include "hssulv/taskgraph.hpp"

#include <ostream>
#include <queue>
#include <stdexcept>
#include <tuple>

namespace hssulv {

std::string_view task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::DiagProduct: return "DiagProduct";
    case TaskKind::PartialFactor: return "PartialFactor";
    case TaskKind::Merge: return "Merge";
    case TaskKind::RootFactor: return "RootFactor";
  }
  return "Unknown";
}

TaskGraph::TaskGraph(int max_level) : max_level_(max_level) {
  if (max_level < 1 || max_level > 24) {
    throw std::invalid_argument("TaskGraph: max_level must lie in [1, 24]");
  }
}

TaskId TaskGraph::add(TaskKind kind, int level, Index node, std::vector<TaskId> deps) {
  Task t;
  t.id = tasks_.size();
  t.kind = kind;
  t.level = level;
  t.node = node;
  t.deps = std::move(deps);
  for (TaskId d : t.deps) tasks_[d].successors.push_back(t.id);
  index_[{static_cast<int>(kind), level, node}] = t.id;
  tasks_.push_back(std::move(t));
  return tasks_.back().id;
}

TaskId TaskGraph::find(TaskKind kind, int level, Index node) const {
  const auto it = index_.find({static_cast<int>(kind), level, node});
  if (it == index_.end()) {
    throw std::out_of_range(std::string("no task ") + std::string(task_kind_name(kind)) + "(" +
                            std::to_string(level) + ", " + std::to_string(node) + ")");
  }
  return it->second;
}

std::size_t TaskGraph::edge_count() const {
  std::size_t edges = 0;
  for (const auto& t : tasks_) edges += t.deps.size();
  return edges;
}

std::size_t expected_task_count(int max_level) {
  const std::size_t leaves = std::size_t{1} << max_level;
  return 2 * (2 * leaves - 2) + (leaves - 1) + 1;
}

TaskGraph build_dag(int max_level) {
  TaskGraph g(max_level);
  std::vector<TaskId> merges_above;  // Merge(l + 1, i) for every node i of level l
  for (int l = max_level; l >= 1; --l) {
    const Index count = Index{1} << l;
    std::vector<TaskId> diag(static_cast<std::size_t>(count));
    std::vector<TaskId> partial(static_cast<std::size_t>(count));
    for (Index i = 0; i < count; ++i) {
      std::vector<TaskId> deps;
      if (l < max_level) deps.push_back(merges_above[static_cast<std::size_t>(i)]);
      diag[static_cast<std::size_t>(i)] = g.add(TaskKind::DiagProduct, l, i, std::move(deps));
    }
    for (Index i = 0; i < count; ++i) {
      partial[static_cast<std::size_t>(i)] =
          g.add(TaskKind::PartialFactor, l, i, {diag[static_cast<std::size_t>(i)]});
    }
    merges_above.assign(static_cast<std::size_t>(count / 2), 0);
    for (Index p = 0; p < count / 2; ++p) {
      merges_above[static_cast<std::size_t>(p)] =
          g.add(TaskKind::Merge, l, p,
                {partial[static_cast<std::size_t>(2 * p)], partial[static_cast<std::size_t>(2 * p + 1)]});
    }
  }
  g.add(TaskKind::RootFactor, 0, 0, {merges_above.front()});
  return g;
}

TaskGraph build_dag(const HssMatrix& h) { return build_dag(h.max_level); }

std::vector<TaskId> topological_order(const TaskGraph& g) {
  std::vector<std::size_t> indegree(g.size());
  for (const auto& t : g.tasks()) indegree[t.id] = t.deps.size();
  std::queue<TaskId> ready;
  for (const auto& t : g.tasks()) {
    if (indegree[t.id] == 0) ready.push(t.id);
  }
  std::vector<TaskId> order;
  order.reserve(g.size());
  while (!ready.empty()) {
    const TaskId id = ready.front();
    ready.pop();
    order.push_back(id);
    for (TaskId s : g.task(id).successors) {
      if (--indegree[s] == 0) ready.push(s);
    }
  }
  if (order.size() != g.size()) throw std::logic_error("task graph contains a cycle");
  return order;
}

int OwnerMap::owner(int level, Index node) const {
  return assignment.at(static_cast<std::size_t>(level)).at(static_cast<std::size_t>(node));
}

int OwnerMap::owner_of(const Task& t) const {
  switch (t.kind) {
    case TaskKind::Merge: return owner(t.level - 1, t.node);
    case TaskKind::RootFactor: return owner(0, 0);
    default: return owner(t.level, t.node);
  }
}

OwnerMap assign_owners(const TaskGraph& g, int nprocs) {
  if (nprocs < 1) throw std::invalid_argument("assign_owners: nprocs must be at least 1");
  OwnerMap m;
  m.nprocs = nprocs;
  const int top = g.max_level();
  m.assignment.resize(static_cast<std::size_t>(top) + 1);
  auto& leaves = m.assignment[static_cast<std::size_t>(top)];
  leaves.resize(std::size_t{1} << top);
  for (std::size_t i = 0; i < leaves.size(); ++i) leaves[i] = static_cast<int>(i % static_cast<std::size_t>(nprocs));
  for (int l = top - 1; l >= 0; --l) {
    auto& level = m.assignment[static_cast<std::size_t>(l)];
    const auto& below = m.assignment[static_cast<std::size_t>(l) + 1];
    level.resize(std::size_t{1} << l);
    for (std::size_t i = 0; i < level.size(); ++i) level[i] = below[2 * i];
  }
  return m;
}

Index CommTrace::total_entries() const {
  Index total = 0;
  for (const auto& [pair, t] : totals) total += t.entries;
  return total;
}

Index CommTrace::events_at_level(int level) const {
  Index count = 0;
  for (const auto& e : events) count += e.level == level ? 1 : 0;
  return count;
}

namespace {

std::string label(const char* name, int level, Index node) {
  return std::string(name) + "(" + std::to_string(level) + "," + std::to_string(node) + ")";
}

}  // namespace

CommTrace simulate_comm(const TaskGraph& g, const OwnerMap& owners, const HssMatrix& h) {
  if (g.max_level() != h.max_level) throw std::invalid_argument("simulate_comm: graph/matrix mismatch");
  CommTrace trace;
  for (const auto& t : g.tasks()) {
    const int dst = owners.owner_of(t);
    for (TaskId d : t.deps) {
      const Task& producer = g.task(d);
      const int src = owners.owner_of(producer);
      if (src == dst) continue;
      CommEvent e;
      e.task = t.id;
      e.level = t.level;
      e.src = src;
      e.dst = dst;
      switch (producer.kind) {
        case TaskKind::DiagProduct: {
          const Index dim = h.basis(producer.level, producer.node).dim();
          e.block = label("AHAT", producer.level, producer.node);
          e.entries = dim * dim;
          break;
        }
        case TaskKind::PartialFactor: {
          const Index k = h.rank(producer.level, producer.node);
          e.block = label("SS", producer.level, producer.node);
          e.entries = k * k;
          break;
        }
        case TaskKind::Merge: {
          const Index dim = h.rank(producer.level, 2 * producer.node) +
                            h.rank(producer.level, 2 * producer.node + 1);
          e.block = label("A", producer.level - 1, producer.node);
          e.entries = dim * dim;
          break;
        }
        case TaskKind::RootFactor:
          throw std::logic_error("RootFactor has no successors");
      }
      auto& tot = trace.totals[{src, dst}];
      tot.entries += e.entries;
      tot.events += 1;
      trace.events.push_back(std::move(e));
    }
  }
  return trace;
}

void write_comm_csv(std::ostream& out, const CommTrace& trace) {
  out << "src,dst,entries,events\n";
  for (const auto& [pair, t] : trace.totals) {
    out << pair.first << ',' << pair.second << ',' << t.entries << ',' << t.events << '\n';
  }
}

}  // namespace hssulv
