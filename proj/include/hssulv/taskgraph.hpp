#pragma once

#include <cstddef>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "hssulv/hss.hpp"

namespace hssulv {

enum class TaskKind { DiagProduct = 0, PartialFactor = 1, Merge = 2, RootFactor = 3 };
inline constexpr std::size_t kTaskKindCount = 4;

std::string_view task_kind_name(TaskKind kind);

using TaskId = std::size_t;

/// One block-granular step of the HSS-ULV factorization.
///
/// DiagProduct and PartialFactor act on node (level, node). Merge(level, node) assembles
/// the children (level, 2 node) and (level, 2 node + 1) into parent (level - 1, node).
/// RootFactor has level 0, node 0.
struct Task {
  TaskId id = 0;
  TaskKind kind = TaskKind::DiagProduct;
  int level = 0;
  Index node = 0;
  std::vector<TaskId> deps;
  std::vector<TaskId> successors;

  /// Level of the block this task writes; Merge(l, p) writes at l - 1.
  int target_level() const { return kind == TaskKind::Merge ? level - 1 : level; }
};

class TaskGraph {
 public:
  explicit TaskGraph(int max_level);

  int max_level() const { return max_level_; }
  std::size_t size() const { return tasks_.size(); }
  const std::vector<Task>& tasks() const { return tasks_; }
  const Task& task(TaskId id) const { return tasks_.at(id); }
  /// Throws std::out_of_range when no such task exists.
  TaskId find(TaskKind kind, int level, Index node) const;
  std::size_t edge_count() const;

 private:
  friend TaskGraph build_dag(int max_level);
  TaskId add(TaskKind kind, int level, Index node, std::vector<TaskId> deps);

  int max_level_;
  std::vector<Task> tasks_;
  std::map<std::tuple<int, int, Index>, TaskId> index_;
};

/// Task count 2 (2^(L+1) - 2) + (2^L - 1) + 1.
std::size_t expected_task_count(int max_level);

TaskGraph build_dag(int max_level);
TaskGraph build_dag(const HssMatrix& h);

/// Kahn ordering; throws std::logic_error if the graph has a cycle.
std::vector<TaskId> topological_order(const TaskGraph& g);

/// Simulated process ownership: leaves round-robin, each parent inherits its left child's owner.
struct OwnerMap {
  int nprocs = 1;
  std::vector<std::vector<int>> assignment;  // assignment[level][node], levels 0..max_level

  int owner(int level, Index node) const;
  /// Owner of the node a task writes.
  int owner_of(const Task& t) const;
};

OwnerMap assign_owners(const TaskGraph& g, int nprocs);

struct CommEvent {
  TaskId task = 0;     // consuming task
  std::string block;   // label of the transferred block
  int level = 0;       // level of the consuming task
  int src = 0;
  int dst = 0;
  Index entries = 0;   // payload in matrix entries
};

struct CommTotals {
  Index entries = 0;
  Index events = 0;
};

struct CommTrace {
  std::vector<CommEvent> events;
  std::map<std::pair<int, int>, CommTotals> totals;  // keyed by (src, dst)

  Index total_entries() const;
  Index events_at_level(int level) const;
};

/// One event per dependency edge whose endpoints have different owners; the payload is the
/// size of the block carried by that edge.
CommTrace simulate_comm(const TaskGraph& g, const OwnerMap& owners, const HssMatrix& h);

/// CSV with header "src,dst,entries,events", one row per rank pair.
void write_comm_csv(std::ostream& out, const CommTrace& trace);

}  // namespace hssulv
