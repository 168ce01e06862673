#pragma once

#include <array>
#include <cstdint>
#include <exception>
#include <iosfwd>
#include <optional>
#include <vector>

#include "hssulv/taskgraph.hpp"
#include "hssulv/ulv.hpp"

namespace hssulv {

struct ScheduleRecord {
  TaskId id = 0;
  TaskKind kind = TaskKind::DiagProduct;
  int level = 0;
  Index node = 0;
  int owner = 0;
  std::int64_t start_ns = 0;  // relative to the start of execution
  std::int64_t end_ns = 0;
  int worker = 0;
};

struct ExecutionStats {
  std::array<double, kTaskKindCount> kind_seconds{};  // indexed by TaskKind
  std::vector<double> worker_busy_seconds;
  double makespan_seconds = 0.0;
  int max_concurrency = 0;
  std::vector<ScheduleRecord> schedule;  // completed tasks, ordered by start time

  double kind_total(TaskKind k) const { return kind_seconds[static_cast<std::size_t>(k)]; }
  double busy_total() const;
};

struct ExecuteOptions {
  int workers = 1;
  /// Ownership recorded in the schedule; defaults to round-robin over `workers`.
  const OwnerMap* owners = nullptr;
  /// Replaces the level-first priority with a seeded random one (liveness testing).
  std::optional<std::uint64_t> shuffle_seed;
};

struct ExecutionOutcome {
  UlvFactors factors;
  ExecutionStats stats;
  std::exception_ptr error;     // failure of the smallest-id failing task, if any
  std::optional<TaskId> failed_task;
  std::vector<TaskId> cancelled;  // tasks skipped because a dependency failed, ascending
};

/// Runs the factorization DAG on a pool of workers without throwing task errors.
ExecutionOutcome run_task_graph(const TaskGraph& g, const HssMatrix& h, const ExecuteOptions& opts = {});

struct ExecutionResult {
  UlvFactors factors;
  ExecutionStats stats;
};

/// Runs the DAG; rethrows the error of the smallest-id failing task.
ExecutionResult execute(const TaskGraph& g, const HssMatrix& h, const ExecuteOptions& opts = {});

/// One JSON object per line: id, kind, level, node, owner, start_ns, end_ns, worker.
void write_schedule_jsonl(std::ostream& out, const ExecutionStats& stats);

}  // namespace hssulv
