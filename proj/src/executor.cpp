#include "hssulv/executor.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <mutex>
#include <ostream>
#include <random>
#include <set>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace hssulv {

double ExecutionStats::busy_total() const {
  double total = 0.0;
  for (double s : worker_busy_seconds) total += s;
  return total;
}

namespace {

using Clock = std::chrono::steady_clock;
using Key = std::tuple<std::uint64_t, std::uint64_t, TaskId>;

struct WorkerQueue {
  std::mutex mutex;
  std::set<Key> ready;
};

class Run {
 public:
  Run(const TaskGraph& g, const HssMatrix& h, const ExecuteOptions& opts)
      : g_(g), h_(h), workers_(opts.workers), queues_(static_cast<std::size_t>(opts.workers)) {
    if (opts.workers < 1) throw std::invalid_argument("execute: workers must be at least 1");
    if (g.max_level() != h.max_level) throw std::invalid_argument("execute: graph/matrix mismatch");
    owners_ = opts.owners ? *opts.owners : assign_owners(g, opts.workers);

    keys_.resize(g.size());
    std::mt19937_64 rng(opts.shuffle_seed.value_or(0));
    for (const auto& t : g.tasks()) {
      const std::uint64_t primary =
          opts.shuffle_seed ? rng() : static_cast<std::uint64_t>(t.target_level());
      keys_[t.id] = Key{primary, static_cast<std::uint64_t>(t.id), t.id};
    }

    pending_ = std::vector<std::atomic<std::size_t>>(g.size());
    for (const auto& t : g.tasks()) pending_[t.id].store(t.deps.size());
    remaining_.store(g.size());

    const auto levels = static_cast<std::size_t>(h.max_level) + 1;
    out_.n = h.n;
    out_.nleaf = h.nleaf;
    out_.max_level = h.max_level;
    out_.levels.resize(levels);
    a_hat_.resize(levels);
    merged_.resize(levels);
    for (int l = 0; l <= h.max_level; ++l) {
      const auto count = static_cast<std::size_t>(h.node_count(l));
      a_hat_[static_cast<std::size_t>(l)].resize(count);
      merged_[static_cast<std::size_t>(l)].resize(count);
      if (l >= 1) out_.levels[static_cast<std::size_t>(l)].nodes.resize(count);
    }
    records_.resize(static_cast<std::size_t>(workers_));
    busy_.assign(static_cast<std::size_t>(workers_), 0.0);
  }

  ExecutionOutcome go() {
    start_ = Clock::now();
    for (const auto& t : g_.tasks()) {
      if (t.deps.empty()) push(owners_.owner_of(t) % workers_, t.id);
    }
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers_));
    for (int w = 0; w < workers_; ++w) pool.emplace_back([this, w] { work(w); });
    for (auto& th : pool) th.join();
    const double makespan = std::chrono::duration<double>(Clock::now() - start_).count();

    ExecutionOutcome res;
    res.stats.makespan_seconds = makespan;
    res.stats.max_concurrency = max_running_.load();
    res.stats.worker_busy_seconds = busy_;
    for (auto& r : records_) {
      for (const auto& rec : r) {
        res.stats.kind_seconds[static_cast<std::size_t>(rec.kind)] +=
            static_cast<double>(rec.end_ns - rec.start_ns) * 1e-9;
        res.stats.schedule.push_back(rec);
      }
    }
    std::sort(res.stats.schedule.begin(), res.stats.schedule.end(),
              [](const ScheduleRecord& a, const ScheduleRecord& b) {
                return std::tie(a.start_ns, a.id) < std::tie(b.start_ns, b.id);
              });
    res.error = error_;
    res.failed_task = failed_;
    res.cancelled.assign(cancelled_.begin(), cancelled_.end());
    if (!error_) {
      for (int l = 1; l <= h_.max_level; ++l) {
        auto& lv = out_.levels[static_cast<std::size_t>(l)];
        lv.merge_perm = merge_permutation(lv.nodes);
      }
      res.factors = std::move(out_);
    }
    return res;
  }

 private:
  void push(int worker, TaskId id) {
    {
      auto& q = queues_[static_cast<std::size_t>(worker)];
      std::lock_guard lk(q.mutex);
      q.ready.insert(keys_[id]);
    }
    ready_count_.fetch_add(1);
    { std::lock_guard lk(sleep_mutex_); }
    wake_.notify_all();
  }

  std::optional<TaskId> pop(int worker) {
    for (int k = 0; k < workers_; ++k) {
      auto& q = queues_[static_cast<std::size_t>((worker + k) % workers_)];
      std::lock_guard lk(q.mutex);
      if (!q.ready.empty()) {
        const TaskId id = std::get<2>(*q.ready.begin());
        q.ready.erase(q.ready.begin());
        ready_count_.fetch_sub(1);
        return id;
      }
    }
    return std::nullopt;
  }

  void work(int worker) {
    while (remaining_.load() > 0) {
      const auto id = pop(worker);
      if (!id) {
        std::unique_lock lk(sleep_mutex_);
        wake_.wait(lk, [this] { return ready_count_.load() > 0 || remaining_.load() == 0; });
        continue;
      }
      run(worker, *id);
    }
  }

  std::int64_t now_ns() const {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - start_).count();
  }

  void run(int worker, TaskId id) {
    const Task& t = g_.task(id);
    const int running = running_.fetch_add(1) + 1;
    int seen = max_running_.load();
    while (running > seen && !max_running_.compare_exchange_weak(seen, running)) {
    }
    ScheduleRecord rec;
    rec.id = id;
    rec.kind = t.kind;
    rec.level = t.level;
    rec.node = t.node;
    rec.owner = owners_.owner_of(t);
    rec.worker = worker;
    rec.start_ns = now_ns();
    std::exception_ptr err;
    try {
      perform(t);
    } catch (...) {
      err = std::current_exception();
    }
    rec.end_ns = now_ns();
    running_.fetch_sub(1);
    busy_[static_cast<std::size_t>(worker)] += static_cast<double>(rec.end_ns - rec.start_ns) * 1e-9;

    if (err) {
      fail(id, err);
    } else {
      records_[static_cast<std::size_t>(worker)].push_back(rec);
      for (TaskId s : t.successors) {
        if (pending_[s].fetch_sub(1) == 1) push(worker, s);
      }
    }
    finish_one();
  }

  void finish_one(std::size_t count = 1) {
    if (remaining_.fetch_sub(count) == count) {
      { std::lock_guard lk(sleep_mutex_); }
      wake_.notify_all();
    }
  }

  void fail(TaskId id, std::exception_ptr err) {
    std::size_t newly_cancelled = 0;
    {
      std::lock_guard lk(fail_mutex_);
      if (!failed_ || id < *failed_) {
        failed_ = id;
        error_ = err;
      }
      std::vector<TaskId> stack(g_.task(id).successors);
      while (!stack.empty()) {
        const TaskId s = stack.back();
        stack.pop_back();
        if (!cancelled_.insert(s).second) continue;
        ++newly_cancelled;
        for (TaskId next : g_.task(s).successors) stack.push_back(next);
      }
    }
    if (newly_cancelled > 0) finish_one(newly_cancelled);
  }

  void perform(const Task& t) {
    const auto l = static_cast<std::size_t>(t.level);
    const auto i = static_cast<std::size_t>(t.node);
    switch (t.kind) {
      case TaskKind::DiagProduct: {
        const Matrix& d = t.level == h_.max_level ? h_.leaf_diag[i] : merged_[l][i];
        a_hat_[l][i] = diagonal_product(d, h_.basis(t.level, t.node));
        if (t.level != h_.max_level) merged_[l][i] = Matrix();
        break;
      }
      case TaskKind::PartialFactor: {
        NodeFactors& nf = out_.levels[l].nodes[i];
        nf.basis = h_.basis(t.level, t.node);
        try {
          auto pf = partial_cholesky(a_hat_[l][i], nf.basis.redundant_dim);
          nf.l_rr = std::move(pf.l_rr);
          nf.l_sr = std::move(pf.l_sr);
          nf.ss_remainder = std::move(pf.ss_remainder);
        } catch (const NotPositiveDefinite& e) {
          throw FactorizationError(t.level, t.node, e.what());
        }
        a_hat_[l][i] = Matrix();
        break;
      }
      case TaskKind::Merge: {
        const auto& nodes = out_.levels[l].nodes;
        merged_[l - 1][i] = merge_children(nodes[2 * i].ss_remainder, nodes[2 * i + 1].ss_remainder,
                                           h_.coupling(t.level, t.node));
        break;
      }
      case TaskKind::RootFactor: {
        try {
          out_.root = cholesky(merged_[0][0]);
        } catch (const NotPositiveDefinite& e) {
          throw FactorizationError(0, 0, e.what());
        }
        merged_[0][0] = Matrix();
        break;
      }
    }
  }

  const TaskGraph& g_;
  const HssMatrix& h_;
  int workers_;
  OwnerMap owners_;
  std::vector<Key> keys_;
  std::vector<WorkerQueue> queues_;
  std::vector<std::atomic<std::size_t>> pending_;
  std::atomic<std::size_t> remaining_{0};
  std::atomic<long> ready_count_{0};
  std::atomic<int> running_{0};
  std::atomic<int> max_running_{0};
  std::mutex sleep_mutex_;
  std::condition_variable wake_;
  std::mutex fail_mutex_;
  std::optional<TaskId> failed_;
  std::exception_ptr error_;
  std::set<TaskId> cancelled_;
  Clock::time_point start_;

  UlvFactors out_;
  std::vector<std::vector<Matrix>> a_hat_;
  std::vector<std::vector<Matrix>> merged_;  // merged_[l][p]: assembled block of node (l, p)
  std::vector<std::vector<ScheduleRecord>> records_;
  std::vector<double> busy_;
};

}  // namespace

ExecutionOutcome run_task_graph(const TaskGraph& g, const HssMatrix& h, const ExecuteOptions& opts) {
  Run run(g, h, opts);
  return run.go();
}

ExecutionResult execute(const TaskGraph& g, const HssMatrix& h, const ExecuteOptions& opts) {
  auto outcome = run_task_graph(g, h, opts);
  if (outcome.error) std::rethrow_exception(outcome.error);
  return {std::move(outcome.factors), std::move(outcome.stats)};
}

void write_schedule_jsonl(std::ostream& out, const ExecutionStats& stats) {
  for (const auto& r : stats.schedule) {
    out << "{\"id\":" << r.id << ",\"kind\":\"" << task_kind_name(r.kind) << "\",\"level\":" << r.level
        << ",\"node\":" << r.node << ",\"owner\":" << r.owner << ",\"start_ns\":" << r.start_ns
        << ",\"end_ns\":" << r.end_ns << ",\"worker\":" << r.worker << "}\n";
  }
}

}  // namespace hssulv
