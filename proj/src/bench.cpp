#include "hssulv/bench.hpp"

#include <Eigen/Cholesky>

#include <charconv>
#include <chrono>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "hssulv/geometry.hpp"
#include "hssulv/ulv.hpp"

namespace hssulv {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Shortest round-trip decimal form.
std::string num(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

/// CSV field; quoted when it contains a separator, quote or newline.
std::string field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

json timing_json(const TimingSummary& t) {
  return {{"mean", t.mean}, {"ci95", opt_json(t.ci95)}, {"samples", t.samples}};
}

int level_count(Index n, Index nleaf) {
  int levels = 0;
  Index size = nleaf;
  while (size < n) {
    size *= 2;
    ++levels;
  }
  return size == n ? levels : -1;
}

PointSet points_for(const ExperimentConfig& cfg) { return generate_grid(cfg.n).with_leaf_size(cfg.nleaf); }

}  // namespace

void ExperimentConfig::validate() const {
  kernel.validate();
  if (nleaf < 1) throw std::invalid_argument("nleaf must be at least 1");
  if (!is_valid_grid_size(n)) {
    throw std::invalid_argument("N = " + std::to_string(n) + " is not a supported grid size (m^2 or 2 m^2)");
  }
  const int levels = level_count(n, nleaf);
  if (levels < 1) {
    throw std::invalid_argument("N = " + std::to_string(n) + " is not nleaf * 2^L with L >= 1 for nleaf = " +
                                std::to_string(nleaf));
  }
  if (max_rank < 1 || max_rank > nleaf) {
    throw std::invalid_argument("max_rank must lie in [1, nleaf]; got " + std::to_string(max_rank));
  }
  if (upper_max_rank < 0) throw std::invalid_argument("upper_max_rank must be non-negative");
  if (!(diagonal_shift >= 0.0) || !std::isfinite(diagonal_shift)) {
    throw std::invalid_argument("diag_shift must be finite and non-negative");
  }
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  if (nprocs < 1) throw std::invalid_argument("procs must be at least 1");
  if (repetitions < 1) throw std::invalid_argument("reps must be at least 1");
  if (format != "csv" && format != "json") throw std::invalid_argument("format must be csv or json");
}

int ExperimentConfig::max_level() const { return level_count(n, nleaf); }

BuildOptions ExperimentConfig::build_options() const {
  BuildOptions o;
  o.max_rank = max_rank;
  o.upper_max_rank = upper_max_rank;
  o.diagonal_shift = diagonal_shift;
  return o;
}

json kernel_to_json(const KernelSpec& spec) {
  json constants;
  switch (spec.kind) {
    case KernelKind::Laplace2D:
      constants = {{"epsilon", spec.epsilon}};
      break;
    case KernelKind::Yukawa:
      constants = {{"alpha", spec.alpha}, {"theta", spec.theta}};
      break;
    case KernelKind::Matern:
      constants = {{"sigma", spec.sigma}, {"mu", spec.mu}, {"rho", spec.rho}};
      break;
  }
  return {{"kernel", std::string(kernel_name(spec.kind))}, {"constants", constants}};
}

KernelSpec kernel_from_json(const json& j) {
  if (!j.is_object() || !j.contains("kernel")) throw std::invalid_argument("kernel config needs a \"kernel\" field");
  KernelSpec spec;
  switch (parse_kernel_kind(j.at("kernel").get<std::string>())) {
    case KernelKind::Laplace2D: spec = KernelSpec::laplace2d(); break;
    case KernelKind::Yukawa: spec = KernelSpec::yukawa(); break;
    case KernelKind::Matern: spec = KernelSpec::matern(); break;
  }
  if (j.contains("constants")) {
    for (const auto& [key, value] : j.at("constants").items()) {
      const double v = value.get<double>();
      if (key == "epsilon") spec.epsilon = v;
      else if (key == "alpha") spec.alpha = v;
      else if (key == "theta") spec.theta = v;
      else if (key == "sigma") spec.sigma = v;
      else if (key == "mu") spec.mu = v;
      else if (key == "rho") spec.rho = v;
      else throw std::invalid_argument("unknown kernel constant \"" + key + "\"");
    }
  }
  spec.validate();
  return spec;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j = kernel_to_json(cfg.kernel);
  j["N"] = cfg.n;
  j["nleaf"] = cfg.nleaf;
  j["max_rank"] = cfg.max_rank;
  j["upper_max_rank"] = cfg.upper_max_rank;
  j["diag_shift"] = cfg.diagonal_shift;
  j["workers"] = cfg.workers;
  j["procs"] = cfg.nprocs;
  j["seed"] = cfg.seed;
  j["reps"] = cfg.repetitions;
  j["out"] = cfg.output;
  j["format"] = cfg.format;
  return j;
}

ExperimentConfig config_from_json(const json& j, ExperimentConfig base) {
  if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
  ExperimentConfig cfg = std::move(base);
  if (j.contains("kernel")) {
    cfg.kernel = kernel_from_json(j);
  } else if (j.contains("constants")) {
    throw std::invalid_argument("\"constants\" given without \"kernel\"");
  }
  for (const auto& [key, value] : j.items()) {
    if (key == "kernel" || key == "constants") continue;
    if (key == "N") cfg.n = value.get<Index>();
    else if (key == "nleaf") cfg.nleaf = value.get<Index>();
    else if (key == "max_rank") cfg.max_rank = value.get<Index>();
    else if (key == "upper_max_rank") cfg.upper_max_rank = value.get<Index>();
    else if (key == "diag_shift") cfg.diagonal_shift = value.get<double>();
    else if (key == "workers") cfg.workers = value.get<int>();
    else if (key == "procs") cfg.nprocs = value.get<int>();
    else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
    else if (key == "reps") cfg.repetitions = value.get<int>();
    else if (key == "out") cfg.output = value.get<std::string>();
    else if (key == "format") cfg.format = value.get<std::string>();
    else throw std::invalid_argument("unknown config key \"" + key + "\"");
  }
  return cfg;
}

TimingSummary summarize(std::vector<double> samples) {
  TimingSummary t;
  t.samples = std::move(samples);
  if (t.samples.empty()) return t;
  double sum = 0.0;
  for (double s : t.samples) sum += s;
  const auto n = static_cast<double>(t.samples.size());
  t.mean = sum / n;
  if (t.samples.size() >= 2) {
    double ss = 0.0;
    for (double s : t.samples) ss += (s - t.mean) * (s - t.mean);
    t.ci95 = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
  }
  return t;
}

double dense_solve_error(const UlvFactors& f, const KernelSpec& spec, const PointSet& ps,
                         double diagonal_shift, std::uint64_t seed) {
  const Index n = ps.size();
  if (n > kDenseOracleMaxN) throw std::invalid_argument("dense_solve_error: N > 2048 is beyond the dense oracle");
  Matrix a = dense_block(spec, ps, {0, n}, {0, n});
  a.diagonal().array() += diagonal_shift;
  const Eigen::LLT<Matrix> llt(a);
  if (llt.info() != Eigen::Success) throw std::runtime_error("dense_solve_error: kernel matrix is not SPD");
  const Vector b = standard_normal(n, seed);
  const Vector x_dense = llt.solve(b);
  const Vector x = ulv_solve(f, b);
  return (x - x_dense).norm() / x_dense.norm();
}

ExperimentReport run_single(const ExperimentConfig& cfg) {
  cfg.validate();
  ExperimentReport r;
  r.config = cfg;
  const PointSet ps = points_for(cfg);
  const TaskGraph g = build_dag(cfg.max_level());
  const OwnerMap owners = assign_owners(g, cfg.nprocs);
  r.task_count = g.size();

  ExecuteOptions opts;
  opts.workers = cfg.workers;
  opts.owners = &owners;
  const Vector b = standard_normal(cfg.n, cfg.seed);

  std::vector<double> build_s, factor_s, solve_s;
  HssMatrix h;
  UlvFactors f;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    auto t0 = Clock::now();
    h = build_hss(cfg.kernel, ps, cfg.nleaf, cfg.build_options());
    build_s.push_back(seconds_since(t0));

    t0 = Clock::now();
    auto res = execute(g, h, opts);
    factor_s.push_back(seconds_since(t0));
    f = std::move(res.factors);
    r.stats = std::move(res.stats);

    t0 = Clock::now();
    const Vector x = ulv_solve(f, b);
    solve_s.push_back(seconds_since(t0));
  }
  r.build = summarize(std::move(build_s));
  r.factor = summarize(std::move(factor_s));
  r.solve = summarize(std::move(solve_s));

  for (int l = 1; l <= h.max_level; ++l) {
    for (Index i = 0; i < h.node_count(l); ++i) r.achieved_max_rank = std::max(r.achieved_max_rank, h.rank(l, i));
  }
  r.construct_error = construct_error(h, cfg.kernel, ps, cfg.seed);
  r.solve_error = solve_error(f, h, cfg.seed);
  if (cfg.n <= kDenseOracleMaxN) {
    r.dense_solve_error = dense_solve_error(f, cfg.kernel, ps, cfg.diagonal_shift, cfg.seed);
  }
  r.comm = simulate_comm(g, owners, h);
  return r;
}

json report_to_json(const ExperimentReport& r) {
  json kinds = json::object();
  for (std::size_t k = 0; k < kTaskKindCount; ++k) {
    kinds[std::string(task_kind_name(static_cast<TaskKind>(k)))] = r.stats.kind_seconds[k];
  }
  json comm_pairs = json::array();
  for (const auto& [pair, t] : r.comm.totals) {
    comm_pairs.push_back({{"src", pair.first}, {"dst", pair.second}, {"entries", t.entries}, {"events", t.events}});
  }
  return {
      {"schema_version", kCsvSchemaVersion},
      {"status", "ok"},
      {"config", config_to_json(r.config)},
      {"construct_error", r.construct_error},
      {"solve_error", r.solve_error},
      {"dense_solve_error", opt_json(r.dense_solve_error)},
      {"achieved_max_rank", r.achieved_max_rank},
      {"timings", {{"build_s", timing_json(r.build)}, {"factor_s", timing_json(r.factor)}, {"solve_s", timing_json(r.solve)}}},
      {"tasks", r.task_count},
      {"stats",
       {{"makespan_s", r.stats.makespan_seconds},
        {"max_concurrency", r.stats.max_concurrency},
        {"worker_busy_s", r.stats.worker_busy_seconds},
        {"kind_s", kinds}}},
      {"comm", {{"total_entries", r.comm.total_entries()}, {"events", r.comm.events.size()}, {"pairs", comm_pairs}}},
  };
}

std::string report_csv_header() {
  return "schema_version,kernel,N,nleaf,max_rank,workers,procs,seed,reps,construct_error,solve_error,"
         "dense_solve_error,build_s_mean,build_s_ci95,factor_s_mean,factor_s_ci95,solve_s_mean,solve_s_ci95,"
         "makespan_s,tasks,comm_entries,comm_events";
}

void write_report_csv(std::ostream& out, const std::vector<ExperimentReport>& reports) {
  out << report_csv_header() << '\n';
  for (const auto& r : reports) {
    const auto& c = r.config;
    out << kCsvSchemaVersion << ',' << kernel_name(c.kernel.kind) << ',' << c.n << ',' << c.nleaf << ','
        << c.max_rank << ',' << c.workers << ',' << c.nprocs << ',' << c.seed << ',' << c.repetitions << ','
        << num(r.construct_error) << ',' << num(r.solve_error) << ',' << opt_num(r.dense_solve_error) << ','
        << num(r.build.mean) << ',' << opt_num(r.build.ci95) << ',' << num(r.factor.mean) << ','
        << opt_num(r.factor.ci95) << ',' << num(r.solve.mean) << ',' << opt_num(r.solve.ci95) << ','
        << num(r.stats.makespan_seconds) << ',' << r.task_count << ',' << r.comm.total_entries() << ','
        << r.comm.events.size() << '\n';
  }
}

std::vector<std::pair<Index, Index>> reference_rank_grid() { return {{100, 256}, {200, 256}, {200, 512}, {400, 512}}; }

std::vector<RankSweepRow> rank_accuracy_sweep(const ExperimentConfig& base, const std::vector<KernelSpec>& kernels,
                                              const std::vector<std::pair<Index, Index>>& rank_leaf) {
  std::vector<RankSweepRow> rows;
  for (const auto& spec : kernels) {
    for (const auto& [rank, leaf] : rank_leaf) {
      RankSweepRow row;
      row.kernel = std::string(kernel_name(spec.kind));
      row.n = base.n;
      row.max_rank = rank;
      row.nleaf = leaf;
      try {
        ExperimentConfig cfg = base;
        cfg.kernel = spec;
        cfg.max_rank = rank;
        cfg.nleaf = leaf;
        cfg.validate();
        const PointSet ps = points_for(cfg);
        auto t0 = Clock::now();
        const HssMatrix h = build_hss(spec, ps, leaf, cfg.build_options());
        row.build_seconds = seconds_since(t0);
        row.construct_error = construct_error(h, spec, ps, cfg.seed);
        ExecuteOptions opts;
        opts.workers = cfg.workers;
        t0 = Clock::now();
        const auto res = execute(build_dag(h), h, opts);
        row.factor_seconds = seconds_since(t0);
        row.solve_error = solve_error(res.factors, h, cfg.seed);
      } catch (const std::exception& e) {
        row.ok = false;
        row.message = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string rank_csv_header() {
  return "schema_version,kernel,N,max_rank,nleaf,construct_error,solve_error,build_s,factor_s,status,message";
}

void write_rank_csv(std::ostream& out, const std::vector<RankSweepRow>& rows) {
  out << rank_csv_header() << '\n';
  for (const auto& r : rows) {
    out << kCsvSchemaVersion << ',' << r.kernel << ',' << r.n << ',' << r.max_rank << ',' << r.nleaf << ',';
    if (r.ok) {
      out << num(r.construct_error) << ',' << num(r.solve_error) << ',' << num(r.build_seconds) << ','
          << num(r.factor_seconds) << ",ok,";
    } else {
      out << ",,,,error," << field(r.message);
    }
    out << '\n';
  }
}

json rank_rows_to_json(const std::vector<RankSweepRow>& rows) {
  json arr = json::array();
  for (const auto& r : rows) {
    json row = {{"kernel", r.kernel}, {"N", r.n}, {"max_rank", r.max_rank}, {"nleaf", r.nleaf},
                {"status", r.ok ? "ok" : "error"}};
    if (r.ok) {
      row["construct_error"] = r.construct_error;
      row["solve_error"] = r.solve_error;
      row["build_s"] = r.build_seconds;
      row["factor_s"] = r.factor_seconds;
    } else {
      row["message"] = r.message;
    }
    arr.push_back(std::move(row));
  }
  return {{"schema_version", kCsvSchemaVersion}, {"sweep", "rank"}, {"rows", arr}};
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("loglog_slope: need >= 2 paired points");
  const auto n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw std::invalid_argument("loglog_slope: values must be positive");
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double denom = n * sxx - sx * sx;
  if (denom == 0.0) throw std::invalid_argument("loglog_slope: x values must differ");
  return (n * sxy - sx * sy) / denom;
}

ScalingResult scaling_sweep(const ExperimentConfig& base, const std::vector<Index>& sizes) {
  ScalingResult result;
  std::vector<double> xs, ys;
  for (Index n : sizes) {
    ScalingRow row;
    row.n = n;
    row.nleaf = base.nleaf;
    row.max_rank = base.max_rank;
    try {
      ExperimentConfig cfg = base;
      cfg.n = n;
      cfg.validate();
      const PointSet ps = points_for(cfg);
      auto t0 = Clock::now();
      const HssMatrix h = build_hss(cfg.kernel, ps, cfg.nleaf, cfg.build_options());
      row.build_seconds = seconds_since(t0);
      const TaskGraph g = build_dag(h);
      row.task_count = g.size();
      ExecuteOptions opts;
      opts.workers = cfg.workers;
      std::vector<double> samples;
      for (int rep = 0; rep < cfg.repetitions; ++rep) {
        t0 = Clock::now();
        const auto res = execute(g, h, opts);
        samples.push_back(seconds_since(t0));
      }
      row.factor = summarize(std::move(samples));
      xs.push_back(static_cast<double>(n));
      ys.push_back(row.factor.mean);
    } catch (const std::exception& e) {
      row.ok = false;
      row.message = e.what();
    }
    result.rows.push_back(std::move(row));
  }
  if (xs.size() >= 2) result.exponent = loglog_slope(xs, ys);
  return result;
}

std::string scaling_csv_header() {
  return "schema_version,N,nleaf,max_rank,tasks,factor_s_mean,factor_s_ci95,build_s,loglog_exponent,status,message";
}

void write_scaling_csv(std::ostream& out, const ScalingResult& result) {
  out << scaling_csv_header() << '\n';
  for (const auto& r : result.rows) {
    out << kCsvSchemaVersion << ',' << r.n << ',' << r.nleaf << ',' << r.max_rank << ',';
    if (r.ok) {
      out << r.task_count << ',' << num(r.factor.mean) << ',' << opt_num(r.factor.ci95) << ','
          << num(r.build_seconds) << ',' << opt_num(result.exponent) << ",ok,";
    } else {
      out << ",,,," << opt_num(result.exponent) << ",error," << field(r.message);
    }
    out << '\n';
  }
}

json scaling_to_json(const ScalingResult& result) {
  json arr = json::array();
  for (const auto& r : result.rows) {
    json row = {{"N", r.n}, {"nleaf", r.nleaf}, {"max_rank", r.max_rank}, {"status", r.ok ? "ok" : "error"}};
    if (r.ok) {
      row["tasks"] = r.task_count;
      row["factor_s"] = timing_json(r.factor);
      row["build_s"] = r.build_seconds;
    } else {
      row["message"] = r.message;
    }
    arr.push_back(std::move(row));
  }
  return {{"schema_version", kCsvSchemaVersion}, {"sweep", "scaling"}, {"rows", arr},
          {"loglog_exponent", opt_json(result.exponent)}};
}

BreakdownReport breakdown_report(const ExperimentConfig& cfg) {
  cfg.validate();
  BreakdownReport r;
  r.config = cfg;
  const PointSet ps = points_for(cfg);
  const HssMatrix h = build_hss(cfg.kernel, ps, cfg.nleaf, cfg.build_options());
  const TaskGraph g = build_dag(h);
  const OwnerMap owners = assign_owners(g, cfg.nprocs);
  ExecuteOptions opts;
  opts.workers = cfg.workers;
  opts.owners = &owners;

  const auto reps = static_cast<double>(cfg.repetitions);
  std::vector<double> makespans, computes;
  r.workers.resize(static_cast<std::size_t>(cfg.workers));
  for (int w = 0; w < cfg.workers; ++w) r.workers[static_cast<std::size_t>(w)].worker = w;
  for (int rep = 0; rep < cfg.repetitions; ++rep) {
    const auto res = execute(g, h, opts);
    const auto& s = res.stats;
    makespans.push_back(s.makespan_seconds);
    computes.push_back(s.busy_total());
    for (std::size_t w = 0; w < r.workers.size(); ++w) {
      r.workers[w].compute_seconds += s.worker_busy_seconds[w] / reps;
      r.workers[w].overhead_seconds += (s.makespan_seconds - s.worker_busy_seconds[w]) / reps;
    }
    for (std::size_t k = 0; k < kTaskKindCount; ++k) r.kind_seconds[k] += s.kind_seconds[k] / reps;
    for (const auto& rec : s.schedule) {
      if (rec.level == h.max_level &&
          (rec.kind == TaskKind::DiagProduct || rec.kind == TaskKind::PartialFactor)) {
        r.leaf_dense_seconds += static_cast<double>(rec.end_ns - rec.start_ns) * 1e-9 / reps;
      }
    }
  }
  r.makespan = summarize(std::move(makespans));
  r.compute = summarize(std::move(computes));
  return r;
}

json breakdown_to_json(const BreakdownReport& r) {
  json workers = json::array();
  for (const auto& w : r.workers) {
    workers.push_back({{"worker", w.worker}, {"compute_s", w.compute_seconds}, {"overhead_s", w.overhead_seconds}});
  }
  json kinds = json::object();
  for (std::size_t k = 0; k < kTaskKindCount; ++k) {
    kinds[std::string(task_kind_name(static_cast<TaskKind>(k)))] = r.kind_seconds[k];
  }
  return {{"schema_version", kCsvSchemaVersion},
          {"sweep", "breakdown"},
          {"config", config_to_json(r.config)},
          {"makespan_s", timing_json(r.makespan)},
          {"compute_s", timing_json(r.compute)},
          {"workers", workers},
          {"kind_s", kinds},
          {"leaf_dense_s", r.leaf_dense_seconds}};
}

std::string breakdown_csv_header() { return "schema_version,worker,compute_s,overhead_s,makespan_s_mean"; }

void write_breakdown_csv(std::ostream& out, const BreakdownReport& r) {
  out << breakdown_csv_header() << '\n';
  for (const auto& w : r.workers) {
    out << kCsvSchemaVersion << ',' << w.worker << ',' << num(w.compute_seconds) << ',' << num(w.overhead_seconds)
        << ',' << num(r.makespan.mean) << '\n';
  }
}

}  // namespace hssulv
