#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "hssulv/executor.hpp"
#include "hssulv/hss.hpp"
#include "hssulv/kernels.hpp"
#include "hssulv/taskgraph.hpp"

namespace hssulv {

inline constexpr int kCsvSchemaVersion = 1;
/// Dense-oracle comparisons run only up to this size.
inline constexpr Index kDenseOracleMaxN = 2048;

struct ExperimentConfig {
  KernelSpec kernel;
  Index n = 4096;
  Index nleaf = 256;
  Index max_rank = 100;
  Index upper_max_rank = 0;  // 0: same cap as the leaves
  double diagonal_shift = 0.0;
  int workers = 1;
  int nprocs = 1;
  std::uint64_t seed = 42;
  int repetitions = 5;
  std::string output;  // empty: stdout
  std::string format = "csv";

  /// Throws std::invalid_argument on an inconsistent config.
  void validate() const;
  int max_level() const;
  BuildOptions build_options() const;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// {"kernel": name, "constants": {...}} with only the constants used by that kernel.
nlohmann::json kernel_to_json(const KernelSpec& spec);
/// Missing constants keep their defaults; unknown constant names are rejected.
KernelSpec kernel_from_json(const nlohmann::json& j);

nlohmann::json config_to_json(const ExperimentConfig& cfg);
/// Keys present in `j` override `base`; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

struct TimingSummary {
  std::vector<double> samples;
  double mean = 0.0;
  std::optional<double> ci95;  // half-width, normal approximation; needs >= 2 samples
};

TimingSummary summarize(std::vector<double> samples);

struct ExperimentReport {
  ExperimentConfig config;
  double construct_error = 0.0;
  double solve_error = 0.0;
  std::optional<double> dense_solve_error;  // ||x - x_dense|| / ||x_dense||, N <= 2048
  Index achieved_max_rank = 0;
  TimingSummary build;
  TimingSummary factor;
  TimingSummary solve;
  std::size_t task_count = 0;
  ExecutionStats stats;  // from the last repetition
  CommTrace comm;
};

/// Builds, factorizes through the task executor and solves `repetitions` times.
ExperimentReport run_single(const ExperimentConfig& cfg);

/// ||x - x_dense|| / ||x_dense|| against a dense Cholesky solve of the exact kernel matrix.
double dense_solve_error(const UlvFactors& f, const KernelSpec& spec, const PointSet& ps,
                         double diagonal_shift, std::uint64_t seed);

nlohmann::json report_to_json(const ExperimentReport& r);
void write_report_csv(std::ostream& out, const std::vector<ExperimentReport>& reports);
std::string report_csv_header();

struct RankSweepRow {
  std::string kernel;
  Index n = 0;
  Index max_rank = 0;
  Index nleaf = 0;
  double construct_error = 0.0;
  double solve_error = 0.0;
  double build_seconds = 0.0;
  double factor_seconds = 0.0;
  bool ok = true;
  std::string message;
};

/// One row per (kernel, max_rank, nleaf); failures are recorded per row.
std::vector<RankSweepRow> rank_accuracy_sweep(const ExperimentConfig& base,
                                              const std::vector<KernelSpec>& kernels,
                                              const std::vector<std::pair<Index, Index>>& rank_leaf);
/// The (max_rank, nleaf) grid of the rank/kernel table.
std::vector<std::pair<Index, Index>> reference_rank_grid();

std::string rank_csv_header();
void write_rank_csv(std::ostream& out, const std::vector<RankSweepRow>& rows);
nlohmann::json rank_rows_to_json(const std::vector<RankSweepRow>& rows);

struct ScalingRow {
  Index n = 0;
  Index nleaf = 0;
  Index max_rank = 0;
  std::size_t task_count = 0;
  TimingSummary factor;
  double build_seconds = 0.0;
  bool ok = true;
  std::string message;
};

struct ScalingResult {
  std::vector<ScalingRow> rows;
  std::optional<double> exponent;  // slope of log(factor time) vs log(N), >= 2 successful rows
};

/// Least-squares slope of log(y) against log(x).
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

/// Builds once per size and times only the factorization, `repetitions` times.
ScalingResult scaling_sweep(const ExperimentConfig& base, const std::vector<Index>& sizes);

std::string scaling_csv_header();
void write_scaling_csv(std::ostream& out, const ScalingResult& result);
nlohmann::json scaling_to_json(const ScalingResult& result);

struct WorkerBreakdown {
  int worker = 0;
  double compute_seconds = 0.0;
  double overhead_seconds = 0.0;  // makespan - compute
};

struct BreakdownReport {
  ExperimentConfig config;
  TimingSummary makespan;
  TimingSummary compute;  // total task time per repetition
  std::vector<WorkerBreakdown> workers;  // averaged over repetitions
  std::array<double, kTaskKindCount> kind_seconds{};  // averaged over repetitions
  double leaf_dense_seconds = 0.0;  // leaf DiagProduct + PartialFactor, averaged
};

BreakdownReport breakdown_report(const ExperimentConfig& cfg);
nlohmann::json breakdown_to_json(const BreakdownReport& r);
std::string breakdown_csv_header();
void write_breakdown_csv(std::ostream& out, const BreakdownReport& r);

}  // namespace hssulv
