#pragma once

// Batch experiments: task grids planned by either method, disturbance sweeps
// of the resulting plans, error statistics, and CSV/JSON reports.

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <iosfwd>
#include <json.hpp>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "aslip/collocation.hpp"
#include "aslip/robust.hpp"
#include "aslip/sim.hpp"

namespace aslip {

/// Value lists whose Cartesian product is the task set. Task index order is
/// y0 slowest, then xd0, yf, and xdf fastest.
struct TaskGrid {
  std::vector<double> y0{1.05, 1.10, 1.15, 1.20, 1.25};
  std::vector<double> xd0{0.4, 0.6, 0.8, 1.0, 1.2};
  std::vector<double> yf{1.05, 1.10, 1.15, 1.20, 1.25};
  std::vector<double> xdf{0.4, 0.6, 0.8, 1.0, 1.2};

  /// Throws InvalidParameters on an empty list or a non-finite value.
  void validate() const;
  int size() const;
  BoundaryConditions task(int index) const;

  bool operator==(const TaskGrid&) const = default;
};

enum class Method { MinEffort, Robust };

std::string_view to_string(Method method);
/// Parses "min-effort" or "robust".
std::optional<Method> parse_method(std::string_view name);

/// Eleven evenly spaced ground offsets on [-0.1, 0.1], including 0.
std::vector<double> default_sweep();

struct ExperimentConfig {
  TaskGrid grid;
  Params params;
  SolverOptions solver;
  SimConfig sim;
  PhaseSet phases = make_phases(15, 80, 15);
  /// Disturbance cases optimized by the robust method.
  DisturbanceSet disturbances;
  int grid_points = 30;
  double regularization = 0.0;
  /// Ground offsets every plan is simulated over.
  std::vector<double> sweep = default_sweep();
  int jobs = 1;

  void validate() const;
};

nlohmann::json to_json(const ExperimentConfig& config);
/// Missing keys keep their defaults; unknown keys throw InvalidParameters.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Planning

struct TaskRecord {
  int index = 0;
  BoundaryConditions task;
  Method method = Method::MinEffort;
  SolveStatus status = SolveStatus::Error;
  int iterations = 0;
  double seconds = 0.0;      // wall clock, including waits for a shared solver
  double cpu_seconds = 0.0;  // this thread only
  double objective = 0.0;
  std::string plan_file;  // relative to the archive root, empty without a plan
  std::string message;
};

struct PlannedTask {
  TaskRecord record;
  std::optional<MotionPlan> plan;
};

/// Plans one task. Solver failures and invalid tasks are classified in the
/// record, never thrown.
PlannedTask plan_task(const BoundaryConditions& task, Method method, const ExperimentConfig& config);

struct GridRun {
  Method method = Method::MinEffort;
  std::vector<TaskRecord> records;  // one per task, in task order

  int converged() const;
};

/// Archive location of the plan for task `index`: `<root>/<method>/task_NNNN.json`.
std::filesystem::path plan_path(const std::filesystem::path& root, Method method, int index);

/// Plans every task of the grid on `config.jobs` workers, writes one plan
/// file per converged task and `<root>/<method>/log.csv`. Throws Io when a
/// file cannot be written.
GridRun run_grid(const ExperimentConfig& config, Method method, const std::filesystem::path& root);

/// Convergence log with one row per task.
void write_log(const GridRun& run, std::ostream& out);

// ---------------------------------------------------------------------------
// Sweeps

struct TaskPlan {
  int task = 0;
  Method method = Method::MinEffort;
  MotionPlan plan;
};

struct PlanRef {
  int task = 0;
  Method method = Method::MinEffort;
  std::filesystem::path path;
};

/// Plan files of an archive written by run_grid, in task order.
std::vector<PlanRef> list_archive(const std::filesystem::path& root, Method method);

struct SweepEntry {
  int task = 0;
  Method method = Method::MinEffort;
  BoundaryConditions target;
  double disturbance = 0.0;
  /// nullopt when the simulator itself failed; counted as a failure.
  std::optional<SimStatus> status;
  std::optional<double> apex_height;
  std::optional<double> apex_speed;
  std::optional<double> height_error;
  std::optional<double> speed_error;
  std::string diagnostic;

  bool failed() const { return !status || is_failure(*status); }
  bool operator==(const SweepEntry&) const = default;
};

struct SkippedPlan {
  int task = 0;
  Method method = Method::MinEffort;
  std::string diagnostic;

  bool operator==(const SkippedPlan&) const = default;
};

struct MethodSummary {
  Method method = Method::MinEffort;
  int cases = 0;
  int failures = 0;
  std::optional<double> failure_fraction;  // nullopt without cases
  /// Means over the (task, disturbance) pairs where both methods reach apex.
  std::optional<double> mean_height_error;
  std::optional<double> mean_speed_error;

  bool operator==(const MethodSummary&) const = default;
};

struct SweepReport {
  std::vector<double> disturbances;
  std::vector<SweepEntry> entries;  // ordered by task, method, disturbance
  std::vector<SkippedPlan> skipped;
  std::vector<MethodSummary> methods;
  int paired_cases = 0;
  /// Min-effort mean error over robust mean error, nullopt when undefined.
  std::optional<double> height_ratio;
  std::optional<double> speed_ratio;

  bool operator==(const SweepReport&) const = default;
};

/// Simulates every plan from its task's initial apex over every ground offset.
SweepReport sweep_plans(const std::vector<TaskPlan>& plans, const std::vector<double>& disturbances,
                        const SimConfig& sim = {}, int jobs = 1);

/// Loads the plans and sweeps them; unreadable plans are listed in `skipped`.
SweepReport run_sweep(const std::vector<PlanRef>& plans, const std::vector<double>& disturbances,
                      const ExperimentConfig& config);

/// Recomputes the method summaries and ratios from the entries.
void summarize(SweepReport& report);

// ---------------------------------------------------------------------------
// Output

enum class Format { Csv, Json };
std::optional<Format> parse_format(std::string_view name);

/// One row per entry; an empty report gives the header alone.
void write_csv(const SweepReport& report, std::ostream& out);
void write_summary_csv(const SweepReport& report, std::ostream& out);
nlohmann::json to_json(const SweepReport& report);
SweepReport report_from_json(const nlohmann::json& doc);

/// Writes `<dir>/report.csv` and `<dir>/summary.csv`, or `<dir>/report.json`.
/// Returns the files written.
std::vector<std::filesystem::path> emit_report(const SweepReport& report, Format format,
                                               const std::filesystem::path& dir);

/// Body path, set point, and leg force of the plan simulated from its task's
/// initial apex over ground at `disturbance`, sampled every `dt`.
std::vector<SimTrace::Sample> time_series(const MotionPlan& plan, double disturbance, const SimConfig& sim = {},
                                          double dt = 0.01);
void write_time_series(const std::vector<SimTrace::Sample>& samples, std::ostream& out);

/// RFC 4180 field quoting.
std::string csv_field(std::string_view value);
/// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

// ---------------------------------------------------------------------------
// Worker pool

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// thrown by any call is rethrown after all workers have stopped.
template <class Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  const int workers = std::max(1, std::min(jobs, n));
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_lock;
  auto work = [&] {
    for (int i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        const std::lock_guard<std::mutex> hold(error_lock);
        if (!error) error = std::current_exception();
        next = n;
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace aslip
