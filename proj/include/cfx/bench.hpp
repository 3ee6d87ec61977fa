/*
 * Benchmark harness: run each generator over references that need a class
 * change, score the standard metric suite, and emit machine (CSV) plus
 * human (aligned table) reports.
 *
 * Determinism contract: per-reference tasks draw from counter-based
 * streams keyed by (config seed, task id), results land in task-id order,
 * and aggregation sums over that order, so reports are byte-identical
 * under any worker-thread count. Wall-clock timing is opt-in because it is
 * the one quantity that cannot be deterministic.
 */
#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cfx/generators.hpp"

namespace cfx {

// Fraction of the k nearest training rows (euclidean, ties broken by the
// lowest row index) whose PREDICTED label is the target. k = #rows scores
// against the whole set.
double metric_ynn(const Vec& cf, const Mat& rows,
                  const std::vector<int>& predicted, int target, int k = 5);

// Number of changed coordinates (|cf_i - ref_i| > 1e-9) that can be
// reverted alone while keeping the prediction on target.
int metric_redundancy(const Vec& cf, const Vec& ref,
                      const SplitClassifier& clf, int target);

// Mean pairwise euclidean distance; absent below two points.
std::optional<double> metric_diversity(const Mat& cfs);

// One-sided sign test: P(B >= wins) for B ~ Binomial(n, 1/2).
double sign_test_one_sided(int wins, int n);

enum class MethodKind {
  kPosterior,       // "ours": sample the (Laplace) posterior
  kWachter,         // optimize nll + gamma ||z - x||^2
  kOursOpt,         // optimize the coupled-prior quadratic + gamma nll
  kRegularized,     // wachter plus the prior-anchoring penalty
  kGrowingSpheres,
  kFace
};

MethodKind method_kind_from_name(const std::string& name);
std::string method_kind_name(MethodKind kind);

struct MethodSpec {
  MethodKind kind = MethodKind::kPosterior;
  std::string label;  // defaults to the kind name
  double alpha = 0.5;
  double gamma = 1.0;
  double gamma2 = 0.0;
  double lambda_div = 0.0;
  int adam_steps = 1000;
  double adam_lr = 0.05;
  bool mahalanobis = false;  // metric for growing_spheres / face
  int face_k = 20;
  GrowingSpheresParams gs;
  LaplaceConfig laplace;
};

struct BenchContext {
  const SplitClassifier* clf = nullptr;
  Mat rows;  // encoded training rows
  DataPrior prior;
  std::vector<bool> immutable_mask;            // may be empty
  std::optional<ActionabilityPlan> plan;       // nonactionable handling
};

struct BenchConfig {
  int target = 1;
  int n_references = 50;
  int count = 1;  // counterfactuals per reference
  int k_ynn = 5;
  double validity_threshold = 0.5;
  std::uint64_t seed = 0;
  int threads = 1;
  bool timing = false;  // wall-clock seconds; breaks byte-identity
  std::vector<MethodSpec> methods;
};

struct InstanceRecord {
  int task_id = 0;
  std::string method;
  int ref_row = 0;  // row index into the training table
  bool failed = false;
  std::string failure;
  int valid_points = 0;
  int total_points = 0;
  // means over this instance's valid points
  double l2 = 0.0;
  double linf = 0.0;
  double ynn = 0.0;
  double redundancy = 0.0;
  std::optional<double> diversity;
  double seconds = 0.0;
};

struct MethodReport {
  std::string method;
  int n = 0;         // instances attempted
  int failures = 0;  // instances that threw
  double success_rate = 0.0;  // instances with >= 1 valid point
  double mean_l2 = 0.0;
  double mean_linf = 0.0;
  double mean_ynn = 0.0;
  double mean_redundancy = 0.0;
  std::optional<double> mean_diversity;
  double mean_seconds = 0.0;
};

struct BenchReport {
  std::vector<MethodReport> methods;
  std::vector<InstanceRecord> records;
  std::vector<int> reference_rows;
  std::string note;  // set when the report is intentionally empty
};

BenchReport run_benchmark(const BenchContext& ctx, const BenchConfig& cfg);

// flat (method, metric, value, n, failures) rows, 17 significant digits
std::string report_csv(const BenchReport& report);
// aligned table: l2, linf, yNN, Redun., Div., t(s), success, n
std::string report_table(const BenchReport& report);
std::string records_csv(const BenchReport& report);

struct GridChoice {
  int index = -1;   // into the candidate spec list
  double success = 0.0;
  double mean_l2 = 0.0;
  bool met_threshold = false;  // success >= 0.99 reached by the choice
};

// Evaluate each candidate on a held-out reference batch: keep candidates
// at success >= 0.99 and pick the lowest mean l2 (first in grid order on
// ties); if none qualify, fall back to the highest success, flagged.
GridChoice grid_search(const BenchContext& ctx, const BenchConfig& base,
                       const std::vector<MethodSpec>& candidates);

}  // namespace cfx
