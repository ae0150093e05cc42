#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "harsanyi/dataset.hpp"
#include "harsanyi/estimators.hpp"
#include "harsanyi/explain.hpp"

namespace harsanyi {

// A convergence run, stored as JSON. Every field has a default so a spec
// file only needs to name what differs.
struct ExperimentSpec {
  std::string dataset;
  std::string model;
  std::string label_column = "label";
  std::vector<std::string> categorical_columns;
  std::vector<EstimatorKind> estimators;
  std::vector<std::uint64_t> budgets;
  int trials = 50;
  // First `samples` rows of the dataset are explained.
  int samples = 10;
  std::uint64_t seed = 0;
  // Empty means the mode recorded in the model.
  std::optional<AndMode> mode;
  // Empty means the ground-truth label of each row.
  std::optional<int> class_index;
  std::string csv_out;
  std::string summary_out;

  void validate() const;
};

std::string to_json(const ExperimentSpec& spec);
ExperimentSpec parse_experiment_spec(const std::string& json);
ExperimentSpec load_experiment_spec(const std::string& path);

struct ConvergenceRow {
  std::string estimator;
  std::uint64_t budget = 0;
  int trial = 0;
  double rmse = 0.0;  // mean over samples
};

struct ConvergenceResult {
  std::vector<ConvergenceRow> rows;
  // Oracle calls spent by estimators, summed over every run.
  std::uint64_t estimator_inferences = 0;
  // Oracle calls spent computing brute-force truth.
  std::uint64_t oracle_inferences = 0;
  // KernelSHAP draws that were singular and redrawn.
  std::uint64_t rank_redraws = 0;
  int samples = 0;
  int players = 0;
};

// Seed of one (estimator, trial, sample) run.
std::uint64_t estimator_seed(std::uint64_t master, EstimatorKind kind, int trial, int sample);

// In-memory core: brute-force truth once per sample, every estimator over
// the budget grid and trials, then one `harsanyinet` row at budget 1.
// Requires at most 16 players.
ConvergenceResult run_convergence(const AnyModel& model, const Dataset& data,
                                  const ExperimentSpec& spec);

// Loads model and data named by the spec, runs, and writes csv_out and
// summary_out when they are set.
ConvergenceResult run_convergence_experiment(const ExperimentSpec& spec);

void write_convergence_csv(std::ostream& out, const ConvergenceResult& result);
void write_convergence_summary(std::ostream& out, const ExperimentSpec& spec,
                               const ConvergenceResult& result);

}  // namespace harsanyi
