#pragma once

#include <string>
#include <vector>

#include "hypercurv/bilevel.hpp"
#include "hypercurv/harness/config.hpp"
#include "hypercurv/harness/dataset.hpp"
#include "hypercurv/sharpness.hpp"

namespace hypercurv::harness {

Dataset load_dataset(const DataConfig& d);

struct TrainingOutcome {
  ModelConfig model;
  Split split;
  RunResult result;
  SharpnessReport report;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// Trains per cfg.mode. The telemetry sink sees every outer iteration as it finishes.
TrainingOutcome run_training(const RunConfig& cfg, const TelemetrySink& sink = {});

/// checkpoint.txt, sharpness_report.json and summary.json under dir.
void write_training_artifacts(const RunConfig& cfg, const TrainingOutcome& o, const std::string& dir);
std::string summary_json(const RunConfig& cfg, const TrainingOutcome& o);

struct CellMetrics {
  std::string label;  // curvature value or "learned"
  std::uint64_t seed = 0;
  double final_c = 0.0;
  double val_accuracy = 0.0;
  double sn_hat = 0.0;
  double l_sharp = 0.0;
  double top_eig = 0.0;
};

struct AblationResult {
  /// Grid cells in grid order, then the learned run, for each seed in turn.
  std::vector<CellMetrics> cells;
  /// Curvature-learning runs, one per seed.
  std::vector<RunResult> learned;
};

inline const std::vector<double> kAblationGrid{1e-4, 1e-2, 1e-1, 1.0};

/// Fixed-curvature SAM at every grid value plus a curvature-learning run, per seed.
/// The seed drives the dataset, the split and the initialisation.
AblationResult run_ablation(const RunConfig& base, const std::vector<double>& grid,
                            const std::vector<std::uint64_t>& seeds);

/// Seed-averaged rows: curvature_or_mode,val_accuracy,sn_hat,l_sharp,top_eig.
std::string ablation_csv(const AblationResult& r);

std::string format_real(double v);

}  // namespace hypercurv::harness
