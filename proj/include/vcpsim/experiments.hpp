// Suite-level experiments: the eps_c sweep, the module ablation ladder, the
// staleness grid, and the budget gate. Scenes run in parallel up to the
// configured worker count; aggregation is an ordered fold over scene index,
// so outputs are byte-identical for any worker count.
#pragma once

#include <string>
#include <vector>

#include "vcpsim/config.hpp"
#include "vcpsim/eval.hpp"
#include "vcpsim/suite.hpp"

namespace vcpsim {

// Aggregated outcome of running one round configuration over a suite.
struct SuiteResult {
  double ap50 = 0.0;
  double ap70 = 0.0;
  double mean_mbps = 0.0;          // per-collaborator link rate
  std::size_t feature_bytes = 0;   // summed over scenes and collaborators
  std::size_t value_payload_bytes = 0;  // feature bytes minus headers/coords
  std::size_t selected_cells = 0;
  std::size_t truth_count = 0;
};

struct SuiteRunOptions {
  double staleness_ms = 0.0;
  int workers = 1;
};

SuiteResult run_suite(const std::vector<SuiteScene>& suite,
                      const ExperimentConfig& cfg, const RoundConfig& rc,
                      const SuiteRunOptions& options = {});

// One record per (eps_c, late fusion on/off), sorted by eps_c then flag.
std::vector<SweepRecord> sweep_epsilon_c(const ExperimentConfig& cfg,
                                         const std::vector<SuiteScene>& suite);

struct AblationRow {
  std::string label;
  double ap50 = 0.0;
  double ap70 = 0.0;
  double mbps = 0.0;
  std::size_t feature_bytes = 0;
  std::size_t value_payload_bytes = 0;
};

// The six-step ladder: none, channel compression, fp16, supply mask,
// demand mask, late fusion.
std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg,
                                      const std::vector<SuiteScene>& suite);
std::string ablation_to_csv(const std::vector<AblationRow>& rows);

struct LatencyRow {
  std::string mode;  // "fused" or "ego_only"
  double latency_ms = 0.0;
  double ap50 = 0.0;
  double ap70 = 0.0;
  double mbps = 0.0;
};

// Staleness grid over the motion suite plus an ego-only baseline row.
std::vector<LatencyRow> run_latency_grid(const ExperimentConfig& cfg,
                                         const std::vector<SuiteScene>& motion_suite);
std::string latency_rows_to_csv(const std::vector<LatencyRow>& rows);

struct BudgetOutcome {
  double measured_mbps = 0.0;
  bool pass = false;  // boundary inclusive
  bool has_recommendation = false;
  double recommended_eps_c = 0.0;  // smallest grid eps_c that passes
};

BudgetOutcome check_budget(const ExperimentConfig& cfg,
                           const std::vector<SuiteScene>& suite);
std::string budget_report(const BudgetOutcome& outcome,
                          const ExperimentConfig& cfg);

}  // namespace vcpsim
