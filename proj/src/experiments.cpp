#include "vcpsim/experiments.hpp"

#include <atomic>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <thread>

namespace vcpsim {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

void parallel_for(int n, int workers, const std::function<void(int)>& fn) {
  if (workers <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> threads;
  const int count = std::min(workers, n);
  threads.reserve(count);
  for (int w = 0; w < count; ++w) {
    threads.emplace_back([&]() {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n) break;
        fn(i);
      }
    });
  }
  for (std::thread& t : threads) t.join();
}

struct SceneOutcome {
  MatchPool pool50;
  MatchPool pool70;
  std::size_t link_bytes = 0;
  std::size_t collaborator_frames = 0;
  std::size_t feature_bytes = 0;
  std::size_t value_payload_bytes = 0;
  std::size_t selected_cells = 0;
  std::size_t truths = 0;
};

SceneOutcome run_scene(const SuiteScene& ss, const ExperimentConfig& cfg,
                       const RoundConfig& base_rc,
                       const SuiteRunOptions& options) {
  RoundConfig rc = base_rc;
  if (ss.family == Family::kFalsePositive) {
    rc.spurious_count = cfg.fp_injection_count;
    rc.spurious_conf = cfg.fp_injection_conf;
  } else {
    rc.spurious_count = 0;
  }

  const RoundTrace trace =
      options.staleness_ms > 0.0
          ? run_with_staleness(ss.scene, ss.ego, rc, options.staleness_ms)
          : run_round(ss.scene, ss.ego, rc);

  const SceneAgent* ego_agent = ss.scene.find_agent(ss.ego);
  const Pose2 world_to_ego = inverse(ego_agent->pose);
  std::vector<BevBox> truths;
  for (const SceneObject& obj : ss.scene.objects_at(ss.scene.timestamp)) {
    truths.push_back(transform_box(world_to_ego, obj.shape));
  }

  SceneOutcome out;
  out.pool50.add(trace.output(), truths, 0.5);
  out.pool70.add(trace.output(), truths, 0.7);
  out.truths = truths.size();

  const std::size_t scales = rc.grid.strides.size();
  for (const CollaboratorReport& c : trace.collaborators) {
    out.link_bytes += c.bytes.link_bytes_to_ego();
    out.feature_bytes += c.bytes.feature_bytes;
    out.value_payload_bytes += c.bytes.feature_bytes - kHeaderBytes -
                               scales * kScaleHeaderBytes -
                               4 * c.feature_entries;
    out.selected_cells += c.feature_entries;
    ++out.collaborator_frames;
  }
  return out;
}

}  // namespace

SuiteResult run_suite(const std::vector<SuiteScene>& suite,
                      const ExperimentConfig& cfg, const RoundConfig& rc,
                      const SuiteRunOptions& options) {
  std::vector<SceneOutcome> outcomes(suite.size());
  parallel_for(static_cast<int>(suite.size()), options.workers,
               [&](int i) { outcomes[i] = run_scene(suite[i], cfg, rc, options); });

  MatchPool pool50, pool70;
  SuiteResult result;
  std::size_t link_bytes = 0, frames = 0;
  for (const SceneOutcome& o : outcomes) {
    pool50.merge(o.pool50);
    pool70.merge(o.pool70);
    link_bytes += o.link_bytes;
    frames += o.collaborator_frames;
    result.feature_bytes += o.feature_bytes;
    result.value_payload_bytes += o.value_payload_bytes;
    result.selected_cells += o.selected_cells;
    result.truth_count += o.truths;
  }
  result.ap50 = pool50.ap();
  result.ap70 = pool70.ap();
  result.mean_mbps =
      frames == 0 ? 0.0
                  : bytes_to_mbps(static_cast<double>(link_bytes) /
                                      static_cast<double>(frames),
                                  cfg.rate_hz);
  return result;
}

std::vector<SweepRecord> sweep_epsilon_c(const ExperimentConfig& cfg,
                                         const std::vector<SuiteScene>& suite) {
  if (suite.size() < 20) {
    throw std::invalid_argument(
        "sweep_epsilon_c: needs at least 20 scenes in the suite");
  }
  std::vector<SweepRecord> records;
  const double latency = total_latency_ms(cfg.latency);
  for (double eps_c : cfg.eps_c_grid) {
    for (bool late : {false, true}) {
      RoundConfig rc = cfg.round;
      rc.eps_c = eps_c;
      rc.late_enabled = late;
      rc.naive_late = false;
      SuiteRunOptions options;
      options.workers = cfg.workers;
      const SuiteResult res = run_suite(suite, cfg, rc, options);
      SweepRecord rec;
      rec.eps_c = eps_c;
      rec.late_fusion = late;
      rec.ap50 = res.ap50;
      rec.ap70 = res.ap70;
      rec.mbps = res.mean_mbps;
      rec.latency_ms = latency;
      records.push_back(rec);
    }
  }
  return records;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& cfg,
                                      const std::vector<SuiteScene>& suite) {
  struct Step {
    const char* label;
    int c0;
    ValuePrecision precision;
    bool supply;
    bool demand;
    bool late;
  };
  const Step steps[] = {
      {"none", 1, ValuePrecision::kFloat32, false, false, false},
      {"autoencoder", cfg.round.c0, ValuePrecision::kFloat32, false, false,
       false},
      {"fp16", cfg.round.c0, ValuePrecision::kHalf, false, false, false},
      {"supply", cfg.round.c0, ValuePrecision::kHalf, true, false, false},
      {"demand", cfg.round.c0, ValuePrecision::kHalf, true, true, false},
      {"late_fusion", cfg.round.c0, ValuePrecision::kHalf, true, true, true},
  };

  std::vector<AblationRow> rows;
  for (const Step& step : steps) {
    RoundConfig rc = cfg.round;
    rc.c0 = step.c0;
    rc.precision = step.precision;
    rc.use_supply = step.supply;
    rc.use_demand = step.demand;
    rc.late_enabled = step.late;
    rc.naive_late = false;
    SuiteRunOptions options;
    options.workers = cfg.workers;
    const SuiteResult res = run_suite(suite, cfg, rc, options);
    AblationRow row;
    row.label = step.label;
    row.ap50 = res.ap50;
    row.ap70 = res.ap70;
    row.mbps = res.mean_mbps;
    row.feature_bytes = res.feature_bytes;
    row.value_payload_bytes = res.value_payload_bytes;
    rows.push_back(row);
  }
  return rows;
}

std::string ablation_to_csv(const std::vector<AblationRow>& rows) {
  std::string out = "label,ap50,ap70,mbps,feature_bytes,value_payload_bytes\n";
  for (const AblationRow& r : rows) {
    out += r.label + "," + format_double(r.ap50) + "," +
           format_double(r.ap70) + "," + format_double(r.mbps) + "," +
           std::to_string(r.feature_bytes) + "," +
           std::to_string(r.value_payload_bytes) + "\n";
  }
  return out;
}

std::vector<LatencyRow> run_latency_grid(
    const ExperimentConfig& cfg, const std::vector<SuiteScene>& motion_suite) {
  std::vector<LatencyRow> rows;

  RoundConfig ego_only = cfg.round;
  ego_only.max_collaborators = 0;
  ego_only.late_enabled = false;
  SuiteRunOptions options;
  options.workers = cfg.workers;
  const SuiteResult base = run_suite(motion_suite, cfg, ego_only, options);
  rows.push_back({"ego_only", 0.0, base.ap50, base.ap70, base.mean_mbps});

  for (double latency : cfg.latency_grid_ms) {
    SuiteRunOptions stale = options;
    stale.staleness_ms = latency;
    const SuiteResult res = run_suite(motion_suite, cfg, cfg.round, stale);
    rows.push_back({"fused", latency, res.ap50, res.ap70, res.mean_mbps});
  }
  return rows;
}

std::string latency_rows_to_csv(const std::vector<LatencyRow>& rows) {
  std::string out = "mode,latency_ms,ap50,ap70,mbps\n";
  for (const LatencyRow& r : rows) {
    out += r.mode + "," + format_double(r.latency_ms) + "," +
           format_double(r.ap50) + "," + format_double(r.ap70) + "," +
           format_double(r.mbps) + "\n";
  }
  return out;
}

BudgetOutcome check_budget(const ExperimentConfig& cfg,
                           const std::vector<SuiteScene>& suite) {
  BudgetOutcome outcome;
  SuiteRunOptions options;
  options.workers = cfg.workers;
  const SuiteResult at_default = run_suite(suite, cfg, cfg.round, options);
  outcome.measured_mbps = at_default.mean_mbps;
  outcome.pass = at_default.mean_mbps <= cfg.budget_mbps;

  for (double eps_c : cfg.eps_c_grid) {
    RoundConfig rc = cfg.round;
    rc.eps_c = eps_c;
    const SuiteResult res = run_suite(suite, cfg, rc, options);
    if (res.mean_mbps <= cfg.budget_mbps) {
      outcome.has_recommendation = true;
      outcome.recommended_eps_c = eps_c;
      break;
    }
  }
  return outcome;
}

std::string budget_report(const BudgetOutcome& outcome,
                          const ExperimentConfig& cfg) {
  std::string out;
  out += "budget_mbps=" + format_double(cfg.budget_mbps) + "\n";
  out += "measured_mbps=" + format_double(outcome.measured_mbps) + "\n";
  out += std::string("result=") + (outcome.pass ? "pass" : "fail") + "\n";
  if (outcome.has_recommendation) {
    out += "smallest_passing_eps_c=" +
           format_double(outcome.recommended_eps_c) + "\n";
  } else {
    out += "smallest_passing_eps_c=none\n";
  }
  return out;
}

}  // namespace vcpsim
