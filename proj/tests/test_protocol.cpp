#include "vcpsim/protocol.hpp"

#include <cstdio>
#include <filesystem>

#include "doctest.h"
#include "vcpsim/config.hpp"
#include "vcpsim/suite.hpp"

using namespace vcpsim;

namespace {

RoundConfig test_round_config() {
  RoundConfig rc;  // defaults: 128x128 grid at 0.4 m, strides 1/2/4
  return rc;
}

bool traces_equal(const RoundTrace& a, const RoundTrace& b) {
  return round_trace_to_json(a) == round_trace_to_json(b);
}

}  // namespace

TEST_CASE("latency arithmetic") {
  LatencyProfile p;  // 15 / 1 / 3 / 20
  CHECK(total_latency_ms(p) == 41.0);
  CHECK(single_round_latency_ms(p) == 38.0);
  CHECK(demand_round_overhead_ms(p) == 3.0);

  LatencyProfile zero;
  zero.backbone_ms = zero.demand_gen_ms = zero.supply_gen_ms = 0.0;
  zero.comm_ms = 0.0;
  CHECK(total_latency_ms(zero) == 0.0);

  LatencyProfile fast = p;
  fast.comm_ms = 5.0;
  CHECK(total_latency_ms(fast) == 23.0);  // max(18, 6) + 5

  LatencyProfile bad = p;
  bad.comm_ms = -1.0;
  CHECK_THROWS_AS(total_latency_ms(bad), std::invalid_argument);
}

TEST_CASE("single-agent round: no collaborators, zero bytes") {
  Scene s;
  s.seed = 7;
  s.agents.push_back({0, {0, 0, 0}});
  s.objects.push_back({100, BevBox{5, 0, 4.5, 2.0, 1.2, 1.0, -1}, {}});

  const RoundTrace trace = run_round(s, 0, test_round_config());
  CHECK(trace.collaborators.empty());
  CHECK(trace.link_bytes_to_ego() == 0);
  REQUIRE(trace.final_boxes.has_value());
  // Final equals intermediate when there is nobody to fuse with.
  REQUIRE(trace.final_boxes->size() == trace.intermediate.size());
  for (std::size_t i = 0; i < trace.intermediate.size(); ++i) {
    CHECK((*trace.final_boxes)[i].cx == trace.intermediate[i].cx);
  }
}

TEST_CASE("round is deterministic and schedule independent") {
  ExperimentConfig cfg = default_config();
  const SuiteScene ss = make_suite_scene(Family::kOcclusion, 0, cfg);

  const RoundTrace serial = run_round(ss.scene, 0, cfg.round, nullptr, false);
  const RoundTrace again = run_round(ss.scene, 0, cfg.round, nullptr, false);
  const RoundTrace parallel = run_round(ss.scene, 0, cfg.round, nullptr, true);
  CHECK(traces_equal(serial, again));
  CHECK(traces_equal(serial, parallel));
}

TEST_CASE("byte conservation: reported bytes equal recorded wire bytes") {
  ExperimentConfig cfg = default_config();
  const SuiteScene ss = make_suite_scene(Family::kOcclusion, 1, cfg);

  Bus bus;
  bus.set_recording(true);
  const RoundTrace trace = run_round(ss.scene, 0, cfg.round, &bus);

  std::size_t recorded_feature = 0, recorded_detection = 0,
              recorded_demand = 0;
  for (const Bus::Record& rec : bus.records()) {
    switch (rec.kind) {
      case PayloadKind::kDemand: recorded_demand += rec.bytes.size(); break;
      case PayloadKind::kFeatures: recorded_feature += rec.bytes.size(); break;
      case PayloadKind::kDetections:
        recorded_detection += rec.bytes.size();
        break;
    }
  }
  std::size_t reported_feature = 0, reported_detection = 0,
              reported_demand = 0;
  for (const CollaboratorReport& c : trace.collaborators) {
    reported_feature += c.bytes.feature_bytes;
    reported_detection += c.bytes.detection_bytes;
    reported_demand += c.bytes.demand_bytes;
  }
  CHECK(recorded_feature == reported_feature);
  CHECK(recorded_detection == reported_detection);
  CHECK(recorded_demand == reported_demand);
  CHECK(trace.link_bytes_to_ego() == recorded_feature + recorded_detection);
}

TEST_CASE("at most four collaborators are fused, nearest first") {
  Scene s;
  s.seed = 13;
  s.agents.push_back({0, {0, 0, 0}});
  // Five collaborators at increasing distance.
  for (int i = 1; i <= 5; ++i) {
    s.agents.push_back(
        {static_cast<AgentId>(i),
         {6.0 * i, 0.5 * i, 0.0}});
  }
  const RoundTrace trace = run_round(s, 0, test_round_config());
  REQUIRE(trace.collaborators.size() == 4);
  // The farthest agent (id 5) must be the one left out.
  for (const CollaboratorReport& c : trace.collaborators) {
    CHECK(c.id != 5);
  }
}

TEST_CASE("malformed payloads degrade with a warning instead of aborting") {
  std::vector<std::string> warnings;
  const std::vector<std::uint8_t> garbage = {1, 2, 3, 4, 5};
  GridSpec grid;
  CHECK(!try_decode_features(garbage, 3, Pose2{}, Pose2{}, grid, &warnings));
  CHECK(!try_decode_detections(garbage, 3, Pose2{}, &warnings));
  REQUIRE(warnings.size() == 2);
  CHECK(warnings[0].find("collaborator 3") != std::string::npos);
  CHECK(warnings[0].find("feature") != std::string::npos);
  CHECK(warnings[1].find("detection") != std::string::npos);
}

TEST_CASE("occlusion fixture: hidden object appears only after collaboration") {
  ExperimentConfig cfg = default_config();
  for (int index : {0, 1, 2}) {
    const SuiteScene ss = make_suite_scene(Family::kOcclusion, index, cfg);
    REQUIRE(ss.hidden_object >= 0);
    const SceneObject* hidden = nullptr;
    const SceneObject* heldout = nullptr;
    for (const SceneObject& o : ss.scene.objects) {
      if (o.id == ss.hidden_object) hidden = &o;
      if (o.id == ss.out_of_range_object) heldout = &o;
    }
    REQUIRE(hidden != nullptr);
    REQUIRE(heldout != nullptr);
    const Pose2 ego_pose = ss.scene.find_agent(0)->pose;
    const BevBox hidden_local =
        transform_box(inverse(ego_pose), hidden->shape);
    const BevBox heldout_local =
        transform_box(inverse(ego_pose), heldout->shape);

    // Ego alone: the hidden object is absent.
    RoundConfig solo = cfg.round;
    solo.max_collaborators = 0;
    solo.late_enabled = false;
    const RoundTrace alone = run_round(ss.scene, 0, solo);
    for (const BevBox& b : alone.intermediate) {
      CHECK(rotated_iou(b, hidden_local) < 0.5);
    }

    // With collaboration: present in the intermediate results via features.
    const RoundTrace fused = run_round(ss.scene, 0, cfg.round);
    bool in_intermediate = false;
    for (const BevBox& b : fused.intermediate) {
      in_intermediate =
          in_intermediate || rotated_iou(b, hidden_local) >= 0.5;
    }
    CHECK(in_intermediate);

    // The held-out object sits outside the ego grid: reachable only through
    // late fusion.
    bool heldout_intermediate = false;
    for (const BevBox& b : fused.intermediate) {
      heldout_intermediate =
          heldout_intermediate || rotated_iou(b, heldout_local) >= 0.5;
    }
    CHECK(!heldout_intermediate);
    REQUIRE(fused.final_boxes.has_value());
    bool heldout_final = false;
    for (const BevBox& b : *fused.final_boxes) {
      heldout_final = heldout_final || rotated_iou(b, heldout_local) >= 0.5;
    }
    CHECK(heldout_final);
  }
}

TEST_CASE("no supply: header-only features, late fusion still adds recall") {
  ExperimentConfig cfg = default_config();
  const SuiteScene ss = make_suite_scene(Family::kOcclusion, 3, cfg);

  RoundConfig starved = cfg.round;
  starved.eps_c = 1.0;  // conf > 1 never holds: nothing is supplied
  const RoundTrace trace = run_round(ss.scene, 0, starved);
  for (const CollaboratorReport& c : trace.collaborators) {
    CHECK(c.bytes.feature_bytes ==
          kHeaderBytes + cfg.round.grid.strides.size() * kScaleHeaderBytes);
    CHECK(c.feature_entries == 0);
  }

  // Late fusion recovers strictly more truth matches than the ego alone.
  RoundConfig solo = starved;
  solo.max_collaborators = 0;
  const RoundTrace alone = run_round(ss.scene, 0, solo);
  const Pose2 ego_pose = ss.scene.find_agent(0)->pose;
  auto matched = [&](const std::vector<BevBox>& boxes) {
    int count = 0;
    for (const SceneObject& o : ss.scene.objects) {
      const BevBox local = transform_box(inverse(ego_pose), o.shape);
      for (const BevBox& b : boxes) {
        if (rotated_iou(b, local) >= 0.5) {
          ++count;
          break;
        }
      }
    }
    return count;
  };
  CHECK(matched(*trace.final_boxes) > matched(*alone.final_boxes));
}

TEST_CASE("staleness zero equals run_round; static scenes ignore latency") {
  ExperimentConfig cfg = default_config();
  const SuiteScene ss = make_suite_scene(Family::kOcclusion, 4, cfg);

  const RoundTrace base = run_round(ss.scene, 0, cfg.round);
  const RoundTrace zero = run_with_staleness(ss.scene, 0, cfg.round, 0.0);
  CHECK(traces_equal(base, zero));

  // Static scene: any latency gives the identical trace.
  const RoundTrace stale = run_with_staleness(ss.scene, 0, cfg.round, 200.0);
  CHECK(traces_equal(base, stale));

  CHECK_THROWS_AS(run_with_staleness(ss.scene, 0, cfg.round, -1.0),
                  std::invalid_argument);
}

TEST_CASE("staleness displaces moving objects in collaborator messages") {
  ExperimentConfig cfg = default_config();
  const SuiteScene ss = make_suite_scene(Family::kMotion, 0, cfg);
  const RoundTrace fresh = run_round(ss.scene, 0, cfg.round);
  const RoundTrace stale = run_with_staleness(ss.scene, 0, cfg.round, 200.0);
  CHECK(!traces_equal(fresh, stale));
}

TEST_CASE("bus log round-trips through the filesystem") {
  ExperimentConfig cfg = default_config();
  const SuiteScene ss = make_suite_scene(Family::kOcclusion, 5, cfg);

  Bus bus;
  bus.set_recording(true);
  run_round(ss.scene, 0, cfg.round, &bus);
  REQUIRE(!bus.records().empty());

  const std::string path =
      (std::filesystem::temp_directory_path() / "vcpsim_test_bus.log").string();
  bus.write_log(path);
  const auto records = Bus::read_log(path);
  REQUIRE(records.size() == bus.records().size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    CHECK(records[i].seq == bus.records()[i].seq);
    CHECK(records[i].sender == bus.records()[i].sender);
    CHECK(records[i].receiver == bus.records()[i].receiver);
    CHECK(records[i].kind == bus.records()[i].kind);
    CHECK(records[i].bytes == bus.records()[i].bytes);
  }
  std::filesystem::remove(path);

  CHECK_THROWS_AS(Bus::read_log("/nonexistent/path/x.log"),
                  std::runtime_error);
}

TEST_CASE("round trace serializes to JSON") {
  Scene s;
  s.seed = 3;
  s.agents.push_back({0, {0, 0, 0}});
  s.agents.push_back({1, {8, 0, 0}});
  s.objects.push_back({100, BevBox{4, 3, 4.5, 2.0, 0.3, 1.0, -1}, {}});
  const RoundTrace trace = run_round(s, 0, test_round_config());
  const std::string json = round_trace_to_json(trace);
  CHECK(json.find("\"ego\": 0") != std::string::npos);
  CHECK(json.find("\"collaborators\"") != std::string::npos);
  CHECK(json.find("\"intermediate\"") != std::string::npos);
  CHECK(json.find("\"final\"") != std::string::npos);
}
