#pragma once
// JSON-lines views of stage traces and per-frame logs (debug output).

#include "taglok/harness.hpp"
#include "taglok/pipeline.hpp"

#include <nlohmann/json.hpp>

namespace taglok {

inline nlohmann::json pose_json(const Pose& p) {
  const UnitQuaternion q = p.orientation.canonical();
  return {{"p", {p.position.x(), p.position.y(), p.position.z()}}, {"q", {q.w(), q.x(), q.y(), q.z()}}};
}

inline nlohmann::json trace_json(const StageTrace& t) {
  nlohmann::json j;
  j["detections_in"] = t.detections_in;
  j["unknown_dropped"] = t.unknown_dropped;
  j["selected"] = t.selected;
  j["or_applied"] = t.or_applied;
  if (t.or_bounds) {
    nlohmann::json b = nlohmann::json::array();
    for (const auto& axis : *t.or_bounds) b.push_back({axis.lower, axis.upper});
    j["or_bounds"] = b;
  }
  j["dispersion_warning"] = t.dispersion_warning;
  j["fusion_degenerate"] = t.fusion_degenerate;
  j["fused"] = t.fused ? pose_json(*t.fused) : nlohmann::json(nullptr);
  if (!t.reason.empty()) j["reason"] = t.reason;
  return j;
}

inline nlohmann::json estimate_json(const EstimateOutput& e) {
  return {{"t", e.timestamp},
          {"pose", e.pose ? pose_json(*e.pose) : nlohmann::json(nullptr)},
          {"tags_used", e.tags_used},
          {"tags_rejected", e.tags_rejected},
          {"trace", trace_json(e.trace)}};
}

inline nlohmann::json frame_json(const FrameLog& f) {
  nlohmann::json j = estimate_json(f.estimate);
  j["frame"] = f.index;
  j["phase"] = f.phase;
  j["truth"] = pose_json(f.truth);
  j["visible"] = f.visible;
  if (f.estimate.pose) {
    j["ep_cm"] = f.ep_cm;
    j["eo_deg"] = f.eo_deg;
  }
  return j;
}

/// One JSON object per line.
inline std::string frames_jsonl(const RunResult& r) {
  std::string out;
  for (const auto& f : r.frames) out += frame_json(f).dump() + "\n";
  return out;
}

}  // namespace taglok
