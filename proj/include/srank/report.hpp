#pragma once

// Machine-readable reports. Schema documented in docs/reports.md.

#include <json.hpp>

#include "srank/evalbench.hpp"
#include "srank/metrics.hpp"
#include "srank/training.hpp"

namespace srank {

inline constexpr int kReportSchemaVersion = 1;

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json by_size = nlohmann::json::array();
  for (const auto& [n, b] : r.by_candidate_count)
    by_size.push_back({{"candidates", n},
                       {"correct", b.correct},
                       {"total", b.total},
                       {"accuracy", static_cast<double>(b.correct) / static_cast<double>(b.total)}});
  return {{"kind", "eval"},
          {"schema_version", kReportSchemaVersion},
          {"n_queries", r.n_queries},
          {"correct", r.correct},
          {"top_one_accuracy", r.top_one_accuracy},
          {"silent_precision", r.silent_precision},
          {"silent_recall", r.silent_recall},
          {"silent_f1", r.silent_f1},
          {"gold_empty", r.gold_empty},
          {"predicted_no_answer", r.predicted_no_answer},
          {"correct_no_answer", r.correct_no_answer},
          {"zero_over_zero", "silent precision/recall with a zero denominator are reported as 1"},
          {"by_candidate_count", by_size}};
}

inline nlohmann::json to_json(const BenchReport& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points)
    pts.push_back({{"n", p.n},
                   {"inner_iterations", p.inner_iterations},
                   {"linear_seconds", p.linear_seconds},
                   {"quadratic_seconds", p.quadratic_seconds},
                   {"max_abs_difference", p.max_abs_difference}});
  return {{"kind", "bench_loss_scaling"},
          {"schema_version", kReportSchemaVersion},
          {"repetitions", r.repetitions},
          {"points", pts},
          {"linear_slope", r.linear_slope},
          {"quadratic_slope", r.quadratic_slope},
          {"linear_doubling_ratio", r.linear_doubling_ratio},
          {"quadratic_doubling_ratio", r.quadratic_doubling_ratio},
          {"max_abs_difference", r.max_abs_difference}};
}

inline nlohmann::json to_json(const InferenceBench& b) {
  return {{"kind", "bench_inference"},
          {"schema_version", kReportSchemaVersion},
          {"queries", b.queries},
          {"repetitions", b.repetitions},
          {"cached", {{"median_seconds", b.cached.median_seconds}, {"p95_seconds", b.cached.p95_seconds}}},
          {"reencode", {{"median_seconds", b.reencode.median_seconds}, {"p95_seconds", b.reencode.p95_seconds}}},
          {"ratio", b.ratio}};
}

inline nlohmann::json to_json(const EpochLog& e) {
  nlohmann::json j = {{"epoch", e.epoch},
                      {"mean_loss", e.mean_loss},
                      {"cache_version", e.cache_version},
                      {"refreshed", e.refreshed},
                      {"follows_refresh", e.follows_refresh}};
  if (e.heldout_accuracy) j["heldout_accuracy"] = *e.heldout_accuracy;
  if (e.pre_refresh_accuracy) j["pre_refresh_accuracy"] = *e.pre_refresh_accuracy;
  if (e.immediate_post_refresh_accuracy) j["immediate_post_refresh_accuracy"] = *e.immediate_post_refresh_accuracy;
  return j;
}

inline nlohmann::json to_json(const TrainerState& s) {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : s.log) epochs.push_back(to_json(e));
  return {{"kind", "train"},
          {"schema_version", kReportSchemaVersion},
          {"epochs_run", s.epoch},
          {"converged", s.converged},
          {"cache_version", s.cache.version},
          {"epochs", epochs}};
}

inline nlohmann::json to_json(const std::vector<LossArm>& arms) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& a : arms) {
    nlohmann::json row = {{"loss", to_string(a.loss)},
                          {"final_accuracy", a.final_accuracy},
                          {"epochs_run", a.epochs_run},
                          {"diverged", a.diverged},
                          {"loss_trace", a.loss_trace}};
    row["epochs_to_converge"] = a.epochs_to_converge ? nlohmann::json(*a.epochs_to_converge) : nlohmann::json(nullptr);
    if (a.diverged) row["error"] = a.error;
    rows.push_back(row);
  }
  return {{"kind", "compare_losses"}, {"schema_version", kReportSchemaVersion}, {"arms", rows}};
}

}  // namespace srank
