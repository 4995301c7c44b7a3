#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "adviser/backends.hpp"
#include "adviser/catalog.hpp"
#include "adviser/execution.hpp"
#include "adviser/workflow.hpp"
#include "json.hpp"

namespace adviser::results {

struct OutcomeSummary {
  execution::JobState final_state = execution::JobState::Succeeded;
  backends::ExitStatus status = backends::ExitStatus::success;
  double wall_time_hours = 0.0;
  std::string log_digest;
  // output ref -> content digest
  std::map<std::string, std::string> output_digests;

  bool operator==(const OutcomeSummary&) const = default;
};

struct ProvenanceRecord {
  std::string record_id;
  std::string job_id;         // not part of the digest
  std::int64_t created_at_us = 0;  // not part of the digest
  workflow::TemplateVersion template_version;
  workflow::EnvironmentSpec environment;
  workflow::ParameterSet parameters;
  execution::ProvisioningPlan resources;
  std::optional<execution::MpiPlan> mpi;
  OutcomeSummary outcome;
};

// Output refs are digested by file content when they resolve under
// `workdir`, otherwise by the ref text itself.
OutcomeSummary summarize(execution::JobState final_state,
                         const backends::ExecutionOutcome& outcome,
                         const std::optional<std::filesystem::path>& workdir = std::nullopt);

// Sorted-key JSON of every digested field.
nlohmann::json canonical_document(const ProvenanceRecord& r);
std::string canonical_bytes(const ProvenanceRecord& r);
std::string compute_record_id(const ProvenanceRecord& r);
// Digest of the record with the outcome removed.
std::string configuration_digest(const ProvenanceRecord& r);

// Throws JobNotTerminal.
ProvenanceRecord make_record(const execution::Job& job, const OutcomeSummary& outcome,
                             std::int64_t created_at_us);

nlohmann::json to_document(const ProvenanceRecord& r);  // full file contents
ProvenanceRecord from_document(const nlohmann::json& j);

// Append-only record directory; one <record_id>.json per record. Writes go
// through a temp file and rename, so readers never see partial records.
class RecordStore {
 public:
  explicit RecordStore(std::filesystem::path directory);

  ProvenanceRecord record_run(const execution::Job& job, const OutcomeSummary& outcome,
                              std::int64_t created_at_us);
  void put(const ProvenanceRecord& r);

  std::optional<ProvenanceRecord> get(const std::string& record_id) const;
  std::vector<ProvenanceRecord> find(const std::string& template_name, std::int64_t from_us,
                                     std::int64_t to_us) const;
  std::vector<ProvenanceRecord> all() const;

 private:
  struct IndexEntry {
    std::string template_name;
    std::int64_t created_at_us;
  };
  std::filesystem::path directory_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, IndexEntry> index_;
};

// ---------------------------------------------------------------------------
// Analytics

struct RunMetrics {
  std::size_t n = 0;
  double mean_seconds = 0.0;
  double std_seconds = 0.0;  // sample estimator (n - 1)
  std::size_t warmup_excluded = 0;
};

RunMetrics aggregate_repetitions(std::span<const double> samples, std::size_t warmup_count);

struct ScalingPoint {
  int np = 1;
  double wall_hours = 0.0;
};

class ScalingSeries {
 public:
  // Sorts by np; rejects duplicate or non-positive np.
  explicit ScalingSeries(std::vector<ScalingPoint> points);

  const std::vector<ScalingPoint>& points() const { return points_; }
  int base_np() const { return points_.front().np; }

 private:
  std::vector<ScalingPoint> points_;
};

struct EfficiencyPoint {
  int np = 1;
  double efficiency_percent = 0.0;
};

std::vector<EfficiencyPoint> parallel_efficiency(const ScalingSeries& series);

Money cost_per_run(const RunMetrics& metrics, const catalog::InstanceType& instance,
                   int node_count);

struct FieldDiff {
  std::string path;
  nlohmann::json a;  // null when absent
  nlohmann::json b;
};

std::vector<FieldDiff> compare_runs(const ProvenanceRecord& a, const ProvenanceRecord& b);

// "np,time_hours,efficiency_percent" rows, comma-delimited.
std::string export_scaling_table(const ScalingSeries& series);

// Groups stored records by MPI rank count (mean wall time per np).
ScalingSeries series_from_records(const std::vector<ProvenanceRecord>& records);

}  // namespace adviser::results
