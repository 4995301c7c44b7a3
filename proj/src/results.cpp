#include "adviser/results.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>

#include "adviser/digest.hpp"
#include "adviser/error.hpp"
#include "adviser/fileio.hpp"

namespace adviser::results {

using nlohmann::json;

OutcomeSummary summarize(execution::JobState final_state, const backends::ExecutionOutcome& outcome,
                         const std::optional<std::filesystem::path>& workdir) {
  OutcomeSummary s;
  s.final_state = final_state;
  s.status = outcome.exit_status;
  s.wall_time_hours = outcome.wall_time_hours;
  s.log_digest = sha256_hex(outcome.log_text);
  for (const auto& ref : outcome.output_refs) {
    std::string digest;
    if (workdir) {
      const auto p = *workdir / ref;
      std::error_code ec;
      if (std::filesystem::is_regular_file(p, ec)) digest = sha256_hex(read_file(p));
    }
    s.output_digests[ref] = digest.empty() ? sha256_hex(ref) : digest;
  }
  return s;
}

namespace {

json outcome_json(const OutcomeSummary& o) {
  return json{{"final_state", execution::to_string(o.final_state)},
              {"status", backends::to_string(o.status)},
              {"wall_time_hours", o.wall_time_hours},
              {"log_digest", o.log_digest},
              {"output_digests", o.output_digests}};
}

OutcomeSummary outcome_from_json(const json& j) {
  OutcomeSummary o;
  o.final_state = execution::state_from_string(j.at("final_state").get<std::string>());
  o.status = j.at("status").get<std::string>() == "success" ? backends::ExitStatus::success
                                                             : backends::ExitStatus::failure;
  o.wall_time_hours = j.at("wall_time_hours").get<double>();
  o.log_digest = j.at("log_digest").get<std::string>();
  o.output_digests = j.at("output_digests").get<std::map<std::string, std::string>>();
  return o;
}

}  // namespace

// nlohmann::json objects are std::map backed, so keys come out sorted and
// dump() without an indent emits no insignificant whitespace.
json canonical_document(const ProvenanceRecord& r) {
  json resources = r.resources;
  resources["mpi"] = r.mpi ? json(*r.mpi) : json(nullptr);
  return json{{"template", {{"name", r.template_version.name}, {"version", r.template_version.version}}},
              {"environment", r.environment},
              {"parameters", r.parameters},
              {"resources", resources},
              {"outcome", outcome_json(r.outcome)}};
}

std::string canonical_bytes(const ProvenanceRecord& r) { return canonical_document(r).dump(); }

std::string compute_record_id(const ProvenanceRecord& r) { return sha256_hex(canonical_bytes(r)); }

std::string configuration_digest(const ProvenanceRecord& r) {
  auto doc = canonical_document(r);
  doc.erase("outcome");
  return sha256_hex(doc.dump());
}

ProvenanceRecord make_record(const execution::Job& job, const OutcomeSummary& outcome,
                             std::int64_t created_at_us) {
  if (!execution::is_terminal(job.state)) {
    throw Error(ErrorCode::JobNotTerminal,
                "job " + job.id + " is " + std::string(execution::to_string(job.state)));
  }
  ProvenanceRecord r;
  r.job_id = job.id;
  r.created_at_us = created_at_us;
  r.template_version = job.template_version;
  r.environment = job.environment;
  r.parameters = job.parameters;
  r.resources = job.plan;
  r.mpi = job.mpi;
  r.outcome = outcome;
  r.outcome.final_state = job.state;
  r.record_id = compute_record_id(r);
  return r;
}

json to_document(const ProvenanceRecord& r) {
  auto doc = canonical_document(r);
  doc["record_id"] = r.record_id;
  doc["job_id"] = r.job_id;
  doc["created_at_us"] = r.created_at_us;
  return doc;
}

ProvenanceRecord from_document(const json& j) {
  ProvenanceRecord r;
  r.record_id = j.at("record_id").get<std::string>();
  r.job_id = j.value("job_id", "");
  r.created_at_us = j.value("created_at_us", std::int64_t{0});
  r.template_version = {j.at("template").at("name").get<std::string>(),
                        j.at("template").at("version").get<int>()};
  r.environment = j.at("environment").get<workflow::EnvironmentSpec>();
  r.parameters = j.at("parameters").get<workflow::ParameterSet>();
  r.resources = j.at("resources").get<execution::ProvisioningPlan>();
  if (!j.at("resources").at("mpi").is_null())
    r.mpi = j.at("resources").at("mpi").get<execution::MpiPlan>();
  r.outcome = outcome_from_json(j.at("outcome"));
  return r;
}

// ---------------------------------------------------------------------------

RecordStore::RecordStore(std::filesystem::path directory) : directory_(std::move(directory)) {
  namespace fs = std::filesystem;
  fs::create_directories(directory_);
  for (const auto& entry : fs::directory_iterator(directory_)) {
    const auto& p = entry.path();
    if (p.extension() != ".json") continue;
    try {
      auto r = from_document(json::parse(read_file(p)));
      index_[r.record_id] = {r.template_version.name, r.created_at_us};
    } catch (const std::exception&) {
      // Not a record; temp files never carry the .json extension.
    }
  }
}

void RecordStore::put(const ProvenanceRecord& r) {
  if (r.record_id != compute_record_id(r)) {
    throw Error(ErrorCode::StoreFailure, "record_id does not match record contents");
  }
  std::unique_lock lock(mutex_);
  const auto path = directory_ / (r.record_id + ".json");
  if (index_.count(r.record_id)) return;  // immutable once stored
  write_file_atomic(path, to_document(r).dump());
  index_[r.record_id] = {r.template_version.name, r.created_at_us};
}

ProvenanceRecord RecordStore::record_run(const execution::Job& job, const OutcomeSummary& outcome,
                                         std::int64_t created_at_us) {
  auto r = make_record(job, outcome, created_at_us);
  put(r);
  return r;
}

std::optional<ProvenanceRecord> RecordStore::get(const std::string& record_id) const {
  std::shared_lock lock(mutex_);
  if (!index_.count(record_id)) return std::nullopt;
  return from_document(json::parse(read_file(directory_ / (record_id + ".json"))));
}

std::vector<ProvenanceRecord> RecordStore::find(const std::string& template_name,
                                                std::int64_t from_us, std::int64_t to_us) const {
  std::vector<std::string> ids;
  {
    std::shared_lock lock(mutex_);
    for (const auto& [id, e] : index_) {
      if (e.template_name == template_name && e.created_at_us >= from_us && e.created_at_us <= to_us)
        ids.push_back(id);
    }
  }
  std::vector<ProvenanceRecord> out;
  for (const auto& id : ids) {
    if (auto r = get(id)) out.push_back(std::move(*r));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.created_at_us < b.created_at_us; });
  return out;
}

std::vector<ProvenanceRecord> RecordStore::all() const {
  std::vector<std::string> ids;
  {
    std::shared_lock lock(mutex_);
    for (const auto& [id, _] : index_) ids.push_back(id);
  }
  std::vector<ProvenanceRecord> out;
  for (const auto& id : ids) {
    if (auto r = get(id)) out.push_back(std::move(*r));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.created_at_us < b.created_at_us; });
  return out;
}

// ---------------------------------------------------------------------------
// Analytics

RunMetrics aggregate_repetitions(std::span<const double> samples, std::size_t warmup_count) {
  if (samples.size() <= warmup_count) {
    throw Error(ErrorCode::InsufficientSamples,
                std::to_string(samples.size()) + " samples cannot cover " +
                    std::to_string(warmup_count) + " warm-up runs plus a measurement");
  }
  const auto measured = samples.subspan(warmup_count);
  RunMetrics m;
  m.n = measured.size();
  m.warmup_excluded = warmup_count;

  // Welford keeps the variance accurate when the spread is tiny relative to
  // the mean.
  double mean = 0, m2 = 0;
  std::size_t k = 0;
  for (double x : measured) {
    ++k;
    const double d = x - mean;
    mean += d / static_cast<double>(k);
    m2 += d * (x - mean);
  }
  m.mean_seconds = mean;
  m.std_seconds = m.n > 1 ? std::sqrt(std::max(0.0, m2 / static_cast<double>(m.n - 1))) : 0.0;
  return m;
}

ScalingSeries::ScalingSeries(std::vector<ScalingPoint> points) : points_(std::move(points)) {
  if (points_.empty()) throw Error(ErrorCode::InvalidArgument, "scaling series is empty");
  std::sort(points_.begin(), points_.end(), [](const auto& a, const auto& b) { return a.np < b.np; });
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (points_[i].np < 1) throw Error(ErrorCode::InvalidArgument, "np must be positive");
    if (!(points_[i].wall_hours > 0)) throw Error(ErrorCode::InvalidArgument, "times must be positive");
    if (i > 0 && points_[i].np == points_[i - 1].np) {
      throw Error(ErrorCode::InvalidArgument, "duplicate np " + std::to_string(points_[i].np));
    }
  }
}

std::vector<EfficiencyPoint> parallel_efficiency(const ScalingSeries& series) {
  const auto& base = series.points().front();
  const double base_work = base.wall_hours * base.np;
  std::vector<EfficiencyPoint> out;
  for (const auto& p : series.points()) {
    out.push_back({p.np, &p == &base ? 100.0 : 100.0 * base_work / (p.wall_hours * p.np)});
  }
  return out;
}

Money cost_per_run(const RunMetrics& metrics, const catalog::InstanceType& instance, int node_count) {
  if (!(metrics.mean_seconds > 0)) {
    throw Error(ErrorCode::InvalidArgument, "mean_seconds must be > 0");
  }
  return catalog::estimate_cost(instance, metrics.mean_seconds / 3600.0, node_count);
}

namespace {

void walk(const std::string& path, const json& a, const json& b, std::vector<FieldDiff>& out) {
  if (a == b) return;
  if (a.is_object() && b.is_object()) {
    std::set<std::string> keys;
    for (const auto& [k, _] : a.items()) keys.insert(k);
    for (const auto& [k, _] : b.items()) keys.insert(k);
    for (const auto& k : keys) {
      const auto child = path.empty() ? k : path + "." + k;
      walk(child, a.contains(k) ? a[k] : json(nullptr), b.contains(k) ? b[k] : json(nullptr), out);
    }
    return;
  }
  if (a.is_array() && b.is_array()) {
    const auto n = std::max(a.size(), b.size());
    for (std::size_t i = 0; i < n; ++i) {
      walk(path + "[" + std::to_string(i) + "]", i < a.size() ? a[i] : json(nullptr),
           i < b.size() ? b[i] : json(nullptr), out);
    }
    return;
  }
  out.push_back({path, a, b});
}

}  // namespace

std::vector<FieldDiff> compare_runs(const ProvenanceRecord& a, const ProvenanceRecord& b) {
  std::vector<FieldDiff> out;
  walk("", canonical_document(a), canonical_document(b), out);
  return out;
}

std::string export_scaling_table(const ScalingSeries& series) {
  std::ostringstream s;
  s << "np,time_hours,efficiency_percent\n";
  const auto eff = parallel_efficiency(series);
  for (std::size_t i = 0; i < eff.size(); ++i) {
    char line[96];
    std::snprintf(line, sizeof line, "%d,%.4f,%.1f\n", series.points()[i].np,
                  series.points()[i].wall_hours, eff[i].efficiency_percent);
    s << line;
  }
  return s.str();
}

ScalingSeries series_from_records(const std::vector<ProvenanceRecord>& records) {
  std::map<int, std::pair<double, int>> acc;
  for (const auto& r : records) {
    if (r.outcome.final_state != execution::JobState::Succeeded) continue;
    const int np = r.mpi ? r.mpi->np : 1;
    acc[np].first += r.outcome.wall_time_hours;
    acc[np].second += 1;
  }
  std::vector<ScalingPoint> pts;
  for (const auto& [np, v] : acc) pts.push_back({np, v.first / v.second});
  return ScalingSeries(std::move(pts));
}

}  // namespace adviser::results
