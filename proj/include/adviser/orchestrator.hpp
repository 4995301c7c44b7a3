#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <stop_token>
#include <string>
#include <thread>
#include <vector>

#include "adviser/backends.hpp"
#include "adviser/catalog.hpp"
#include "adviser/execution.hpp"
#include "adviser/gateway.hpp"
#include "adviser/governance.hpp"
#include "adviser/results.hpp"
#include "adviser/workflow.hpp"

namespace adviser::gateway {

struct OrchestratorOptions {
  std::filesystem::path state_dir;  // jobs/, records/, work/
  backends::SimParams sim_params;
  int workers = 4;
  // Reservation size when a template declares no expected duration.
  double default_wall_hours_cap = 1.0;
  std::chrono::milliseconds local_timeout = std::chrono::hours(1);
  // Real seconds slept per simulated second; 0 runs the simulator instantly.
  double sim_time_scale = 0.0;
};

struct Services {
  catalog::CatalogSnapshot catalog;
  std::shared_ptr<workflow::TemplateRegistry> templates;
  std::shared_ptr<governance::Directory> directory;
  std::shared_ptr<governance::BudgetLedger> budgets;
};

struct DryRunResult {
  execution::ProvisioningPlan plan;
  std::optional<execution::MpiPlan> mpi;
  workflow::ExecutablePlan commands;
  std::string rationale;
  Money cost_estimate;
};

struct SubmitResult {
  std::optional<std::string> job_id;      // set unless dry_run
  std::optional<DryRunResult> dry_run;    // set when dry_run
};

struct StreamEvent {
  std::size_t index = 0;
  execution::JobRecordEntry entry;
};

// Drives jobs from Queued to a terminal state on a bounded worker pool.
// Each job has its own lock; status streams wait on a per-job condition.
class Orchestrator {
 public:
  Orchestrator(Services services, OrchestratorOptions options);
  ~Orchestrator();
  Orchestrator(const Orchestrator&) = delete;
  Orchestrator& operator=(const Orchestrator&) = delete;

  // Admission is all-or-nothing: permission, feasibility and budget are
  // checked before a job record exists.
  SubmitResult submit(const RunRequest& req, const std::string& principal);

  execution::Job job(const std::string& id, const std::string& principal) const;
  std::vector<execution::Job> jobs(const std::string& principal) const;
  void cancel(const std::string& id, const std::string& principal);

  // Replays history from `from_index`, then tails live entries until the
  // terminal entry has been delivered. Returning false from the callback
  // stops early.
  void stream(const std::string& id, const std::string& principal, std::size_t from_index,
              const std::function<bool(const StreamEvent&)>& on_event) const;

  // Blocks until the job is terminal or the timeout elapses.
  execution::JobState wait(const std::string& id,
                           std::chrono::milliseconds timeout = std::chrono::hours(24)) const;

  std::optional<results::ProvenanceRecord> record_for(const std::string& job_id) const;
  results::RecordStore& records() { return records_; }
  const Services& services() const { return services_; }

  void shutdown();

 private:
  struct Handle {
    mutable std::mutex mutex;
    mutable std::condition_variable changed;
    execution::Job job;
    std::stop_source cancel;
    std::optional<std::string> record_id;
    bool finished = false;  // record written and budget settled
  };

  std::shared_ptr<Handle> handle(const std::string& id) const;
  void check_read(const execution::Job& job, const std::string& principal) const;
  void worker_loop(std::stop_token stop);
  void run_job(const std::shared_ptr<Handle>& h);
  bool advance(Handle& h, execution::JobEvent event, std::vector<std::string> lines = {});
  void persist(const execution::Job& job) const;
  void load_existing();
  void finish(Handle& h, const std::optional<backends::ExecutionOutcome>& outcome,
              const std::optional<std::filesystem::path>& workdir);
  std::string new_job_id();

  Services services_;
  OrchestratorOptions options_;
  results::RecordStore records_;

  mutable std::shared_mutex jobs_mutex_;
  std::map<std::string, std::shared_ptr<Handle>> jobs_;

  std::mutex queue_mutex_;
  std::condition_variable_any queue_cv_;
  std::deque<std::string> queue_;
  std::vector<std::jthread> workers_;
  std::uint64_t id_counter_ = 0;
};

std::int64_t now_us();

}  // namespace adviser::gateway
