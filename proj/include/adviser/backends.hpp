#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <stop_token>
#include <string>
#include <vector>

#include "adviser/error.hpp"
#include "adviser/execution.hpp"
#include "adviser/workflow.hpp"
#include "json.hpp"

namespace adviser::backends {

struct SimParams {
  double t_serial_hours = 1.0;
  double serial_fraction = 0.0;
  double internode_penalty_per_node_hours = 0.0;
  double provision_delay_seconds_per_node = 0.0;
  double jitter_fraction = 0.0;
  std::uint64_t seed = 0;
  // Fault injection for sim_provision. Off unless explicitly enabled.
  bool stockout_injection = false;
  double stockout_probability = 0.0;

  bool operator==(const SimParams&) const = default;
};

// Throws InvalidArgument when a bound is violated.
void validate(const SimParams& p);

enum class ExitStatus { success, failure };

struct ExecutionOutcome {
  double wall_time_hours = 0.0;
  ExitStatus exit_status = ExitStatus::success;
  std::string log_text;
  std::vector<std::string> output_refs;

  bool operator==(const ExecutionOutcome&) const = default;
};

std::string_view to_string(ExitStatus s) noexcept;

// ---------------------------------------------------------------------------
// Local process backend

struct LocalOptions {
  std::chrono::milliseconds timeout = std::chrono::hours(1);
  // Extra environment for both commands (template env vars, MPI artifacts).
  std::map<std::string, std::string> env;
  // Cancellation; the running process group is killed when requested.
  std::stop_token stop;
  // Called between a successful setup step and the run step.
  std::function<void()> on_setup_done;
};

// Carries the captured log and exit status of the failed step.
class CommandFailed : public Error {
 public:
  CommandFailed(ErrorCode code, const std::string& message, int status, std::string log)
      : Error(code, message), status_(status), log_(std::move(log)) {}
  int status() const { return status_; }
  const std::string& log() const { return log_; }

 private:
  int status_;
  std::string log_;
};

// Runs setup then run through /bin/sh in `workdir`. Files left under
// workdir/outputs become output_refs (paths relative to workdir). Throws
// CommandFailed with SetupFailed / RunFailed / Timeout.
ExecutionOutcome local_execute(const workflow::ExecutablePlan& plan,
                               const std::filesystem::path& workdir,
                               const LocalOptions& options = {});

// ---------------------------------------------------------------------------
// Cloud simulator

// Counter-based uniform draw in [0, 1) keyed on the arguments.
double keyed_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c);

// Model wall time without jitter.
double model_wall_hours(int np, int num_nodes, const SimParams& params);

// Amdahl term plus a linear inter-node term scaled by np/8, multiplied by a
// deterministic jitter factor keyed on (seed, np, num_nodes, repetition).
ExecutionOutcome sim_execute(int np, int num_nodes, const SimParams& params,
                             std::uint64_t repetition = 0);

struct SimNode {
  std::string hostname;
  int index = 0;
};

struct ProvisionResult {
  std::vector<SimNode> nodes;
  double delay_seconds = 0.0;
};

// Throws SimulatedStockout when fault injection is enabled and the seeded
// draw falls under stockout_probability.
ProvisionResult sim_provision(const execution::ProvisioningPlan& plan, const SimParams& params);

struct Observation {
  int np = 1;
  int num_nodes = 1;
  double wall_hours = 0.0;
};

// Least-squares fit of (t_serial_hours, serial_fraction,
// internode_penalty_per_node_hours) on squared relative error. The penalty
// is held at zero when no observation spans more than one node.
SimParams calibrate_model(const std::vector<Observation>& observations);

void to_json(nlohmann::json& j, const SimParams& p);
void from_json(const nlohmann::json& j, SimParams& p);

}  // namespace adviser::backends
