#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "adviser/catalog.hpp"
#include "adviser/workflow.hpp"
#include "json.hpp"

namespace adviser::execution {

enum class Backend { local, simulated };

std::string_view to_string(Backend b) noexcept;
Backend backend_from_string(std::string_view s);

struct ProvisioningPlan {
  catalog::InstanceType instance;
  int num_nodes = 1;
  int total_slots = 1;  // num_nodes * instance.vcpus
  Backend backend = Backend::simulated;

  bool operator==(const ProvisioningPlan&) const = default;
};

struct ProcessGrid {
  int nx = 1;
  int ny = 1;

  bool operator==(const ProcessGrid&) const = default;
};

struct RankPlacement {
  int rank = 0;
  int node_index = 0;

  bool operator==(const RankPlacement&) const = default;
};

struct MpiPlan {
  int np = 1;
  ProcessGrid grid;
  std::string hostfile_text;
  std::vector<RankPlacement> rank_map;
  // Ranks assigned to each node, in node order.
  std::vector<int> slots_per_node;
  // Opaque fabric/runtime settings, e.g. interconnect=efa on hpc instances.
  std::map<std::string, std::string> metadata;

  bool operator==(const MpiPlan&) const = default;
};

ProvisioningPlan plan_provisioning(const catalog::ResourceRequirements& req,
                                   const catalog::CatalogSnapshot& snapshot,
                                   Backend backend);

// N_x is the largest divisor of np not exceeding sqrt(np); N_y = np / N_x.
ProcessGrid decompose_grid(int np);

// Block-contiguous, evenly spread rank placement. Throws InsufficientSlots.
MpiPlan build_mpi_envelope(int np, const ProvisioningPlan& plan);

// Inverse of the hostfile rendering: the slots=N value of each line.
std::vector<int> parse_hostfile(std::string_view text);

// ---------------------------------------------------------------------------
// Job lifecycle

enum class JobState { Queued, Provisioning, Setup, Running, Collecting, Succeeded, Failed, Cancelled };
enum class JobEvent {
  ProvisionStarted,
  NodesReady,
  SetupDone,
  RunCompleted,
  OutputsStored,
  ErrorRaised,
  CancelRequested,
};

inline constexpr std::array<JobState, 8> kAllStates = {
    JobState::Queued,     JobState::Provisioning, JobState::Setup,  JobState::Running,
    JobState::Collecting, JobState::Succeeded,    JobState::Failed, JobState::Cancelled};
inline constexpr std::array<JobEvent, 7> kAllEvents = {
    JobEvent::ProvisionStarted, JobEvent::NodesReady,   JobEvent::SetupDone,
    JobEvent::RunCompleted,     JobEvent::OutputsStored, JobEvent::ErrorRaised,
    JobEvent::CancelRequested};

std::string_view to_string(JobState s) noexcept;
std::string_view to_string(JobEvent e) noexcept;
JobState state_from_string(std::string_view s);
JobEvent event_from_string(std::string_view s);

bool is_terminal(JobState s) noexcept;

// Throws InvalidTransition for any pair outside the table.
JobState transition(JobState current, JobEvent event);

// Same table, without throwing.
std::optional<JobState> try_transition(JobState current, JobEvent event) noexcept;

struct JobRecordEntry {
  std::int64_t timestamp_us = 0;
  JobState state = JobState::Queued;
  std::optional<JobEvent> event;  // empty for the initial Queued entry
  std::vector<std::string> log_lines;

  bool operator==(const JobRecordEntry&) const = default;
};

struct Job {
  std::string id;
  std::string principal;
  std::string workspace;
  workflow::TemplateVersion template_version;
  workflow::EnvironmentSpec environment;
  workflow::ParameterSet parameters;
  workflow::ExecutablePlan commands;
  ProvisioningPlan plan;
  std::optional<MpiPlan> mpi;
  JobState state = JobState::Queued;
  std::vector<JobRecordEntry> events;
  std::optional<std::string> budget_reservation;

  // Starts the event log with a Queued entry.
  void enqueue(std::int64_t timestamp_us);

  // Validates against the transition table and appends an entry. Timestamps
  // not after the previous entry are bumped by one microsecond.
  JobState apply(JobEvent event, std::int64_t timestamp_us,
                 std::vector<std::string> log_lines = {});

  std::int64_t submitted_at() const { return events.empty() ? 0 : events.front().timestamp_us; }
};

// Folds an event log over the transition table starting at Queued.
JobState replay(const std::vector<JobRecordEntry>& events);

void to_json(nlohmann::json& j, const ProvisioningPlan& p);
void from_json(const nlohmann::json& j, ProvisioningPlan& p);
void to_json(nlohmann::json& j, const MpiPlan& m);
void from_json(const nlohmann::json& j, MpiPlan& m);
void to_json(nlohmann::json& j, const JobRecordEntry& e);
void from_json(const nlohmann::json& j, JobRecordEntry& e);
void to_json(nlohmann::json& j, const Job& job);
void from_json(const nlohmann::json& j, Job& job);

}  // namespace adviser::execution
