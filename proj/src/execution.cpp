#include "adviser/execution.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

#include "adviser/error.hpp"

namespace adviser::execution {

using nlohmann::json;

std::string_view to_string(Backend b) noexcept {
  return b == Backend::local ? "local" : "simulated";
}

Backend backend_from_string(std::string_view s) {
  if (s == "local") return Backend::local;
  if (s == "simulated") return Backend::simulated;
  throw Error(ErrorCode::InvalidArgument, "unknown backend '" + std::string(s) + "'");
}

ProvisioningPlan plan_provisioning(const catalog::ResourceRequirements& req,
                                   const catalog::CatalogSnapshot& snapshot, Backend backend) {
  if (req.num_nodes < 1) throw Error(ErrorCode::InvalidArgument, "num_nodes must be >= 1");
  auto selection = catalog::select_instance(req, snapshot);
  ProvisioningPlan plan;
  plan.instance = std::move(selection.instance);
  plan.num_nodes = req.num_nodes;
  plan.total_slots = plan.num_nodes * plan.instance.vcpus;
  plan.backend = backend;
  return plan;
}

ProcessGrid decompose_grid(int np) {
  if (np < 1) throw Error(ErrorCode::InvalidArgument, "np must be >= 1");
  int nx = 1;
  for (int d = 1; static_cast<long long>(d) * d <= np; ++d) {
    if (np % d == 0) nx = d;
  }
  return {nx, np / nx};
}

MpiPlan build_mpi_envelope(int np, const ProvisioningPlan& plan) {
  if (np < 1) throw Error(ErrorCode::InvalidArgument, "np must be >= 1");
  if (np > plan.total_slots) {
    throw Error(ErrorCode::InsufficientSlots,
                "np=" + std::to_string(np) + " exceeds " + std::to_string(plan.total_slots) +
                    " slots on " + std::to_string(plan.num_nodes) + " x " + plan.instance.name);
  }
  MpiPlan mpi;
  mpi.np = np;
  mpi.grid = decompose_grid(np);

  const int base = np / plan.num_nodes;
  const int extra = np % plan.num_nodes;
  int rank = 0;
  std::ostringstream hostfile;
  for (int node = 0; node < plan.num_nodes; ++node) {
    const int share = base + (node < extra ? 1 : 0);
    // Idle trailing nodes (np < num_nodes) get no hostfile line.
    if (share == 0) break;
    mpi.slots_per_node.push_back(share);
    hostfile << "node-" << node << " slots=" << share << "\n";
    for (int k = 0; k < share; ++k) mpi.rank_map.push_back({rank++, node});
  }
  mpi.hostfile_text = hostfile.str();

  const bool hpc = plan.instance.family_class == catalog::FamilyClass::hpc;
  mpi.metadata["interconnect"] = hpc ? "efa" : "tcp";
  if (hpc) mpi.metadata["FI_PROVIDER"] = "efa";
  mpi.metadata["ranks_per_node_max"] = std::to_string(mpi.slots_per_node.front());
  return mpi;
}

std::vector<int> parse_hostfile(std::string_view text) {
  std::vector<int> slots;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto eol = text.find('\n', pos);
    auto line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    pos = eol == std::string_view::npos ? text.size() : eol + 1;
    if (line.empty()) continue;
    const auto key = line.find(" slots=");
    if (key == std::string_view::npos || key == 0) {
      throw Error(ErrorCode::InvalidArgument, "bad hostfile line '" + std::string(line) + "'");
    }
    auto num = line.substr(key + 7);
    int n = 0;
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), n);
    if (ec != std::errc{} || ptr != num.data() + num.size() || n < 0) {
      throw Error(ErrorCode::InvalidArgument, "bad slot count in '" + std::string(line) + "'");
    }
    slots.push_back(n);
  }
  return slots;
}

// ---------------------------------------------------------------------------

std::string_view to_string(JobState s) noexcept {
  switch (s) {
    case JobState::Queued: return "Queued";
    case JobState::Provisioning: return "Provisioning";
    case JobState::Setup: return "Setup";
    case JobState::Running: return "Running";
    case JobState::Collecting: return "Collecting";
    case JobState::Succeeded: return "Succeeded";
    case JobState::Failed: return "Failed";
    case JobState::Cancelled: return "Cancelled";
  }
  return "Queued";
}

std::string_view to_string(JobEvent e) noexcept {
  switch (e) {
    case JobEvent::ProvisionStarted: return "ProvisionStarted";
    case JobEvent::NodesReady: return "NodesReady";
    case JobEvent::SetupDone: return "SetupDone";
    case JobEvent::RunCompleted: return "RunCompleted";
    case JobEvent::OutputsStored: return "OutputsStored";
    case JobEvent::ErrorRaised: return "ErrorRaised";
    case JobEvent::CancelRequested: return "CancelRequested";
  }
  return "ErrorRaised";
}

JobState state_from_string(std::string_view s) {
  for (auto st : kAllStates) {
    if (to_string(st) == s) return st;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown job state '" + std::string(s) + "'");
}

JobEvent event_from_string(std::string_view s) {
  for (auto ev : kAllEvents) {
    if (to_string(ev) == s) return ev;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown job event '" + std::string(s) + "'");
}

bool is_terminal(JobState s) noexcept {
  return s == JobState::Succeeded || s == JobState::Failed || s == JobState::Cancelled;
}

std::optional<JobState> try_transition(JobState current, JobEvent event) noexcept {
  if (is_terminal(current)) return std::nullopt;
  switch (event) {
    case JobEvent::ErrorRaised: return JobState::Failed;
    case JobEvent::CancelRequested: return JobState::Cancelled;
    case JobEvent::ProvisionStarted:
      if (current == JobState::Queued) return JobState::Provisioning;
      break;
    case JobEvent::NodesReady:
      if (current == JobState::Provisioning) return JobState::Setup;
      break;
    case JobEvent::SetupDone:
      if (current == JobState::Setup) return JobState::Running;
      break;
    case JobEvent::RunCompleted:
      if (current == JobState::Running) return JobState::Collecting;
      break;
    case JobEvent::OutputsStored:
      if (current == JobState::Collecting) return JobState::Succeeded;
      break;
  }
  return std::nullopt;
}

JobState transition(JobState current, JobEvent event) {
  if (auto next = try_transition(current, event)) return *next;
  throw Error(ErrorCode::InvalidTransition, "invalid transition (" + std::string(to_string(current)) +
                                                ", " + std::string(to_string(event)) + ")");
}

void Job::enqueue(std::int64_t timestamp_us) {
  state = JobState::Queued;
  events.clear();
  events.push_back({timestamp_us, JobState::Queued, std::nullopt, {}});
}

JobState Job::apply(JobEvent event, std::int64_t timestamp_us, std::vector<std::string> log_lines) {
  const auto next = transition(state, event);
  if (!events.empty() && timestamp_us <= events.back().timestamp_us) {
    timestamp_us = events.back().timestamp_us + 1;
  }
  events.push_back({timestamp_us, next, event, std::move(log_lines)});
  state = next;
  return next;
}

JobState replay(const std::vector<JobRecordEntry>& events) {
  JobState s = JobState::Queued;
  for (const auto& e : events) {
    if (e.event) s = transition(s, *e.event);
  }
  return s;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const ProvisioningPlan& p) {
  j = json{{"instance", p.instance},
           {"num_nodes", p.num_nodes},
           {"total_slots", p.total_slots},
           {"backend", to_string(p.backend)}};
}

void from_json(const json& j, ProvisioningPlan& p) {
  p.instance = j.at("instance").get<catalog::InstanceType>();
  p.num_nodes = j.at("num_nodes").get<int>();
  p.total_slots = j.at("total_slots").get<int>();
  p.backend = backend_from_string(j.at("backend").get<std::string>());
}

void to_json(json& j, const MpiPlan& m) {
  json ranks = json::array();
  for (const auto& r : m.rank_map) ranks.push_back({r.rank, r.node_index});
  j = json{{"np", m.np},
           {"grid", {{"nx", m.grid.nx}, {"ny", m.grid.ny}}},
           {"hostfile_text", m.hostfile_text},
           {"rank_map", ranks},
           {"slots_per_node", m.slots_per_node},
           {"metadata", m.metadata}};
}

void from_json(const json& j, MpiPlan& m) {
  m.np = j.at("np").get<int>();
  m.grid = {j.at("grid").at("nx").get<int>(), j.at("grid").at("ny").get<int>()};
  m.hostfile_text = j.at("hostfile_text").get<std::string>();
  m.rank_map.clear();
  for (const auto& r : j.at("rank_map")) m.rank_map.push_back({r.at(0).get<int>(), r.at(1).get<int>()});
  m.slots_per_node = j.at("slots_per_node").get<std::vector<int>>();
  m.metadata = j.value("metadata", std::map<std::string, std::string>{});
}

void to_json(json& j, const JobRecordEntry& e) {
  j = json{{"timestamp_us", e.timestamp_us},
           {"state", to_string(e.state)},
           {"event", e.event ? json(to_string(*e.event)) : json(nullptr)},
           {"log", e.log_lines}};
}

void from_json(const json& j, JobRecordEntry& e) {
  e.timestamp_us = j.at("timestamp_us").get<std::int64_t>();
  e.state = state_from_string(j.at("state").get<std::string>());
  e.event.reset();
  if (!j.at("event").is_null()) e.event = event_from_string(j.at("event").get<std::string>());
  e.log_lines = j.value("log", std::vector<std::string>{});
}

void to_json(json& j, const Job& job) {
  j = json{{"id", job.id},
           {"principal", job.principal},
           {"workspace", job.workspace},
           {"template", {{"name", job.template_version.name}, {"version", job.template_version.version}}},
           {"environment", job.environment},
           {"parameters", job.parameters},
           {"commands",
            {{"setup", job.commands.setup ? json(*job.commands.setup) : json(nullptr)},
             {"run", job.commands.run}}},
           {"plan", job.plan},
           {"mpi", job.mpi ? json(*job.mpi) : json(nullptr)},
           {"state", to_string(job.state)},
           {"events", job.events},
           {"budget_reservation",
            job.budget_reservation ? json(*job.budget_reservation) : json(nullptr)}};
}

void from_json(const json& j, Job& job) {
  job.id = j.at("id").get<std::string>();
  job.principal = j.value("principal", "");
  job.workspace = j.value("workspace", "");
  job.template_version = {j.at("template").at("name").get<std::string>(),
                          j.at("template").at("version").get<int>()};
  job.environment = j.at("environment").get<workflow::EnvironmentSpec>();
  job.parameters = j.at("parameters").get<workflow::ParameterSet>();
  const auto& c = j.at("commands");
  job.commands.setup.reset();
  if (!c.at("setup").is_null()) job.commands.setup = c.at("setup").get<std::string>();
  job.commands.run = c.at("run").get<std::string>();
  job.plan = j.at("plan").get<ProvisioningPlan>();
  job.mpi.reset();
  if (!j.at("mpi").is_null()) job.mpi = j.at("mpi").get<MpiPlan>();
  job.state = state_from_string(j.at("state").get<std::string>());
  job.events = j.at("events").get<std::vector<JobRecordEntry>>();
  job.budget_reservation.reset();
  if (!j.at("budget_reservation").is_null())
    job.budget_reservation = j.at("budget_reservation").get<std::string>();
}

}  // namespace adviser::execution
