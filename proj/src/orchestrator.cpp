#include "adviser/orchestrator.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "adviser/error.hpp"
#include "adviser/fileio.hpp"

namespace adviser::gateway {

using execution::Backend;
using execution::Job;
using execution::JobEvent;
using execution::JobState;
using governance::Action;
using governance::ResourceKind;
using governance::ResourceRef;
using nlohmann::json;

std::int64_t now_us() {
  return std::chrono::duration_cast<std::chrono::microseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

namespace {

ResourceRef compute_resource(Backend b) {
  return {ResourceKind::compute, std::string(execution::to_string(b))};
}

// Sleeps unless the token fires first; false when interrupted.
bool interruptible_sleep(std::chrono::duration<double> d, std::stop_token token) {
  if (d.count() <= 0) return !token.stop_requested();
  std::mutex m;
  std::condition_variable_any cv;
  std::unique_lock lock(m);
  return !cv.wait_for(lock, token, std::chrono::duration_cast<std::chrono::nanoseconds>(d),
                      [] { return false; });
}

std::vector<std::string> tail_lines(const std::string& text, std::size_t max_lines) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) lines.push_back(line);
  if (lines.size() > max_lines) lines.erase(lines.begin(), lines.end() - static_cast<long>(max_lines));
  return lines;
}

catalog::ResourceRequirements merge_requirements(const catalog::ResourceRequirements& request,
                                                 const std::optional<catalog::ResourceRequirements>& base) {
  if (!base) return request;
  auto out = *base;
  if (request.min_gpus) out.min_gpus = request.min_gpus;
  if (request.min_memory_gib) out.min_memory_gib = request.min_memory_gib;
  if (request.min_vcpus) out.min_vcpus = request.min_vcpus;
  if (request.provider) out.provider = request.provider;
  if (request.instance_type) out.instance_type = request.instance_type;
  if (request.num_nodes != 1) out.num_nodes = request.num_nodes;
  if (request.max_price_per_hour) out.max_price_per_hour = request.max_price_per_hour;
  return out;
}

}  // namespace

Orchestrator::Orchestrator(Services services, OrchestratorOptions options)
    : services_(std::move(services)),
      options_(std::move(options)),
      records_(options_.state_dir / "records") {
  backends::validate(options_.sim_params);
  std::filesystem::create_directories(options_.state_dir / "jobs");
  std::filesystem::create_directories(options_.state_dir / "work");
  load_existing();
  const int n = std::max(1, options_.workers);
  for (int i = 0; i < n; ++i) {
    workers_.emplace_back([this](std::stop_token st) { worker_loop(st); });
  }
}

Orchestrator::~Orchestrator() { shutdown(); }

void Orchestrator::shutdown() {
  if (workers_.empty()) return;
  {
    std::shared_lock lock(jobs_mutex_);
    for (auto& [_, h] : jobs_) h->cancel.request_stop();
  }
  for (auto& w : workers_) w.request_stop();
  queue_cv_.notify_all();
  workers_.clear();  // joins
}

std::string Orchestrator::new_job_id() {
  std::lock_guard lock(queue_mutex_);
  char buf[64];
  std::snprintf(buf, sizeof buf, "job-%llx-%04llx", static_cast<unsigned long long>(now_us()),
                static_cast<unsigned long long>(++id_counter_ & 0xFFFF));
  return buf;
}

void Orchestrator::load_existing() {
  std::map<std::string, results::ProvenanceRecord> by_job;
  for (auto& r : records_.all()) by_job[r.job_id] = std::move(r);

  for (const auto& entry : std::filesystem::directory_iterator(options_.state_dir / "jobs")) {
    if (entry.path().extension() != ".json") continue;
    Job job;
    try {
      job = json::parse(read_file(entry.path())).get<Job>();
    } catch (const std::exception&) {
      continue;
    }
    if (!execution::is_terminal(job.state)) {
      // Left behind by a previous process; nothing is driving it any more.
      job.apply(JobEvent::ErrorRaised, now_us(), {"orchestrator restarted before completion"});
      persist(job);
    }
    auto h = std::make_shared<Handle>();
    if (auto it = by_job.find(job.id); it != by_job.end()) {
      h->record_id = it->second.record_id;
      // Budgets live in memory; charge finished work again so spent survives a restart.
      if (job.budget_reservation) {
        const auto& res = *job.budget_reservation;
        try {
          auto rid = services_.budgets->reserve(res.substr(0, res.rfind('#')), Money{});
          services_.budgets->settle(rid, catalog::estimate_cost(job.plan.instance,
                                                                std::max(0.0, it->second.outcome.wall_time_hours),
                                                                job.plan.num_nodes));
        } catch (const Error&) {
        }
      }
    }
    h->job = std::move(job);
    h->finished = true;
    jobs_[h->job.id] = std::move(h);
  }
}

void Orchestrator::persist(const Job& job) const {
  write_file_atomic(options_.state_dir / "jobs" / (job.id + ".json"), json(job).dump(2));
}

SubmitResult Orchestrator::submit(const RunRequest& req, const std::string& principal) {
  const auto& dir = *services_.directory;

  auto require = [&](const ResourceRef& r) {
    auto d = dir.check_permission(principal, req.workspace, r, Action::run);
    if (!d.allowed) throw Error(ErrorCode::PermissionDenied, d.reason);
  };
  require(compute_resource(req.backend));

  workflow::WorkflowTemplate tmpl;
  std::map<std::string, workflow::ParameterValue> overrides;
  if (req.template_ref) {
    // Templates not registered individually fall under the workflow:* entry.
    try {
      require({ResourceKind::workflow, req.template_ref->name});
    } catch (const Error& e) {
      if (e.code() != ErrorCode::UnknownResource) throw;
      require({ResourceKind::workflow, "*"});
    }
    tmpl = req.template_ref->version
               ? services_.templates->fetch({req.template_ref->name, *req.template_ref->version})
               : services_.templates->latest(req.template_ref->name);
    for (const auto& [name, text] : req.overrides) {
      const auto* decl = tmpl.find_parameter(name);
      if (!decl) {
        throw Error(ErrorCode::UnknownParameter,
                    "template " + tmpl.name + " declares no parameter '" + name + "'");
      }
      overrides[name] = workflow::parse_value(decl->kind, text);
    }
  } else {
    if (!req.run_command) throw Error(ErrorCode::ConflictingCommandSources, "no command source");
    tmpl = workflow::make_adhoc_template(req.setup_command, *req.run_command);
  }

  const auto params = workflow::resolve_parameters(tmpl, overrides);
  const auto commands = workflow::render_commands(tmpl, params);
  const auto requirements = merge_requirements(req.requirements, tmpl.default_requirements);
  const auto selection = catalog::select_instance(requirements, services_.catalog);
  const auto plan = execution::plan_provisioning(requirements, services_.catalog, req.backend);

  std::optional<execution::MpiPlan> mpi;
  if (auto np = extract_rank_count(commands.run)) mpi = execution::build_mpi_envelope(*np, plan);

  const double hours = tmpl.expected_duration_hours.value_or(options_.default_wall_hours_cap);
  const auto estimate = catalog::estimate_cost(plan.instance, hours, plan.num_nodes);

  if (req.dry_run) {
    return {std::nullopt, DryRunResult{plan, mpi, commands, selection.rationale, estimate}};
  }

  std::optional<std::string> reservation;
  if (auto ws = dir.workspace(req.workspace); ws && !ws->budgets.empty()) {
    reservation = services_.budgets->reserve(ws->budgets.front(), estimate);
  }

  try {
    auto h = std::make_shared<Handle>();
    Job& job = h->job;
    job.id = new_job_id();
    job.principal = principal;
    job.workspace = req.workspace;
    job.template_version = tmpl.id();
    job.environment = tmpl.environment;
    job.parameters = params;
    job.commands = commands;
    job.plan = plan;
    job.mpi = mpi;
    job.budget_reservation = reservation;
    job.enqueue(now_us());
    job.events.front().log_lines.push_back(selection.rationale);
    job.events.front().log_lines.push_back("reserved " + estimate.to_string() + " USD");
    persist(job);
    const auto id = job.id;
    {
      std::unique_lock lock(jobs_mutex_);
      jobs_[id] = h;
    }
    {
      std::lock_guard lock(queue_mutex_);
      queue_.push_back(id);
    }
    queue_cv_.notify_one();
    return {id, std::nullopt};
  } catch (...) {
    if (reservation) services_.budgets->release(*reservation);
    throw;
  }
}

std::shared_ptr<Orchestrator::Handle> Orchestrator::handle(const std::string& id) const {
  std::shared_lock lock(jobs_mutex_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) throw Error(ErrorCode::UnknownJob, "unknown job " + id);
  return it->second;
}

void Orchestrator::check_read(const Job& job, const std::string& principal) const {
  if (job.principal == principal) return;
  try {
    auto d = services_.directory->check_permission(principal, job.workspace,
                                                   compute_resource(job.plan.backend), Action::read);
    if (d.allowed) return;
  } catch (const Error&) {
  }
  throw Error(ErrorCode::PermissionDenied, principal + " may not read job " + job.id);
}

Job Orchestrator::job(const std::string& id, const std::string& principal) const {
  auto h = handle(id);
  std::lock_guard lock(h->mutex);
  check_read(h->job, principal);
  return h->job;
}

std::vector<Job> Orchestrator::jobs(const std::string& principal) const {
  std::vector<std::shared_ptr<Handle>> handles;
  {
    std::shared_lock lock(jobs_mutex_);
    for (const auto& [_, h] : jobs_) handles.push_back(h);
  }
  std::vector<Job> out;
  for (const auto& h : handles) {
    std::lock_guard lock(h->mutex);
    try {
      check_read(h->job, principal);
      out.push_back(h->job);
    } catch (const Error&) {
    }
  }
  std::sort(out.begin(), out.end(),
            [](const Job& a, const Job& b) { return a.submitted_at() < b.submitted_at(); });
  return out;
}

void Orchestrator::cancel(const std::string& id, const std::string& principal) {
  auto h = handle(id);
  std::optional<std::string> release;
  {
    std::lock_guard lock(h->mutex);
    auto& job = h->job;
    if (job.principal != principal) {
      auto d = services_.directory->check_permission(principal, job.workspace,
                                                     compute_resource(job.plan.backend), Action::write);
      if (!d.allowed) throw Error(ErrorCode::PermissionDenied, d.reason);
    }
    if (execution::is_terminal(job.state)) {
      throw Error(ErrorCode::InvalidTransition,
                  "job " + id + " is already " + std::string(execution::to_string(job.state)));
    }
    h->cancel.request_stop();
    if (job.state == JobState::Queued) {
      job.apply(JobEvent::CancelRequested, now_us(), {"cancelled before start"});
      persist(job);
      release = job.budget_reservation;
      h->finished = true;
      h->changed.notify_all();
    }
  }
  if (release) services_.budgets->settle(*release, Money{});
}

void Orchestrator::stream(const std::string& id, const std::string& principal, std::size_t from_index,
                          const std::function<bool(const StreamEvent&)>& on_event) const {
  auto h = handle(id);
  {
    std::lock_guard lock(h->mutex);
    check_read(h->job, principal);
  }
  std::size_t next = from_index;
  for (;;) {
    StreamEvent ev;
    {
      std::unique_lock lock(h->mutex);
      h->changed.wait(lock, [&] {
        return h->job.events.size() > next || execution::is_terminal(h->job.state);
      });
      if (h->job.events.size() <= next) return;  // terminal and fully delivered
      ev = {next, h->job.events[next]};
    }
    ++next;
    if (!on_event(ev)) return;
    if (execution::is_terminal(ev.entry.state)) return;
  }
}

JobState Orchestrator::wait(const std::string& id, std::chrono::milliseconds timeout) const {
  auto h = handle(id);
  std::unique_lock lock(h->mutex);
  h->changed.wait_for(lock, timeout, [&] { return h->finished; });
  return h->job.state;
}

std::optional<results::ProvenanceRecord> Orchestrator::record_for(const std::string& job_id) const {
  auto h = handle(job_id);
  std::optional<std::string> rid;
  {
    std::lock_guard lock(h->mutex);
    rid = h->record_id;
  }
  if (rid) return records_.get(*rid);
  for (auto& r : records_.all()) {
    if (r.job_id == job_id) return r;
  }
  return std::nullopt;
}

void Orchestrator::worker_loop(std::stop_token stop) {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(queue_mutex_);
      if (!queue_cv_.wait(lock, stop, [&] { return !queue_.empty(); })) return;
      id = queue_.front();
      queue_.pop_front();
    }
    std::shared_ptr<Handle> h;
    try {
      h = handle(id);
    } catch (const Error&) {
      continue;
    }
    run_job(h);
  }
}

bool Orchestrator::advance(Handle& h, JobEvent event, std::vector<std::string> lines) {
  std::lock_guard lock(h.mutex);
  if (execution::is_terminal(h.job.state)) return false;
  bool proceed = true;
  if (h.cancel.stop_requested()) {
    event = JobEvent::CancelRequested;
    lines.push_back("cancel requested");
    proceed = false;
  }
  h.job.apply(event, now_us(), std::move(lines));
  persist(h.job);
  h.changed.notify_all();
  return proceed && !execution::is_terminal(h.job.state);
}

void Orchestrator::run_job(const std::shared_ptr<Handle>& hp) {
  Handle& h = *hp;
  Job job;
  {
    std::lock_guard lock(h.mutex);
    if (execution::is_terminal(h.job.state)) return;
    job = h.job;
  }
  const auto& params = options_.sim_params;
  const bool simulated = job.plan.backend == Backend::simulated;
  const auto workdir = options_.state_dir / "work" / job.id;
  const auto token = h.cancel.get_token();
  const int np = job.mpi ? job.mpi->np : 1;
  std::optional<backends::ExecutionOutcome> outcome;
  auto started = std::chrono::steady_clock::now();

  try {
    if (!advance(h, JobEvent::ProvisionStarted)) return finish(h, outcome, std::nullopt);

    std::vector<std::string> lines;
    if (simulated) {
      auto prov = backends::sim_provision(job.plan, params);
      for (const auto& n : prov.nodes) lines.push_back("provisioned " + n.hostname + " (" + job.plan.instance.name + ")");
      lines.push_back("simulated provisioning delay " + std::to_string(prov.delay_seconds) + " s");
      interruptible_sleep(std::chrono::duration<double>(prov.delay_seconds * options_.sim_time_scale), token);
    } else {
      lines.push_back("local host stands in for " + std::to_string(job.plan.num_nodes) + " x " +
                      job.plan.instance.name);
    }
    if (!advance(h, JobEvent::NodesReady, std::move(lines))) return finish(h, outcome, std::nullopt);

    started = std::chrono::steady_clock::now();
    if (simulated) {
      std::vector<std::string> env_lines;
      if (job.environment.image_ref) env_lines.push_back("environment " + *job.environment.image_ref);
      if (job.commands.setup) env_lines.push_back("setup: " + *job.commands.setup);
      if (!advance(h, JobEvent::SetupDone, std::move(env_lines))) return finish(h, outcome, std::nullopt);
      auto sim = backends::sim_execute(np, job.plan.num_nodes, params);
      interruptible_sleep(std::chrono::duration<double>(sim.wall_time_hours * 3600.0 * options_.sim_time_scale),
                          token);
      outcome = std::move(sim);
    } else {
      std::filesystem::create_directories(workdir);
      backends::LocalOptions local;
      local.timeout = options_.local_timeout;
      local.stop = token;
      local.env = job.environment.env_vars;
      local.env["ADVISER_JOB_ID"] = job.id;
      local.env["ADVISER_NUM_NODES"] = std::to_string(job.plan.num_nodes);
      if (job.mpi) {
        write_file_atomic(workdir / "hostfile", job.mpi->hostfile_text);
        local.env["ADVISER_HOSTFILE"] = std::filesystem::absolute(workdir / "hostfile").string();
        local.env["ADVISER_NP"] = std::to_string(job.mpi->np);
        local.env["ADVISER_GRID_NX"] = std::to_string(job.mpi->grid.nx);
        local.env["ADVISER_GRID_NY"] = std::to_string(job.mpi->grid.ny);
        for (const auto& [k, v] : job.mpi->metadata) local.env["ADVISER_MPI_" + k] = v;
      }
      bool setup_ok = true;
      if (job.commands.setup) {
        local.on_setup_done = [&] { setup_ok = advance(h, JobEvent::SetupDone, {"setup finished"}); };
      } else if (!advance(h, JobEvent::SetupDone)) {
        return finish(h, outcome, workdir);
      }
      outcome = backends::local_execute(job.commands, workdir, local);
      if (!setup_ok) return finish(h, outcome, workdir);
    }

    if (!advance(h, JobEvent::RunCompleted, tail_lines(outcome->log_text, 50)))
      return finish(h, outcome, workdir);
    advance(h, JobEvent::OutputsStored,
            {"stored " + std::to_string(outcome->output_refs.size()) + " output(s)"});
  } catch (const backends::CommandFailed& e) {
    auto lines = tail_lines(e.log(), 50);
    lines.insert(lines.begin(), std::string(to_string(e.code())) + ": " + e.what());
    advance(h, JobEvent::ErrorRaised, std::move(lines));
    backends::ExecutionOutcome failed;
    const std::chrono::duration<double, std::ratio<3600>> el = std::chrono::steady_clock::now() - started;
    failed.wall_time_hours = el.count();
    failed.exit_status = backends::ExitStatus::failure;
    failed.log_text = e.log();
    outcome = failed;
  } catch (const std::exception& e) {
    std::string what = e.what();
    if (const auto* err = dynamic_cast<const Error*>(&e)) what = std::string(to_string(err->code())) + ": " + what;
    advance(h, JobEvent::ErrorRaised, {what});
    backends::ExecutionOutcome failed;
    failed.exit_status = backends::ExitStatus::failure;
    failed.log_text = what;
    outcome = failed;
  }
  finish(h, outcome, simulated ? std::nullopt : std::optional(workdir));
}

void Orchestrator::finish(Handle& h, const std::optional<backends::ExecutionOutcome>& outcome,
                          const std::optional<std::filesystem::path>& workdir) {
  Job job;
  {
    std::lock_guard lock(h.mutex);
    if (!execution::is_terminal(h.job.state)) {
      h.job.apply(JobEvent::CancelRequested, now_us(), {"cancel requested"});
      persist(h.job);
    }
    job = h.job;
  }
  backends::ExecutionOutcome out;
  if (outcome) {
    out = *outcome;
  } else {
    out.exit_status = backends::ExitStatus::failure;
  }
  if (job.state != JobState::Succeeded) out.exit_status = backends::ExitStatus::failure;

  std::optional<std::string> rid;
  try {
    auto summary = results::summarize(job.state, out, workdir);
    rid = records_.record_run(job, summary, now_us()).record_id;
  } catch (const std::exception&) {
  }
  if (job.budget_reservation) {
    try {
      const double hours = std::max(0.0, out.wall_time_hours);
      services_.budgets->settle(*job.budget_reservation,
                                catalog::estimate_cost(job.plan.instance, hours, job.plan.num_nodes));
    } catch (const Error&) {
      // Already settled by a cancel of a queued job.
    }
  }
  std::lock_guard lock(h.mutex);
  h.record_id = rid;
  h.finished = true;
  h.changed.notify_all();
}

}  // namespace adviser::gateway
