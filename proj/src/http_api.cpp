#include "adviser/http_api.hpp"

#include <limits>
#include <optional>

#include "adviser/error.hpp"
#include "httplib.h"

namespace adviser::gateway {

using nlohmann::json;

int http_status(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::PermissionDenied: return 403;
    case ErrorCode::UnknownJob:
    case ErrorCode::UnknownTemplate:
    case ErrorCode::UnknownBudget:
    case ErrorCode::UnknownResource:
    case ErrorCode::UnknownReservation: return 404;
    case ErrorCode::BudgetExhausted: return 402;
    case ErrorCode::InvalidTransition:
    case ErrorCode::DoubleSettle: return 409;
    case ErrorCode::NoFeasibleInstance:
    case ErrorCode::UnknownInstanceType:
    case ErrorCode::InfeasibleExplicitChoice:
    case ErrorCode::InsufficientSlots:
    case ErrorCode::ValidationFailed:
    case ErrorCode::UnknownParameter:
    case ErrorCode::TypeMismatch: return 422;
    case ErrorCode::StoreFailure: return 500;
    default: return 400;
  }
}

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e) {
  json body{{"error", to_string(e.code())}, {"message", e.what()}};
  if (const auto* v = dynamic_cast<const workflow::ValidationFailed*>(&e)) {
    body["violations"] = json::array();
    for (const auto& x : v->violations())
      body["violations"].push_back({{"field", x.field}, {"rule", x.rule}, {"message", x.message}});
  }
  if (const auto* b = dynamic_cast<const governance::BudgetExhausted*>(&e)) {
    body["headroom"] = b->headroom().to_string();
  }
  send_json(res, body, http_status(e.code()));
}

std::string principal_of(const httplib::Request& req) {
  auto p = req.get_header_value(kPrincipalHeader);
  if (p.empty()) throw Error(ErrorCode::PermissionDenied, std::string("missing ") + kPrincipalHeader + " header");
  return p;
}

// Wraps a handler so every adviser::Error becomes a structured response.
template <class F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const json::exception& e) {
      send_error(res, Error(ErrorCode::InvalidArgument, e.what()));
    } catch (const std::exception& e) {
      send_json(res, {{"error", "Internal"}, {"message", e.what()}}, 500);
    }
  };
}

json job_summary(const execution::Job& job) {
  json j{{"id", job.id},
         {"state", execution::to_string(job.state)},
         {"template", {{"name", job.template_version.name}, {"version", job.template_version.version}}},
         {"instance", job.plan.instance.name},
         {"provider", job.plan.instance.provider},
         {"num_nodes", job.plan.num_nodes},
         {"backend", execution::to_string(job.plan.backend)},
         {"principal", job.principal},
         {"submitted_at_us", job.submitted_at()}};
  return j;
}

json dry_run_json(const DryRunResult& d) {
  return json{{"plan", d.plan},
              {"mpi", d.mpi ? json(*d.mpi) : json(nullptr)},
              {"commands",
               {{"setup", d.commands.setup ? json(*d.commands.setup) : json(nullptr)}, {"run", d.commands.run}}},
              {"rationale", d.rationale},
              {"cost_estimate", d.cost_estimate.to_string()}};
}

}  // namespace

void mount_routes(httplib::Server& server, Orchestrator& orch) {
  server.Post("/v1/jobs", guarded([&orch](const httplib::Request& req, httplib::Response& res) {
                const auto principal = principal_of(req);
                auto run = json::parse(req.body).get<RunRequest>();
                auto result = orch.submit(run, principal);
                if (result.dry_run) {
                  send_json(res, {{"dry_run", dry_run_json(*result.dry_run)}});
                  return;
                }
                if (run.wait) orch.wait(*result.job_id);
                send_json(res, {{"job_id", *result.job_id}}, 201);
              }));

  server.Get("/v1/jobs", guarded([&orch](const httplib::Request& req, httplib::Response& res) {
               // ?group=G keeps jobs whose owner is a member of G.
               std::optional<governance::Group> group;
               if (req.has_param("group")) {
                 for (auto& g : orch.services().directory->groups())
                   if (g.id == req.get_param_value("group")) group = g;
                 if (!group) throw Error(ErrorCode::InvalidArgument, "unknown group " + req.get_param_value("group"));
               }
               json out = json::array();
               for (const auto& j : orch.jobs(principal_of(req))) {
                 if (group && !group->members.count("*") && !group->members.count(j.principal)) continue;
                 out.push_back(job_summary(j));
               }
               send_json(res, out);
             }));

  server.Get(R"(/v1/jobs/([^/]+))", guarded([&orch](const httplib::Request& req, httplib::Response& res) {
               send_json(res, json(orch.job(req.matches[1], principal_of(req))));
             }));

  server.Post(R"(/v1/jobs/([^/]+)/cancel)",
              guarded([&orch](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                orch.cancel(id, principal_of(req));
                send_json(res, {{"job_id", id}, {"cancel_requested", true}}, 202);
              }));

  server.Get(R"(/v1/jobs/([^/]+)/record)",
             guarded([&orch](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               orch.job(id, principal_of(req));  // permission + existence
               auto r = orch.record_for(id);
               if (!r) throw Error(ErrorCode::UnknownJob, "no provenance record for " + id + " yet");
               send_json(res, results::to_document(*r));
             }));

  // Server-sent events. Each event id is the index in the job's event log;
  // a reconnecting client sends Last-Event-ID and receives what follows.
  server.Get(R"(/v1/jobs/([^/]+)/events)",
             guarded([&orch](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               const auto principal = principal_of(req);
               orch.job(id, principal);
               std::size_t from = 0;
               if (req.has_header("Last-Event-ID")) {
                 from = std::stoul(req.get_header_value("Last-Event-ID")) + 1;
               } else if (req.has_param("from")) {
                 from = std::stoul(req.get_param_value("from"));
               }
               res.set_header("Cache-Control", "no-cache");
               res.set_chunked_content_provider(
                   "text/event-stream", [&orch, id, principal, from](std::size_t, httplib::DataSink& sink) {
                     orch.stream(id, principal, from, [&](const StreamEvent& ev) {
                       json data = ev.entry;
                       std::string msg = "id: " + std::to_string(ev.index) + "\nevent: state\ndata: " +
                                         data.dump() + "\n\n";
                       return sink.write(msg.data(), msg.size());
                     });
                     sink.done();
                     return true;
                   });
             }));

  server.Get("/v1/templates", guarded([&orch](const httplib::Request& req, httplib::Response& res) {
               principal_of(req);
               json out = json::array();
               for (const auto& t : orch.services().templates->list())
                 out.push_back({{"name", t.name}, {"version", t.version}});
               send_json(res, out);
             }));

  server.Post("/v1/templates", guarded([&orch](const httplib::Request& req, httplib::Response& res) {
                const auto principal = principal_of(req);
                const auto workspace = req.has_param("workspace") ? req.get_param_value("workspace") : "default";
                auto t = json::parse(req.body).get<workflow::WorkflowTemplate>();
                auto d = orch.services().directory->check_permission(
                    principal, workspace, {governance::ResourceKind::workflow, "*"}, governance::Action::write);
                if (!d.allowed) throw Error(ErrorCode::PermissionDenied, d.reason);
                auto id = orch.services().templates->register_template(std::move(t));
                send_json(res, {{"name", id.name}, {"version", id.version}}, 201);
              }));

  server.Get(R"(/v1/templates/([^/]+))", guarded([&orch](const httplib::Request& req, httplib::Response& res) {
               principal_of(req);
               send_json(res, json(orch.services().templates->latest(req.matches[1])));
             }));

  server.Get(R"(/v1/templates/([^/]+)/(\d+))",
             guarded([&orch](const httplib::Request& req, httplib::Response& res) {
               principal_of(req);
               const workflow::TemplateVersion id{req.matches[1], std::stoi(req.matches[2])};
               res.status = 200;
               res.set_content(orch.services().templates->fetch_bytes(id), "application/json");
             }));

  server.Get("/v1/records", guarded([&orch](const httplib::Request& req, httplib::Response& res) {
               principal_of(req);
               std::vector<results::ProvenanceRecord> found;
               if (req.has_param("template")) {
                 const auto from = req.has_param("from") ? std::stoll(req.get_param_value("from")) : 0LL;
                 const auto to = req.has_param("to") ? std::stoll(req.get_param_value("to"))
                                                     : std::numeric_limits<long long>::max();
                 found = orch.records().find(req.get_param_value("template"), from, to);
               } else {
                 found = orch.records().all();
               }
               json out = json::array();
               for (const auto& r : found) out.push_back(results::to_document(r));
               send_json(res, out);
             }));

  server.Get("/v1/records/compare", guarded([&orch](const httplib::Request& req, httplib::Response& res) {
               principal_of(req);
               auto load = [&](const char* key) {
                 if (!req.has_param(key))
                   throw Error(ErrorCode::InvalidArgument, std::string("missing query parameter ") + key);
                 auto r = orch.records().get(req.get_param_value(key));
                 if (!r) throw Error(ErrorCode::UnknownJob, "no record " + req.get_param_value(key));
                 return *r;
               };
               json out = json::array();
               for (const auto& d : results::compare_runs(load("a"), load("b")))
                 out.push_back({{"path", d.path}, {"a", d.a}, {"b", d.b}});
               send_json(res, out);
             }));

  server.Get(R"(/v1/records/([^/]+))", guarded([&orch](const httplib::Request& req, httplib::Response& res) {
               principal_of(req);
               auto r = orch.records().get(req.matches[1]);
               if (!r) throw Error(ErrorCode::UnknownJob, "no record " + std::string(req.matches[1]));
               send_json(res, results::to_document(*r));
             }));

  // Scaling table (CSV) over stored records of one template, grouped by rank count.
  server.Get("/v1/scaling", guarded([&orch](const httplib::Request& req, httplib::Response& res) {
               principal_of(req);
               if (!req.has_param("template"))
                 throw Error(ErrorCode::InvalidArgument, "missing query parameter template");
               auto recs = orch.records().find(req.get_param_value("template"), 0,
                                               std::numeric_limits<std::int64_t>::max());
               res.status = 200;
               res.set_content(results::export_scaling_table(results::series_from_records(recs)), "text/csv");
             }));

  server.Get("/v1/catalog", guarded([&orch](const httplib::Request& req, httplib::Response& res) {
               principal_of(req);
               send_json(res, catalog::to_json(orch.services().catalog));
             }));

  server.Get("/v1/budgets", guarded([&orch](const httplib::Request& req, httplib::Response& res) {
               principal_of(req);
               json out = json::array();
               for (const auto& b : orch.services().budgets->list()) out.push_back(governance::to_json(b));
               send_json(res, out);
             }));

  server.Get(R"(/v1/budgets/([^/]+))", guarded([&orch](const httplib::Request& req, httplib::Response& res) {
               principal_of(req);
               const std::string id = req.matches[1];
               auto body = governance::to_json(orch.services().budgets->get(id));
               body["overages"] = json::array();
               for (const auto& o : orch.services().budgets->overages(id)) {
                 body["overages"].push_back({{"reservation", o.reservation},
                                             {"estimate", o.estimate.to_string()},
                                             {"actual", o.actual.to_string()},
                                             {"uncovered", o.uncovered.to_string()}});
               }
               send_json(res, body);
             }));
}

}  // namespace adviser::gateway
