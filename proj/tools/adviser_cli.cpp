// adviser command-line client.
//
// With ADVISER_ADDR (or --addr) set, every verb is an HTTP call against a
// running `adviser serve`. Without it the service is started in-process from
// the configuration file and torn down on exit.

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "adviser/config.hpp"
#include "adviser/error.hpp"
#include "adviser/gateway.hpp"
#include "adviser/http_api.hpp"
#include "adviser/orchestrator.hpp"
#include "httplib.h"
#include "json.hpp"

using nlohmann::json;
namespace fs = std::filesystem;
using adviser::Error;
using adviser::ErrorCode;

namespace {

constexpr int kCancelledExit = 2;

std::string env_or(const char* name, std::string fallback) {
  const char* v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

std::string format_time(std::int64_t us) {
  std::time_t secs = static_cast<std::time_t>(us / 1000000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[48];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<long long>(us % 1000000));
  return buf;
}

class Api {
 public:
  Api(const std::string& host, int port, std::string principal)
      : client_(host, port), principal_(std::move(principal)) {
    client_.set_read_timeout(24 * 3600, 0);
  }

  json get(const std::string& path) { return parse(client_.Get(path, headers())); }
  json post(const std::string& path, const json& body) {
    return parse(client_.Post(path, headers(), body.dump(), "application/json"));
  }
  json post_raw(const std::string& path, const std::string& body) {
    return parse(client_.Post(path, headers(), body, "application/json"));
  }
  std::string get_text(const std::string& path) {
    auto res = client_.Get(path, headers());
    check(res);
    return res->body;
  }

  // Server-sent events; calls on_data with each event's data payload.
  void stream(const std::string& path, std::size_t from, const std::function<void(const json&)>& on_data) {
    auto h = headers();
    if (from > 0) h.emplace("Last-Event-ID", std::to_string(from - 1));
    std::string buffer;
    int status = 0;
    std::string error_body;
    auto res = client_.Get(
        path, h,
        [&](const httplib::Response& r) {
          status = r.status;
          return true;
        },
        [&](const char* data, std::size_t n) {
          if (status != 200) {
            error_body.append(data, n);
            return true;
          }
          buffer.append(data, n);
          std::size_t end;
          while ((end = buffer.find("\n\n")) != std::string::npos) {
            std::string block = buffer.substr(0, end);
            buffer.erase(0, end + 2);
            std::size_t pos = 0;
            while (pos < block.size()) {
              auto nl = block.find('\n', pos);
              if (nl == std::string::npos) nl = block.size();
              auto line = block.substr(pos, nl - pos);
              if (line.rfind("data: ", 0) == 0) on_data(json::parse(line.substr(6)));
              pos = nl + 1;
            }
          }
          return true;
        });
    if (!res) throw Error(ErrorCode::InvalidArgument, "cannot reach service: " + httplib::to_string(res.error()));
    if (status != 200) raise(status, error_body);
  }

 private:
  httplib::Headers headers() const { return {{adviser::gateway::kPrincipalHeader, principal_}}; }

  static void check(const httplib::Result& res) {
    if (!res) throw Error(ErrorCode::InvalidArgument, "cannot reach service: " + httplib::to_string(res.error()));
    if (res->status >= 300) raise(res->status, res->body);
  }

  [[noreturn]] static void raise(int status, const std::string& body) {
    json err = json::parse(body, nullptr, false);
    std::string message = body;
    std::optional<ErrorCode> code;
    if (err.is_object()) {
      message = err.value("message", body);
      code = adviser::error_code_from_string(err.value("error", ""));
      if (err.contains("violations")) {
        for (const auto& v : err["violations"])
          message += "\n  " + v.value("field", "") + ": " + v.value("message", "");
      }
    }
    if (!code) throw std::runtime_error("HTTP " + std::to_string(status) + ": " + message);
    throw Error(*code, message);
  }

  json parse(const httplib::Result& res) {
    check(res);
    return res->body.empty() ? json(nullptr) : json::parse(res->body);
  }

  httplib::Client client_;
  std::string principal_;
};

// The service running inside this process, reachable on a loopback port.
class Embedded {
 public:
  explicit Embedded(const fs::path& config_path) {
    auto cfg = adviser::load_service_config(config_path);
    orchestrator_ = std::make_unique<adviser::gateway::Orchestrator>(std::move(cfg.services), cfg.options);
    adviser::gateway::mount_routes(server_, *orchestrator_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw Error(ErrorCode::InvalidArgument, "cannot bind a loopback port");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  ~Embedded() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
    orchestrator_->shutdown();
  }

  int port() const { return port_; }
  adviser::gateway::Orchestrator& orchestrator() { return *orchestrator_; }

 private:
  std::unique_ptr<adviser::gateway::Orchestrator> orchestrator_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

void print_entry(const json& e) {
  std::cout << format_time(e.at("timestamp_us").get<std::int64_t>()) << "  " << e.at("state").get<std::string>();
  if (!e.at("event").is_null()) std::cout << "  (" << e.at("event").get<std::string>() << ")";
  std::cout << "\n";
  for (const auto& line : e.value("log", json::array())) std::cout << "    " << line.get<std::string>() << "\n";
}

int summarize_job(Api& api, const std::string& id) {
  auto job = api.get("/v1/jobs/" + id);
  const auto state = job.at("state").get<std::string>();
  double hours = 0.0;
  adviser::Money cost;
  try {
    auto rec = adviser::results::from_document(api.get("/v1/jobs/" + id + "/record"));
    hours = rec.outcome.wall_time_hours;
    cost = adviser::catalog::estimate_cost(rec.resources.instance, std::max(0.0, hours), rec.resources.num_nodes);
  } catch (const Error&) {
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", hours);
  std::cout << id << " " << state << " wall_time_hours=" << buf << " cost_usd=" << cost.to_string() << "\n";
  if (state == "Succeeded") return 0;
  if (state == "Cancelled") return kCancelledExit;
  return adviser::exit_code(ErrorCode::RunFailed);
}

std::string query_escape(const std::string& s) { return httplib::detail::encode_query_param(s); }

// Admin verbs edit the governance document referenced by the service config.
fs::path governance_file(const fs::path& config_path) {
  auto doc = json::parse(adviser::read_file(config_path));
  if (!doc.contains("governance") || !doc["governance"].is_string())
    throw Error(ErrorCode::InvalidArgument, "service config has no governance file to edit");
  fs::path p = doc["governance"].get<std::string>();
  return p.is_absolute() ? p : config_path.parent_path() / p;
}

void save_governance(const fs::path& path, const json& doc) {
  adviser::governance::Directory dir;
  adviser::governance::BudgetLedger ledger;
  adviser::governance::load_config(doc, dir, ledger);  // reject edits that do not load
  adviser::write_file_atomic(path, doc.dump(2) + "\n");
}

json& find_by_id(json& list, const std::string& id, const char* what) {
  for (auto& item : list)
    if (item.value("id", "") == id) return item;
  throw Error(ErrorCode::InvalidArgument, std::string("unknown ") + what + " " + id);
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);

  // Global options come before the verb; `run` keeps its own grammar.
  std::size_t verb_at = 0;
  while (verb_at < args.size() && args[verb_at].rfind("-", 0) == 0) {
    const auto& a = args[verb_at];
    const bool has_value = a.find('=') == std::string::npos &&
                           (a == "--config" || a == "--as" || a == "--addr" || a == "-c");
    verb_at += has_value ? 2 : 1;
  }
  const bool is_run = verb_at < args.size() && args[verb_at] == "run";

  CLI::App app{"adviser: launch and track workflows on cloud resources"};
  app.require_subcommand(is_run ? 0 : 1);
  std::string config_path = env_or("ADVISER_CONFIG", "adviser.json");
  std::string principal = env_or("ADVISER_PRINCIPAL", env_or("USER", "anonymous"));
  std::string addr = env_or("ADVISER_ADDR", "");
  app.add_option("-c,--config", config_path, "service configuration file (ADVISER_CONFIG)");
  app.add_option("--as", principal, "principal to act as (ADVISER_PRINCIPAL)");
  app.add_option("--addr", addr, "service address host:port (ADVISER_ADDR)");

  auto* run_cmd = app.add_subcommand("run", "submit a run (see README for flags)");
  (void)run_cmd;

  auto* jobs = app.add_subcommand("jobs", "list, inspect and cancel jobs");
  jobs->require_subcommand(1);
  std::string group, job_id;
  bool follow = false;
  std::size_t from = 0;
  auto* jobs_list = jobs->add_subcommand("list", "list visible jobs");
  jobs_list->add_option("--group", group, "only jobs owned by members of this group");
  auto* jobs_show = jobs->add_subcommand("show", "print a job document");
  jobs_show->add_option("id", job_id)->required();
  auto* jobs_cancel = jobs->add_subcommand("cancel", "cancel a job");
  jobs_cancel->add_option("id", job_id)->required();
  auto* jobs_logs = jobs->add_subcommand("logs", "print state transitions and log lines");
  jobs_logs->add_option("id", job_id)->required();
  jobs_logs->add_flag("-f,--follow", follow, "keep streaming until the job is terminal");
  jobs_logs->add_option("--from", from, "first event index");
  auto* jobs_wait = jobs->add_subcommand("wait", "block until a job is terminal and print a summary");
  jobs_wait->add_option("id", job_id)->required();

  auto* templates = app.add_subcommand("templates", "workflow templates");
  templates->require_subcommand(1);
  std::string tname, tfile;
  int tversion = 0;
  auto* t_list = templates->add_subcommand("list", "list registered templates");
  auto* t_show = templates->add_subcommand("show", "print a template");
  t_show->add_option("name", tname)->required();
  t_show->add_option("--version", tversion, "exact version (default latest)");
  auto* t_register = templates->add_subcommand("register", "register a template file");
  t_register->add_option("file", tfile)->required()->check(CLI::ExistingFile);

  auto* catalog_cmd = app.add_subcommand("catalog", "instance catalog");
  catalog_cmd->require_subcommand(1);
  bool as_json = false;
  auto* catalog_show = catalog_cmd->add_subcommand("show", "print the catalog snapshot");
  catalog_show->add_flag("--json", as_json, "raw JSON");

  auto* budget = app.add_subcommand("budget", "shared budgets");
  budget->require_subcommand(1);
  std::string budget_id;
  auto* budget_show = budget->add_subcommand("show", "print one or all budgets");
  budget_show->add_option("id", budget_id);

  auto* results_cmd = app.add_subcommand("results", "provenance records and analytics");
  results_cmd->require_subcommand(1);
  std::string rid_a, rid_b, out_file;
  std::string template_filter;
  auto* r_list = results_cmd->add_subcommand("list", "list provenance records");
  r_list->add_option("--template", template_filter);
  auto* r_show = results_cmd->add_subcommand("show", "print one record");
  r_show->add_option("id", rid_a, "record id, or a job id for that job's record")->required();
  auto* r_compare = results_cmd->add_subcommand("compare", "field-level diff of two records");
  r_compare->add_option("a", rid_a)->required();
  r_compare->add_option("b", rid_b)->required();
  auto* r_export = results_cmd->add_subcommand("export", "scaling table as CSV");
  r_export->add_option("--template", template_filter)->required();
  r_export->add_option("-o,--output", out_file, "write to file instead of stdout");

  auto* admin = app.add_subcommand("admin", "edit the governance document");
  admin->require_subcommand(1);
  std::string a_group, a_member, a_workspace, a_resource, a_action;
  std::vector<std::string> a_members;
  double a_usd = 0;
  auto* a_group_create = admin->add_subcommand("group-create", "create a group");
  a_group_create->add_option("group", a_group)->required();
  a_group_create->add_option("--member", a_members, "initial members");
  auto* a_group_add = admin->add_subcommand("group-add", "add a member to a group");
  a_group_add->add_option("group", a_group)->required();
  a_group_add->add_option("principal", a_member)->required();
  auto* a_grant = admin->add_subcommand("grant", "grant an action on a resource");
  a_grant->add_option("workspace", a_workspace)->required();
  a_grant->add_option("resource", a_resource, "kind:id")->required();
  a_grant->add_option("group", a_group)->required();
  a_grant->add_option("action", a_action)->required()->check(CLI::IsMember({"read", "run", "write", "admin"}));
  auto* a_alloc = admin->add_subcommand("set-allocation", "set a budget allocation (creates it if absent)");
  a_alloc->add_option("budget", budget_id)->required();
  a_alloc->add_option("usd", a_usd)->required()->check(CLI::NonNegativeNumber);

  auto* calibrate = app.add_subcommand("calibrate", "fit simulator parameters to measured wall times");
  std::string obs_file;
  std::vector<std::string> obs_keys;
  calibrate->add_option("observations", obs_file, "JSON list of {np, num_nodes, wall_hours}, or an object of such lists")
      ->required()
      ->check(CLI::ExistingFile);
  calibrate->add_option("--series", obs_keys, "keys to use when the file holds several lists (default all)");
  calibrate->add_option("-o,--output", out_file, "write the parameter document here");

  auto* serve = app.add_subcommand("serve", "run the HTTP service");
  std::string listen = "127.0.0.1:8080";
  serve->add_option("--listen", listen, "host:port");

  try {
    if (is_run) {
      std::vector<std::string> head(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(verb_at));
      std::vector<std::string> cli_args;
      cli_args.push_back(argv[0]);
      cli_args.insert(cli_args.end(), head.begin(), head.end());
      app.parse(std::vector<std::string>(cli_args.rbegin(), cli_args.rend() - 1));
    } else {
      app.parse(argc, argv);
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (serve->parsed()) {
      auto colon = listen.rfind(':');
      if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "--listen wants host:port");
      auto cfg = adviser::load_service_config(config_path);
      adviser::gateway::Orchestrator orch(std::move(cfg.services), cfg.options);
      httplib::Server server;
      adviser::gateway::mount_routes(server, orch);
      std::cerr << "adviser: listening on " << listen << "\n";
      if (!server.listen(listen.substr(0, colon), std::stoi(listen.substr(colon + 1))))
        throw Error(ErrorCode::InvalidArgument, "cannot listen on " + listen);
      return 0;
    }

    if (calibrate->parsed()) {
      auto doc = json::parse(adviser::read_file(obs_file));
      std::vector<adviser::backends::Observation> obs;
      auto take = [&](const json& list) {
        for (const auto& o : list)
          obs.push_back({o.at("np").get<int>(), o.value("num_nodes", 1), o.at("wall_hours").get<double>()});
      };
      std::vector<std::string> used;
      if (doc.is_array()) {
        take(doc);
      } else {
        for (const auto& [k, v] : doc.items()) {
          if (!v.is_array()) continue;
          if (!obs_keys.empty() && std::find(obs_keys.begin(), obs_keys.end(), k) == obs_keys.end()) continue;
          take(v);
          used.push_back(k);
        }
      }
      auto params = adviser::backends::calibrate_model(obs);
      json fitted = params;
      json errors = json::array();
      for (const auto& o : obs) {
        const double model = adviser::backends::model_wall_hours(o.np, o.num_nodes, params);
        errors.push_back({{"np", o.np}, {"num_nodes", o.num_nodes}, {"observed_hours", o.wall_hours},
                          {"model_hours", model}, {"relative_error", (model - o.wall_hours) / o.wall_hours}});
      }
      json out{{"comment", "least-squares fit (squared relative error) of " + fs::path(obs_file).filename().string() +
                               (used.empty() ? std::string() : " series " + json(used).dump())},
               {"params", fitted},
               {"fit", errors}};
      if (out_file.empty()) {
        std::cout << out.dump(2) << "\n";
      } else {
        adviser::write_file_atomic(out_file, out.dump(2) + "\n");
      }
      return 0;
    }

    if (admin->parsed()) {
      const auto path = governance_file(config_path);
      json doc = json::parse(adviser::read_file(path));
      if (a_group_create->parsed()) {
        for (const auto& g : doc.value("groups", json::array()))
          if (g.value("id", "") == a_group) throw Error(ErrorCode::InvalidArgument, "group exists: " + a_group);
        doc["groups"].push_back({{"id", a_group}, {"members", a_members}});
      } else if (a_group_add->parsed()) {
        find_by_id(doc["groups"], a_group, "group")["members"].push_back(a_member);
      } else if (a_grant->parsed()) {
        auto& ws = find_by_id(doc["workspaces"], a_workspace, "workspace");
        if (!ws.contains("resources")) ws["resources"] = json::array();
        bool known = false;
        for (const auto& r : ws["resources"]) known = known || r == a_resource;
        if (!known) ws["resources"].push_back(a_resource);
        ws["acl"].push_back({{"resource", a_resource}, {"group", a_group}, {"actions", {a_action}}});
      } else if (a_alloc->parsed()) {
        bool found = false;
        for (auto& b : doc["budgets"])
          if (b.value("id", "") == budget_id) b["allocation"] = a_usd, found = true;
        if (!found) doc["budgets"].push_back({{"id", budget_id}, {"allocation", a_usd}});
      }
      save_governance(path, doc);
      std::cout << "updated " << path.string() << "\n";
      return 0;
    }

    std::unique_ptr<Embedded> embedded;
    std::unique_ptr<Api> api;
    if (addr.empty()) {
      embedded = std::make_unique<Embedded>(config_path);
      api = std::make_unique<Api>("127.0.0.1", embedded->port(), principal);
    } else {
      auto colon = addr.rfind(':');
      if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "service address wants host:port");
      api = std::make_unique<Api>(addr.substr(0, colon), std::stoi(addr.substr(colon + 1)), principal);
    }

    if (is_run) {
      std::vector<std::string> run_args(args.begin() + static_cast<std::ptrdiff_t>(verb_at), args.end());
      auto req = adviser::gateway::parse_run_command(run_args);
      auto res = api->post("/v1/jobs", json(req));
      if (res.contains("dry_run")) {
        std::cout << res["dry_run"].dump(2) << "\n";
        return 0;
      }
      const auto id = res.at("job_id").get<std::string>();
      if (req.wait) return summarize_job(*api, id);
      std::cout << id << "\n";
      // An in-process job dies with the process, so see it through.
      if (embedded) embedded->orchestrator().wait(id);
      return 0;
    }

    if (jobs_list->parsed()) {
      auto list = api->get("/v1/jobs" + (group.empty() ? "" : "?group=" + query_escape(group)));
      for (const auto& j : list) {
        std::cout << j["id"].get<std::string>() << "  " << j["state"].get<std::string>() << "  "
                  << j["template"]["name"].get<std::string>() << "@" << j["template"]["version"].get<int>()
                  << "  " << j["instance"].get<std::string>() << " x" << j["num_nodes"].get<int>() << "  "
                  << j["backend"].get<std::string>() << "  " << j["principal"].get<std::string>() << "\n";
      }
    } else if (jobs_show->parsed()) {
      std::cout << api->get("/v1/jobs/" + job_id).dump(2) << "\n";
    } else if (jobs_cancel->parsed()) {
      api->post("/v1/jobs/" + job_id + "/cancel", json::object());
      std::cout << "cancel requested for " << job_id << "\n";
    } else if (jobs_logs->parsed()) {
      if (follow) {
        api->stream("/v1/jobs/" + job_id + "/events", from, print_entry);
      } else {
        auto job = api->get("/v1/jobs/" + job_id);
        const auto& events = job.at("events");
        for (std::size_t i = from; i < events.size(); ++i) print_entry(events[i]);
      }
    } else if (jobs_wait->parsed()) {
      api->stream("/v1/jobs/" + job_id + "/events", 0, [](const json&) {});
      return summarize_job(*api, job_id);
    } else if (t_list->parsed()) {
      for (const auto& t : api->get("/v1/templates"))
        std::cout << t["name"].get<std::string>() << "@" << t["version"].get<int>() << "\n";
    } else if (t_show->parsed()) {
      auto path = "/v1/templates/" + tname + (tversion > 0 ? "/" + std::to_string(tversion) : "");
      std::cout << api->get(path).dump(2) << "\n";
    } else if (t_register->parsed()) {
      auto id = api->post_raw("/v1/templates", adviser::read_file(tfile));
      std::cout << id["name"].get<std::string>() << "@" << id["version"].get<int>() << "\n";
    } else if (catalog_show->parsed()) {
      auto snap = api->get("/v1/catalog");
      if (as_json) {
        std::cout << snap.dump(2) << "\n";
      } else {
        std::cout << "snapshot " << snap.value("snapshot_date", "") << " (" << snap.value("source_label", "")
                  << ")\n";
        std::printf("%-6s %-12s %-22s %5s %8s %4s %8s %10s %s\n", "cloud", "region", "instance", "vcpu", "mem_gib",
                    "gpu", "net_gbps", "usd_hour", "class");
        for (const auto& e : snap["entries"]) {
          std::printf("%-6s %-12s %-22s %5d %8.1f %4d %8.1f %10.5f %s\n", e["provider"].get<std::string>().c_str(),
                      e["region"].get<std::string>().c_str(), e["name"].get<std::string>().c_str(),
                      e["vcpus"].get<int>(), e["memory_gib"].get<double>(), e["gpus"].get<int>(),
                      e["network_gbps"].get<double>(), e["price_per_hour"].get<double>(),
                      e["family_class"].get<std::string>().c_str());
        }
        std::fflush(stdout);
      }
    } else if (budget_show->parsed()) {
      json list = budget_id.empty() ? api->get("/v1/budgets") : json::array({api->get("/v1/budgets/" + budget_id)});
      for (const auto& b : list) {
        std::cout << b["id"].get<std::string>() << "  allocation=" << b["allocation"].get<std::string>()
                  << "  spent=" << b["spent"].get<std::string>() << "  reserved=" << b["reserved"].get<std::string>()
                  << "  headroom=" << b["headroom"].get<std::string>() << "\n";
        for (const auto& o : b.value("overages", json::array())) {
          std::cout << "  overage " << o["reservation"].get<std::string>() << " estimate="
                    << o["estimate"].get<std::string>() << " actual=" << o["actual"].get<std::string>()
                    << " uncovered=" << o["uncovered"].get<std::string>() << "\n";
        }
      }
    } else if (r_list->parsed()) {
      auto list = api->get("/v1/records" +
                           (template_filter.empty() ? "" : "?template=" + query_escape(template_filter)));
      for (const auto& r : list) {
        std::cout << r["record_id"].get<std::string>() << "  " << r["job_id"].get<std::string>() << "  "
                  << r["template"]["name"].get<std::string>() << "@" << r["template"]["version"].get<int>() << "  "
                  << r["outcome"]["final_state"].get<std::string>() << "\n";
      }
    } else if (r_show->parsed()) {
      const auto path = rid_a.rfind("job-", 0) == 0 ? "/v1/jobs/" + rid_a + "/record" : "/v1/records/" + rid_a;
      std::cout << api->get(path).dump(2) << "\n";
    } else if (r_compare->parsed()) {
      auto diffs = api->get("/v1/records/compare?a=" + query_escape(rid_a) + "&b=" + query_escape(rid_b));
      for (const auto& d : diffs)
        std::cout << d["path"].get<std::string>() << ": " << d["a"].dump() << " -> " << d["b"].dump() << "\n";
    } else if (r_export->parsed()) {
      auto csv = api->get_text("/v1/scaling?template=" + query_escape(template_filter));
      if (out_file.empty()) {
        std::cout << csv;
      } else {
        adviser::write_file_atomic(out_file, csv);
      }
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "adviser: " << adviser::to_string(e.code()) << ": " << e.what() << "\n";
    return adviser::exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "adviser: " << e.what() << "\n";
    return 1;
  }
}
