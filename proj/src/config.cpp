#include "adviser/config.hpp"

#include "adviser/error.hpp"

namespace adviser {

using nlohmann::json;

namespace {

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_absolute() ? path : base / path;
}

// A value that is either an inline object or a path to a JSON file.
json inline_or_file(const json& v, const std::filesystem::path& base) {
  if (v.is_string()) return json::parse(read_file(resolve(base, v.get<std::string>())));
  return v;
}

}  // namespace

ServiceConfig make_service_config(const json& doc, const std::filesystem::path& base_dir) {
  ServiceConfig cfg;
  try {
    cfg.services.catalog =
        catalog::load_catalog_file(resolve(base_dir, doc.value("catalog", "catalog.json")).string());
    cfg.services.templates = std::make_shared<workflow::TemplateRegistry>(
        resolve(base_dir, doc.value("templates_dir", "templates")).string());
    cfg.services.directory = std::make_shared<governance::Directory>();
    cfg.services.budgets = std::make_shared<governance::BudgetLedger>();
    if (doc.contains("governance")) {
      governance::load_config(inline_or_file(doc["governance"], base_dir), *cfg.services.directory,
                              *cfg.services.budgets);
    }
    cfg.options.state_dir = resolve(base_dir, doc.value("state_dir", "state"));
    if (doc.contains("sim_params")) {
      auto sim = inline_or_file(doc["sim_params"], base_dir);
      cfg.options.sim_params = (sim.contains("params") ? sim["params"] : sim).get<backends::SimParams>();
    }
    cfg.options.workers = doc.value("workers", 4);
    cfg.options.default_wall_hours_cap = doc.value("default_wall_hours_cap", 1.0);
    cfg.options.local_timeout =
        std::chrono::milliseconds(static_cast<std::int64_t>(doc.value("local_timeout_seconds", 3600.0) * 1000));
    cfg.options.sim_time_scale = doc.value("sim_time_scale", 0.0);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad service config: ") + e.what());
  }
  if (cfg.options.workers < 1) throw Error(ErrorCode::InvalidArgument, "workers must be >= 1");
  if (!(cfg.options.default_wall_hours_cap > 0))
    throw Error(ErrorCode::InvalidArgument, "default_wall_hours_cap must be > 0");
  return cfg;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "bad service config " + path.string() + ": " + e.what());
  }
  return make_service_config(doc, path.parent_path().empty() ? "." : path.parent_path());
}

}  // namespace adviser
