#pragma once

#include <filesystem>
#include <string>

#include "adviser/fileio.hpp"
#include "adviser/orchestrator.hpp"
#include "json.hpp"

namespace adviser {

// Service configuration document (JSON). Relative paths resolve against the
// directory holding the document.
//
//   {
//     "catalog": "catalog.json",
//     "templates_dir": "templates",
//     "state_dir": "state",
//     "sim_params": "calibration.json" | { ...SimParams... },
//     "governance": "governance.json" | { ... },
//     "workers": 4,
//     "default_wall_hours_cap": 1.0,
//     "local_timeout_seconds": 3600,
//     "sim_time_scale": 0.0
//   }
struct ServiceConfig {
  gateway::Services services;
  gateway::OrchestratorOptions options;
};

ServiceConfig load_service_config(const std::filesystem::path& path);
ServiceConfig make_service_config(const nlohmann::json& doc, const std::filesystem::path& base_dir);

}  // namespace adviser
