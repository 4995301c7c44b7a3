#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "adviser/catalog.hpp"
#include "adviser/execution.hpp"
#include "json.hpp"

namespace adviser::gateway {

struct TemplateRef {
  std::string name;
  std::optional<int> version;  // latest when empty

  bool operator==(const TemplateRef&) const = default;
};

struct RunRequest {
  std::optional<std::string> run_command;
  std::optional<std::string> setup_command;
  catalog::ResourceRequirements requirements;
  std::optional<TemplateRef> template_ref;
  // Raw override text, typed against the template's declarations at submit.
  std::map<std::string, std::string> overrides;
  execution::Backend backend = execution::Backend::simulated;
  std::string workspace = "default";
  bool dry_run = false;
  bool wait = false;

  bool operator==(const RunRequest&) const = default;
};

// Grammar (after the `run` verb, optionally preceded by `adviser`):
//   <command>                  positional run command
//   --setup <cmd>              setup command
//   --template <name[@ver]>    registered template instead of a positional command
//   --set <key=value>          parameter override (repeatable)
//   --gpu N  --ram GiB  --cpus N  --cloud P  --num-nodes K
//   --instance-type T  --max-price USD
//   --backend local|simulated  --workspace W  --dry-run  --wait
//   --                         every later token is positional
// Throws UnknownFlag, MissingFlagValue, ConflictingCommandSources or
// InvalidArgument; never anything else.
RunRequest parse_run_command(const std::vector<std::string>& argv);

// Renders a request back to argv (starting with "run") so that
// parse_run_command(to_argv(r)) == r.
std::vector<std::string> to_argv(const RunRequest& r);

// Rank count from a `--np N`, `-np N` or `-n N` token in a run command.
std::optional<int> extract_rank_count(const std::string& run_command);

void to_json(nlohmann::json& j, const RunRequest& r);
void from_json(const nlohmann::json& j, RunRequest& r);

}  // namespace adviser::gateway
