#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "adviser/catalog.hpp"
#include "adviser/error.hpp"
#include "json.hpp"

namespace adviser::workflow {

enum class ParameterKind { number, string, boolean };

std::string_view to_string(ParameterKind k) noexcept;
ParameterKind kind_from_string(std::string_view s);

using ParameterValue = std::variant<double, std::string, bool>;

ParameterKind kind_of(const ParameterValue& v) noexcept;

// Shortest round-trippable decimal for numbers ("0.5", "96"), true/false for
// booleans, raw text for strings.
std::string canonical_text(const ParameterValue& v);

struct ParameterDecl {
  std::string name;
  ParameterKind kind = ParameterKind::string;
  ParameterValue default_value = std::string{};
  std::string description;

  bool operator==(const ParameterDecl&) const = default;
};

struct EnvironmentSpec {
  std::optional<std::string> image_ref;
  std::map<std::string, std::string> env_vars;
  std::vector<std::string> required_tools;

  bool operator==(const EnvironmentSpec&) const = default;
};

struct ParameterSet {
  std::map<std::string, ParameterValue> values;

  bool operator==(const ParameterSet&) const = default;
};

struct TemplateVersion {
  std::string name;
  int version = 1;

  bool operator==(const TemplateVersion&) const = default;
  auto operator<=>(const TemplateVersion&) const = default;
};

struct WorkflowTemplate {
  std::string name;
  int version = 0;  // assigned by the registry
  std::optional<std::string> setup_command;
  std::string run_command;
  // Kept as a list so that duplicate declarations can be reported.
  std::vector<ParameterDecl> parameters;
  EnvironmentSpec environment;
  std::string description;
  std::optional<catalog::ResourceRequirements> default_requirements;
  // Used to size budget reservations when set.
  std::optional<double> expected_duration_hours;

  const ParameterDecl* find_parameter(std::string_view name) const;
  TemplateVersion id() const { return {name, version}; }

  bool operator==(const WorkflowTemplate&) const = default;
};

struct Violation {
  std::string field;
  std::string rule;
  std::string message;

  bool operator==(const Violation&) const = default;
};

struct ExecutablePlan {
  std::optional<std::string> setup;
  std::string run;

  bool operator==(const ExecutablePlan&) const = default;
};

// Placeholder names in order of appearance (duplicates kept). Malformed or
// unterminated markers are reported through `malformed` when non-null.
std::vector<std::string> scan_placeholders(std::string_view command,
                                           std::vector<std::string>* malformed = nullptr);

std::vector<Violation> validate_template(const WorkflowTemplate& t);

ParameterSet resolve_parameters(const WorkflowTemplate& t,
                                const std::map<std::string, ParameterValue>& overrides);

ExecutablePlan render_commands(const WorkflowTemplate& t, const ParameterSet& p);

// Wraps a raw setup/run pair into a single-use template named from a digest
// of the commands.
WorkflowTemplate make_adhoc_template(const std::optional<std::string>& setup,
                                     const std::string& run);

// Parses a CLI/HTTP override value against the declared kind.
ParameterValue parse_value(ParameterKind kind, std::string_view text);

class ValidationFailed : public Error {
 public:
  explicit ValidationFailed(std::vector<Violation> violations);
  const std::vector<Violation>& violations() const { return violations_; }

 private:
  std::vector<Violation> violations_;
};

// Append-only store of templates. Registration is serialized; each stored
// template is kept as its canonical JSON bytes so fetches are byte-identical.
// With a directory, templates are also written there as <name>@<version>.json
// and reloaded on construction.
class TemplateRegistry {
 public:
  TemplateRegistry() = default;
  explicit TemplateRegistry(std::string directory);

  TemplateVersion register_template(WorkflowTemplate t);

  WorkflowTemplate fetch(const TemplateVersion& id) const;
  std::string fetch_bytes(const TemplateVersion& id) const;
  WorkflowTemplate latest(const std::string& name) const;
  std::vector<TemplateVersion> list() const;

 private:
  std::optional<std::string> directory_;
  mutable std::shared_mutex mutex_;
  std::map<TemplateVersion, std::string> stored_;
  std::map<std::string, int> latest_;
};

void to_json(nlohmann::json& j, const ParameterValue& v);
// ParameterValue is a std:: type, so ADL cannot find to_json for it.
nlohmann::json value_to_json(const ParameterValue& v);
void to_json(nlohmann::json& j, const ParameterDecl& d);
void from_json(const nlohmann::json& j, ParameterDecl& d);
void to_json(nlohmann::json& j, const EnvironmentSpec& e);
void from_json(const nlohmann::json& j, EnvironmentSpec& e);
void to_json(nlohmann::json& j, const ParameterSet& p);
void from_json(const nlohmann::json& j, ParameterSet& p);
void to_json(nlohmann::json& j, const WorkflowTemplate& t);
void from_json(const nlohmann::json& j, WorkflowTemplate& t);

// JSON value -> ParameterValue without kind checking.
ParameterValue value_from_json(const nlohmann::json& j);

WorkflowTemplate load_template_file(const std::string& path);

}  // namespace adviser::workflow
