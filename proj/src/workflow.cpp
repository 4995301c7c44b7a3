#include "adviser/workflow.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

#include "adviser/digest.hpp"
#include "adviser/error.hpp"
#include "adviser/fileio.hpp"

namespace adviser::workflow {

using nlohmann::json;

std::string_view to_string(ParameterKind k) noexcept {
  switch (k) {
    case ParameterKind::number: return "number";
    case ParameterKind::string: return "string";
    case ParameterKind::boolean: return "boolean";
  }
  return "string";
}

ParameterKind kind_from_string(std::string_view s) {
  if (s == "number") return ParameterKind::number;
  if (s == "string") return ParameterKind::string;
  if (s == "boolean") return ParameterKind::boolean;
  throw Error(ErrorCode::InvalidArgument, "unknown parameter kind '" + std::string(s) + "'");
}

ParameterKind kind_of(const ParameterValue& v) noexcept {
  if (std::holds_alternative<double>(v)) return ParameterKind::number;
  if (std::holds_alternative<bool>(v)) return ParameterKind::boolean;
  return ParameterKind::string;
}

std::string canonical_text(const ParameterValue& v) {
  if (const auto* d = std::get_if<double>(&v)) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, *d);
    return std::string(buf, end);
  }
  if (const auto* b = std::get_if<bool>(&v)) return *b ? "true" : "false";
  return std::get<std::string>(v);
}

ParameterValue parse_value(ParameterKind kind, std::string_view text) {
  switch (kind) {
    case ParameterKind::number: {
      double d = 0;
      auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), d);
      if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(d)) {
        throw Error(ErrorCode::TypeMismatch, "'" + std::string(text) + "' is not a number");
      }
      return d;
    }
    case ParameterKind::boolean:
      if (text == "true") return true;
      if (text == "false") return false;
      throw Error(ErrorCode::TypeMismatch, "'" + std::string(text) + "' is not a boolean");
    case ParameterKind::string:
      return std::string(text);
  }
  return std::string(text);
}

const ParameterDecl* WorkflowTemplate::find_parameter(std::string_view name) const {
  auto it = std::find_if(parameters.begin(), parameters.end(),
                         [&](const ParameterDecl& d) { return d.name == name; });
  return it == parameters.end() ? nullptr : &*it;
}

namespace {

bool valid_identifier(std::string_view s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

bool valid_template_name(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

struct Placeholder {
  std::size_t begin;  // offset of "{{"
  std::size_t end;    // one past "}}"
  std::string name;
  bool ok;
};

std::vector<Placeholder> find_placeholders(std::string_view s) {
  std::vector<Placeholder> out;
  std::size_t pos = 0;
  while ((pos = s.find("{{", pos)) != std::string_view::npos) {
    const auto close = s.find("}}", pos + 2);
    if (close == std::string_view::npos) {
      out.push_back({pos, s.size(), std::string(s.substr(pos + 2)), false});
      break;
    }
    std::string name(s.substr(pos + 2, close - pos - 2));
    out.push_back({pos, close + 2, name, valid_identifier(name)});
    pos = close + 2;
  }
  return out;
}

}  // namespace

std::vector<std::string> scan_placeholders(std::string_view command,
                                           std::vector<std::string>* malformed) {
  std::vector<std::string> names;
  for (auto& p : find_placeholders(command)) {
    if (p.ok) {
      names.push_back(p.name);
    } else if (malformed) {
      malformed->push_back(p.name);
    }
  }
  return names;
}

std::vector<Violation> validate_template(const WorkflowTemplate& t) {
  std::vector<Violation> v;
  if (!valid_template_name(t.name)) {
    v.push_back({"name", "format", "template name must be non-empty [A-Za-z0-9._-]"});
  }
  if (t.run_command.empty()) {
    v.push_back({"run_command", "required", "run_command must be non-empty"});
  }

  std::set<std::string> declared;
  for (const auto& d : t.parameters) {
    if (!valid_identifier(d.name)) {
      v.push_back({"parameters." + d.name, "format", "invalid parameter name '" + d.name + "'"});
    }
    if (!declared.insert(d.name).second) {
      v.push_back({"parameters." + d.name, "duplicate",
                   "duplicate parameter declaration " + d.name});
    }
    if (kind_of(d.default_value) != d.kind) {
      v.push_back({"parameters." + d.name, "default-kind",
                   "default of " + d.name + " does not conform to kind " +
                       std::string(to_string(d.kind))});
    }
  }

  auto check_command = [&](const std::string& field, const std::string& cmd) {
    std::vector<std::string> malformed;
    std::set<std::string> reported;
    for (const auto& name : scan_placeholders(cmd, &malformed)) {
      if (!declared.count(name) && reported.insert(name).second) {
        v.push_back({field, "undeclared-placeholder", "undeclared placeholder " + name});
      }
    }
    for (const auto& m : malformed) {
      v.push_back({field, "malformed-placeholder", "malformed placeholder {{" + m});
    }
  };
  if (t.setup_command) check_command("setup_command", *t.setup_command);
  check_command("run_command", t.run_command);

  for (const auto& [k, _] : t.environment.env_vars) {
    if (k.empty()) v.push_back({"environment.env_vars", "non-empty", "empty env var name"});
  }
  if (t.default_requirements && t.default_requirements->num_nodes < 1) {
    v.push_back({"default_requirements.num_nodes", "positive", "num_nodes must be >= 1"});
  }
  if (t.expected_duration_hours && !(*t.expected_duration_hours > 0)) {
    v.push_back({"expected_duration_hours", "positive", "expected_duration_hours must be > 0"});
  }
  return v;
}

ParameterSet resolve_parameters(const WorkflowTemplate& t,
                                const std::map<std::string, ParameterValue>& overrides) {
  for (const auto& [name, value] : overrides) {
    const auto* decl = t.find_parameter(name);
    if (!decl) {
      throw Error(ErrorCode::UnknownParameter,
                  "template " + t.name + " declares no parameter '" + name + "'");
    }
    if (kind_of(value) != decl->kind) {
      throw Error(ErrorCode::TypeMismatch, "parameter '" + name + "' expects a " +
                                               std::string(to_string(decl->kind)) + " value");
    }
  }
  ParameterSet p;
  for (const auto& d : t.parameters) p.values[d.name] = d.default_value;
  for (const auto& [name, value] : overrides) p.values[name] = value;
  return p;
}

namespace {

std::string render_one(const std::string& cmd, const ParameterSet& p) {
  std::string out;
  std::size_t last = 0;
  for (const auto& ph : find_placeholders(cmd)) {
    if (!ph.ok) continue;
    auto it = p.values.find(ph.name);
    if (it == p.values.end()) {
      throw Error(ErrorCode::MissingParameter, "no value for placeholder " + ph.name);
    }
    out.append(cmd, last, ph.begin - last);
    out += canonical_text(it->second);
    last = ph.end;
  }
  out.append(cmd, last, std::string::npos);
  return out;
}

}  // namespace

ExecutablePlan render_commands(const WorkflowTemplate& t, const ParameterSet& p) {
  ExecutablePlan plan;
  if (t.setup_command) plan.setup = render_one(*t.setup_command, p);
  plan.run = render_one(t.run_command, p);
  return plan;
}

WorkflowTemplate make_adhoc_template(const std::optional<std::string>& setup,
                                     const std::string& run) {
  WorkflowTemplate t;
  std::string key = setup.value_or("");
  key.push_back('\0');
  key += run;
  t.name = "adhoc-" + sha256_hex(key).substr(0, 12);
  t.version = 1;
  t.setup_command = setup;
  t.run_command = run;
  t.description = "single-use template from raw commands";
  return t;
}

ValidationFailed::ValidationFailed(std::vector<Violation> violations)
    : Error(ErrorCode::ValidationFailed,
            [&] {
              std::string msg = "template validation failed:";
              for (const auto& v : violations) msg += " [" + v.field + "] " + v.message + ";";
              return msg;
            }()),
      violations_(std::move(violations)) {}

// ---------------------------------------------------------------------------

TemplateRegistry::TemplateRegistry(std::string directory) : directory_(std::move(directory)) {
  namespace fs = std::filesystem;
  fs::create_directories(*directory_);
  for (const auto& entry : fs::directory_iterator(*directory_)) {
    if (entry.path().extension() != ".json") continue;
    auto t = json::parse(read_file(entry.path())).get<WorkflowTemplate>();
    if (t.version < 1) continue;
    stored_[t.id()] = json(t).dump();
    latest_[t.name] = std::max(latest_[t.name], t.version);
  }
}

TemplateVersion TemplateRegistry::register_template(WorkflowTemplate t) {
  t.version = 0;
  if (auto v = validate_template(t); !v.empty()) throw ValidationFailed(std::move(v));

  std::unique_lock lock(mutex_);
  t.version = latest_[t.name] + 1;
  auto bytes = json(t).dump();
  if (directory_) {
    write_file_atomic(std::filesystem::path(*directory_) /
                          (t.name + "@" + std::to_string(t.version) + ".json"),
                      bytes);
  }
  stored_.emplace(t.id(), std::move(bytes));
  latest_[t.name] = t.version;
  return t.id();
}

std::string TemplateRegistry::fetch_bytes(const TemplateVersion& id) const {
  std::shared_lock lock(mutex_);
  auto it = stored_.find(id);
  if (it == stored_.end()) {
    throw Error(ErrorCode::UnknownTemplate,
                "no template " + id.name + " version " + std::to_string(id.version));
  }
  return it->second;
}

WorkflowTemplate TemplateRegistry::fetch(const TemplateVersion& id) const {
  return json::parse(fetch_bytes(id)).get<WorkflowTemplate>();
}

WorkflowTemplate TemplateRegistry::latest(const std::string& name) const {
  int version = 0;
  {
    std::shared_lock lock(mutex_);
    auto it = latest_.find(name);
    if (it != latest_.end()) version = it->second;
  }
  if (version == 0) throw Error(ErrorCode::UnknownTemplate, "no template named " + name);
  return fetch({name, version});
}

std::vector<TemplateVersion> TemplateRegistry::list() const {
  std::shared_lock lock(mutex_);
  std::vector<TemplateVersion> out;
  for (const auto& [id, _] : stored_) out.push_back(id);
  return out;
}

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const ParameterValue& v) {
  std::visit([&](const auto& x) { j = x; }, v);
}

json value_to_json(const ParameterValue& v) {
  json j;
  to_json(j, v);
  return j;
}

ParameterValue value_from_json(const json& j) {
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  throw Error(ErrorCode::TypeMismatch, "parameter values must be numbers, strings or booleans");
}

void to_json(json& j, const ParameterDecl& d) {
  j = json{{"name", d.name},
           {"kind", to_string(d.kind)},
           {"default", value_to_json(d.default_value)},
           {"description", d.description}};
}

void from_json(const json& j, ParameterDecl& d) {
  d.name = j.at("name").get<std::string>();
  d.kind = kind_from_string(j.at("kind").get<std::string>());
  d.default_value = value_from_json(j.at("default"));
  d.description = j.value("description", "");
}

void to_json(json& j, const EnvironmentSpec& e) {
  j = json{{"image_ref", e.image_ref ? json(*e.image_ref) : json(nullptr)},
           {"env_vars", e.env_vars},
           {"required_tools", e.required_tools}};
}

void from_json(const json& j, EnvironmentSpec& e) {
  e = EnvironmentSpec{};
  if (j.contains("image_ref") && !j["image_ref"].is_null())
    e.image_ref = j["image_ref"].get<std::string>();
  if (j.contains("env_vars")) e.env_vars = j["env_vars"].get<std::map<std::string, std::string>>();
  if (j.contains("required_tools"))
    e.required_tools = j["required_tools"].get<std::vector<std::string>>();
}

void to_json(json& j, const ParameterSet& p) {
  j = json::object();
  for (const auto& [k, v] : p.values) j[k] = value_to_json(v);
}

void from_json(const json& j, ParameterSet& p) {
  p.values.clear();
  for (const auto& [k, v] : j.items()) p.values[k] = value_from_json(v);
}

void to_json(json& j, const WorkflowTemplate& t) {
  j = json{{"name", t.name},
           {"version", t.version},
           {"setup_command", t.setup_command ? json(*t.setup_command) : json(nullptr)},
           {"run_command", t.run_command},
           {"parameters", t.parameters},
           {"environment", t.environment},
           {"description", t.description}};
  j["default_requirements"] =
      t.default_requirements ? json(*t.default_requirements) : json(nullptr);
  j["expected_duration_hours"] =
      t.expected_duration_hours ? json(*t.expected_duration_hours) : json(nullptr);
}

void from_json(const json& j, WorkflowTemplate& t) {
  t = WorkflowTemplate{};
  t.name = j.at("name").get<std::string>();
  t.version = j.value("version", 0);
  if (j.contains("setup_command") && !j["setup_command"].is_null())
    t.setup_command = j["setup_command"].get<std::string>();
  t.run_command = j.at("run_command").get<std::string>();
  if (j.contains("parameters")) t.parameters = j["parameters"].get<std::vector<ParameterDecl>>();
  if (j.contains("environment")) t.environment = j["environment"].get<EnvironmentSpec>();
  t.description = j.value("description", "");
  if (j.contains("default_requirements") && !j["default_requirements"].is_null())
    t.default_requirements = j["default_requirements"].get<catalog::ResourceRequirements>();
  if (j.contains("expected_duration_hours") && !j["expected_duration_hours"].is_null())
    t.expected_duration_hours = j["expected_duration_hours"].get<double>();
}

WorkflowTemplate load_template_file(const std::string& path) {
  try {
    return json::parse(read_file(path)).get<WorkflowTemplate>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, "bad template file " + path + ": " + e.what());
  }
}

}  // namespace adviser::workflow
