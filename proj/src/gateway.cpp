#include "adviser/gateway.hpp"

#include <charconv>
#include <cmath>
#include <set>

#include "adviser/error.hpp"
#include "adviser/workflow.hpp"

namespace adviser::gateway {

using nlohmann::json;

namespace {

[[noreturn]] void invalid(const std::string& m) { throw Error(ErrorCode::InvalidArgument, m); }

int parse_int(std::string_view flag, std::string_view text, int min) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || v < min) {
    invalid(std::string(flag) + " expects an integer >= " + std::to_string(min) + ", got '" +
            std::string(text) + "'");
  }
  return v;
}

double parse_double(std::string_view flag, std::string_view text, bool allow_zero) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v) ||
      v < 0 || (!allow_zero && v == 0)) {
    invalid(std::string(flag) + " expects a " + (allow_zero ? "non-negative" : "positive") +
            " number, got '" + std::string(text) + "'");
  }
  return v;
}

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

const std::set<std::string, std::less<>> kValueFlags = {
    "--setup",     "--template",  "--set",     "--gpu",     "--ram",      "--cpus",    "--cloud",
    "--num-nodes", "--instance-type", "--max-price", "--backend", "--workspace"};
const std::set<std::string, std::less<>> kSwitches = {"--dry-run", "--wait"};

}  // namespace

RunRequest parse_run_command(const std::vector<std::string>& argv) {
  std::size_t i = 0;
  if (i < argv.size() && argv[i] == "adviser") ++i;
  if (i >= argv.size() || argv[i] != "run") invalid("expected the 'run' verb");
  ++i;

  RunRequest req;
  std::set<std::string> seen;
  auto once = [&](const std::string& flag) {
    if (!seen.insert(flag).second) invalid("flag " + flag + " given more than once");
  };

  bool positional_only = false;
  for (; i < argv.size(); ++i) {
    const std::string& tok = argv[i];
    if (!positional_only && tok == "--") {
      positional_only = true;
      continue;
    }
    if (!positional_only && tok.size() > 1 && tok[0] == '-') {
      std::string flag = tok;
      std::optional<std::string> value;
      if (const auto eq = tok.find('='); tok.rfind("--", 0) == 0 && eq != std::string::npos) {
        flag = tok.substr(0, eq);
        value = tok.substr(eq + 1);
      }
      if (kSwitches.count(flag)) {
        if (value) invalid(flag + " takes no value");
        once(flag);
        if (flag == "--dry-run") req.dry_run = true;
        if (flag == "--wait") req.wait = true;
        continue;
      }
      if (!kValueFlags.count(flag)) throw Error(ErrorCode::UnknownFlag, "unknown flag " + flag);
      if (!value) {
        if (i + 1 >= argv.size() || argv[i + 1].rfind("--", 0) == 0) {
          throw Error(ErrorCode::MissingFlagValue, "flag " + flag + " needs a value");
        }
        value = argv[++i];
      }
      const std::string& v = *value;
      if (flag != "--set") once(flag);

      if (flag == "--setup") {
        if (v.empty()) invalid("--setup needs a command");
        req.setup_command = v;
      } else if (flag == "--template") {
        TemplateRef ref;
        const auto at = v.rfind('@');
        ref.name = v.substr(0, at);
        if (at != std::string::npos) ref.version = parse_int("--template version", v.substr(at + 1), 1);
        if (ref.name.empty()) invalid("--template needs a name");
        req.template_ref = ref;
      } else if (flag == "--set") {
        const auto eq = v.find('=');
        if (eq == std::string::npos || eq == 0) invalid("--set expects key=value, got '" + v + "'");
        const auto key = v.substr(0, eq);
        if (req.overrides.count(key)) invalid("parameter " + key + " overridden twice");
        req.overrides[key] = v.substr(eq + 1);
      } else if (flag == "--gpu") {
        req.requirements.min_gpus = parse_int(flag, v, 0);
      } else if (flag == "--ram") {
        req.requirements.min_memory_gib = parse_double(flag, v, false);
      } else if (flag == "--cpus") {
        req.requirements.min_vcpus = parse_int(flag, v, 1);
      } else if (flag == "--cloud") {
        if (v.empty()) invalid("--cloud needs a provider");
        req.requirements.provider = v;
      } else if (flag == "--num-nodes") {
        req.requirements.num_nodes = parse_int(flag, v, 1);
      } else if (flag == "--instance-type") {
        if (v.empty()) invalid("--instance-type needs a name");
        req.requirements.instance_type = v;
      } else if (flag == "--max-price") {
        req.requirements.max_price_per_hour = Money::from_dollars(parse_double(flag, v, true));
      } else if (flag == "--backend") {
        req.backend = execution::backend_from_string(v);
      } else if (flag == "--workspace") {
        if (v.empty()) invalid("--workspace needs an id");
        req.workspace = v;
      }
      continue;
    }
    if (req.run_command) {
      throw Error(ErrorCode::ConflictingCommandSources,
                  "more than one run command: '" + *req.run_command + "' and '" + tok + "'");
    }
    if (tok.empty()) invalid("run command is empty");
    req.run_command = tok;
  }

  if (req.run_command && req.template_ref) {
    throw Error(ErrorCode::ConflictingCommandSources,
                "give either a run command or --template, not both");
  }
  if (req.template_ref && req.setup_command) {
    throw Error(ErrorCode::ConflictingCommandSources,
                "--setup cannot be combined with --template (the template carries its own)");
  }
  if (!req.run_command && !req.template_ref) {
    throw Error(ErrorCode::ConflictingCommandSources, "no run command or --template given");
  }
  if (!req.overrides.empty() && !req.template_ref) {
    invalid("--set applies only to --template runs");
  }
  return req;
}

std::vector<std::string> to_argv(const RunRequest& r) {
  std::vector<std::string> out{"run"};
  auto add = [&](const std::string& flag, const std::string& value) {
    if (value.rfind("--", 0) == 0) {
      out.push_back(flag + "=" + value);
    } else {
      out.push_back(flag);
      out.push_back(value);
    }
  };
  if (r.template_ref) {
    add("--template", r.template_ref->name +
                          (r.template_ref->version ? "@" + std::to_string(*r.template_ref->version) : ""));
  }
  if (r.setup_command) add("--setup", *r.setup_command);
  const bool dash_command = r.run_command && r.run_command->rfind("-", 0) == 0;
  if (r.run_command && !dash_command) out.push_back(*r.run_command);
  for (const auto& [k, v] : r.overrides) add("--set", k + "=" + v);
  const auto& q = r.requirements;
  if (q.min_gpus) add("--gpu", std::to_string(*q.min_gpus));
  if (q.min_memory_gib) add("--ram", shortest(*q.min_memory_gib));
  if (q.min_vcpus) add("--cpus", std::to_string(*q.min_vcpus));
  if (q.provider) add("--cloud", *q.provider);
  if (q.num_nodes != 1) add("--num-nodes", std::to_string(q.num_nodes));
  if (q.instance_type) add("--instance-type", *q.instance_type);
  if (q.max_price_per_hour) add("--max-price", q.max_price_per_hour->to_string());
  if (r.backend != execution::Backend::simulated)
    add("--backend", std::string(execution::to_string(r.backend)));
  if (r.workspace != "default") add("--workspace", r.workspace);
  if (r.dry_run) out.push_back("--dry-run");
  if (r.wait) out.push_back("--wait");
  if (dash_command) {
    out.push_back("--");
    out.push_back(*r.run_command);
  }
  return out;
}

std::optional<int> extract_rank_count(const std::string& run_command) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : run_command) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '"' || c == '\'') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));

  auto as_count = [](std::string_view s) -> std::optional<int> {
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size() || v < 1) return std::nullopt;
    return v;
  };
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto& t = tokens[i];
    for (const char* prefix : {"--np=", "-np="}) {
      if (t.rfind(prefix, 0) == 0) {
        if (auto v = as_count(std::string_view(t).substr(std::char_traits<char>::length(prefix))))
          return v;
      }
    }
    if ((t == "--np" || t == "-np" || t == "-n") && i + 1 < tokens.size()) {
      if (auto v = as_count(tokens[i + 1])) return v;
    }
  }
  return std::nullopt;
}

void to_json(json& j, const RunRequest& r) {
  j = json::object();
  if (r.run_command) j["run_command"] = *r.run_command;
  if (r.setup_command) j["setup_command"] = *r.setup_command;
  j["requirements"] = r.requirements;
  if (r.template_ref) {
    j["template"] = {{"name", r.template_ref->name}};
    if (r.template_ref->version) j["template"]["version"] = *r.template_ref->version;
  }
  j["overrides"] = r.overrides;
  j["backend"] = execution::to_string(r.backend);
  j["workspace"] = r.workspace;
  j["dry_run"] = r.dry_run;
  j["wait"] = r.wait;
}

void from_json(const json& j, RunRequest& r) {
  r = RunRequest{};
  try {
    if (j.contains("run_command") && !j["run_command"].is_null())
      r.run_command = j["run_command"].get<std::string>();
    if (j.contains("setup_command") && !j["setup_command"].is_null())
      r.setup_command = j["setup_command"].get<std::string>();
    if (j.contains("requirements")) r.requirements = j["requirements"].get<catalog::ResourceRequirements>();
    if (j.contains("template") && !j["template"].is_null()) {
      TemplateRef ref{j["template"].at("name").get<std::string>(), std::nullopt};
      if (j["template"].contains("version")) ref.version = j["template"]["version"].get<int>();
      r.template_ref = ref;
    }
    if (j.contains("overrides")) {
      for (const auto& [k, v] : j["overrides"].items()) {
        r.overrides[k] = v.is_string() ? v.get<std::string>()
                                       : workflow::canonical_text(workflow::value_from_json(v));
      }
    }
    if (j.contains("backend")) r.backend = execution::backend_from_string(j["backend"].get<std::string>());
    r.workspace = j.value("workspace", std::string("default"));
    r.dry_run = j.value("dry_run", false);
    r.wait = j.value("wait", false);
  } catch (const json::exception& e) {
    invalid(std::string("bad run request: ") + e.what());
  }
  if (r.run_command && r.template_ref) {
    throw Error(ErrorCode::ConflictingCommandSources, "give either run_command or template, not both");
  }
  if (!r.run_command && !r.template_ref) {
    throw Error(ErrorCode::ConflictingCommandSources, "no run_command or template given");
  }
}

}  // namespace adviser::gateway
