#include "adviser/catalog.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <fstream>
#include <sstream>
#include <tuple>

#include "adviser/error.hpp"

namespace adviser::catalog {

using nlohmann::json;

std::string_view to_string(FamilyClass f) noexcept {
  switch (f) {
    case FamilyClass::compute: return "compute";
    case FamilyClass::general: return "general";
    case FamilyClass::memory: return "memory";
    case FamilyClass::hpc: return "hpc";
    case FamilyClass::accelerated: return "accelerated";
  }
  return "general";
}

FamilyClass family_from_string(std::string_view s) {
  for (auto f : {FamilyClass::compute, FamilyClass::general, FamilyClass::memory, FamilyClass::hpc,
                 FamilyClass::accelerated}) {
    if (to_string(f) == s) return f;
  }
  throw Error(ErrorCode::MalformedCatalog, "unknown family_class '" + std::string(s) + "'");
}

namespace {

auto sort_key(const InstanceType& t) { return std::tie(t.provider, t.region, t.name); }

std::string triple(const InstanceType& t) {
  return t.provider + "/" + t.region + "/" + t.name;
}

// 1-based line of the n-th occurrence of `needle`, or 0.
std::size_t line_of(std::string_view text, const std::string& needle, std::size_t nth) {
  std::size_t pos = 0;
  for (std::size_t i = 0; i <= nth; ++i) {
    pos = text.find(needle, i == 0 ? 0 : pos + 1);
    if (pos == std::string_view::npos) return 0;
  }
  return static_cast<std::size_t>(std::count(text.begin(), text.begin() + pos, '\n')) + 1;
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::MalformedCatalog, what);
}

}  // namespace

CatalogSnapshot::CatalogSnapshot(std::vector<InstanceType> entries, std::string snapshot_date,
                                 std::string source_label)
    : entries_(std::move(entries)),
      snapshot_date_(std::move(snapshot_date)),
      source_label_(std::move(source_label)) {
  std::sort(entries_.begin(), entries_.end(),
            [](const auto& a, const auto& b) { return sort_key(a) < sort_key(b); });
  auto dup = std::adjacent_find(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
    return sort_key(a) == sort_key(b);
  });
  if (dup != entries_.end()) {
    throw Error(ErrorCode::DuplicateEntry, "duplicate catalog entry " + triple(*dup));
  }
}

void to_json(json& j, const InstanceType& t) {
  j = json{{"provider", t.provider},
           {"region", t.region},
           {"name", t.name},
           {"vcpus", t.vcpus},
           {"memory_gib", t.memory_gib},
           {"gpus", t.gpus},
           {"gpu_model", t.gpu_model ? json(*t.gpu_model) : json(nullptr)},
           {"network_gbps", t.network_gbps},
           {"price_per_hour", t.price_per_hour.dollars()},
           {"family_class", to_string(t.family_class)}};
}

void from_json(const json& j, InstanceType& t) {
  require(j.is_object(), "entry is not an object");
  auto str = [&](const char* key) {
    require(j.contains(key) && j.at(key).is_string(), std::string("missing string field '") + key + "'");
    return j.at(key).get<std::string>();
  };
  auto num = [&](const char* key) {
    require(j.contains(key) && j.at(key).is_number(), std::string("missing numeric field '") + key + "'");
    return j.at(key).get<double>();
  };
  auto integer = [&](const char* key) {
    require(j.contains(key) && j.at(key).is_number_integer(),
            std::string("missing integer field '") + key + "'");
    return j.at(key).get<int>();
  };
  t.provider = str("provider");
  t.region = str("region");
  t.name = str("name");
  t.vcpus = integer("vcpus");
  t.memory_gib = num("memory_gib");
  t.gpus = j.contains("gpus") ? integer("gpus") : 0;
  t.gpu_model.reset();
  if (j.contains("gpu_model") && !j.at("gpu_model").is_null()) t.gpu_model = str("gpu_model");
  t.network_gbps = num("network_gbps");
  t.price_per_hour = Money::from_dollars(num("price_per_hour"));
  t.family_class = family_from_string(str("family_class"));

  require(!t.provider.empty() && !t.region.empty() && !t.name.empty(),
          "provider, region and name must be non-empty");
  require(t.vcpus >= 1, "vcpus must be >= 1");
  require(t.memory_gib > 0, "memory_gib must be > 0");
  require(t.gpus >= 0, "gpus must be >= 0");
  require(t.network_gbps > 0, "network_gbps must be > 0");
  require(t.price_per_hour >= Money{}, "price_per_hour must be >= 0");
}

void to_json(json& j, const ResourceRequirements& r) {
  j = json::object();
  if (r.min_gpus) j["min_gpus"] = *r.min_gpus;
  if (r.min_memory_gib) j["min_memory_gib"] = *r.min_memory_gib;
  if (r.min_vcpus) j["min_vcpus"] = *r.min_vcpus;
  if (r.provider) j["provider"] = *r.provider;
  if (r.instance_type) j["instance_type"] = *r.instance_type;
  j["num_nodes"] = r.num_nodes;
  if (r.max_price_per_hour) j["max_price_per_hour"] = r.max_price_per_hour->dollars();
}

void from_json(const json& j, ResourceRequirements& r) {
  r = ResourceRequirements{};
  if (j.contains("min_gpus")) r.min_gpus = j.at("min_gpus").get<int>();
  if (j.contains("min_memory_gib")) r.min_memory_gib = j.at("min_memory_gib").get<double>();
  if (j.contains("min_vcpus")) r.min_vcpus = j.at("min_vcpus").get<int>();
  if (j.contains("provider")) r.provider = j.at("provider").get<std::string>();
  if (j.contains("instance_type")) r.instance_type = j.at("instance_type").get<std::string>();
  if (j.contains("num_nodes")) r.num_nodes = j.at("num_nodes").get<int>();
  if (j.contains("max_price_per_hour"))
    r.max_price_per_hour = Money::from_dollars(j.at("max_price_per_hour").get<double>());
  if (r.num_nodes < 1) throw Error(ErrorCode::InvalidArgument, "num_nodes must be >= 1");
}

json to_json(const CatalogSnapshot& s) {
  return json{{"snapshot_date", s.snapshot_date()},
              {"source_label", s.source_label()},
              {"entries", s.entries()}};
}

CatalogSnapshot load_catalog(std::string_view source) {
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, source.size());
    const auto line = std::count(source.begin(), source.begin() + upto, '\n') + 1;
    throw Error(ErrorCode::MalformedCatalog,
                "catalog parse error at line " + std::to_string(line) + ": " + e.what());
  }
  require(doc.is_object(), "catalog document must be an object");
  require(doc.contains("snapshot_date") && doc["snapshot_date"].is_string(),
          "missing snapshot_date");
  require(doc.contains("source_label") && doc["source_label"].is_string(), "missing source_label");
  require(doc.contains("entries") && doc["entries"].is_array(), "missing entries array");

  const auto date = doc["snapshot_date"].get<std::string>();
  {
    int y = 0, m = 0, d = 0;
    char tail = 0;
    require(date.size() == 10 && std::sscanf(date.c_str(), "%4d-%2d-%2d%c", &y, &m, &d, &tail) == 3 &&
                m >= 1 && m <= 12 && d >= 1 && d <= 31,
            "snapshot_date must be an ISO-8601 date (YYYY-MM-DD)");
  }

  std::vector<InstanceType> entries;
  std::map<std::string, std::size_t> seen_names;
  const auto& arr = doc["entries"];
  for (std::size_t i = 0; i < arr.size(); ++i) {
    std::string name_hint;
    if (arr[i].is_object() && arr[i].contains("name") && arr[i]["name"].is_string()) {
      name_hint = "\"" + arr[i]["name"].get<std::string>() + "\"";
    }
    const auto nth = name_hint.empty() ? 0 : seen_names[name_hint]++;
    try {
      entries.push_back(arr[i].get<InstanceType>());
    } catch (const Error& e) {
      const auto line = name_hint.empty() ? 0 : line_of(source, name_hint, nth);
      throw Error(ErrorCode::MalformedCatalog,
                  "entries[" + std::to_string(i) + "]" +
                      (line ? " (line " + std::to_string(line) + ")" : "") + ": " + e.what());
    } catch (const json::exception& e) {
      throw Error(ErrorCode::MalformedCatalog,
                  "entries[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return CatalogSnapshot(std::move(entries), date, doc["source_label"].get<std::string>());
}

CatalogSnapshot load_catalog_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::MalformedCatalog, "cannot open catalog file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return load_catalog(ss.str());
}

bool satisfies(const ResourceRequirements& req, const InstanceType& inst) {
  if (req.min_gpus && inst.gpus < *req.min_gpus) return false;
  if (req.min_memory_gib && inst.memory_gib < *req.min_memory_gib) return false;
  if (req.min_vcpus && inst.vcpus < *req.min_vcpus) return false;
  if (req.provider && inst.provider != *req.provider) return false;
  if (req.max_price_per_hour && inst.price_per_hour > *req.max_price_per_hour) return false;
  return true;
}

std::vector<InstanceType> filter_feasible(const ResourceRequirements& req,
                                          const CatalogSnapshot& snapshot) {
  std::vector<InstanceType> out;
  std::copy_if(snapshot.entries().begin(), snapshot.entries().end(), std::back_inserter(out),
               [&](const InstanceType& t) { return satisfies(req, t); });
  return out;
}

namespace {

std::string describe_constraints(const ResourceRequirements& req) {
  std::vector<std::string> parts;
  auto fmt = [](double v) {
    std::ostringstream s;
    s << v;
    return s.str();
  };
  if (req.min_gpus) parts.push_back("gpus>=" + std::to_string(*req.min_gpus));
  if (req.min_memory_gib) parts.push_back("memory_gib>=" + fmt(*req.min_memory_gib));
  if (req.min_vcpus) parts.push_back("vcpus>=" + std::to_string(*req.min_vcpus));
  if (req.provider) parts.push_back("provider=" + *req.provider);
  if (req.max_price_per_hour) parts.push_back("price<=" + req.max_price_per_hour->to_string());
  if (parts.empty()) return "no capability constraints";
  std::string s;
  for (std::size_t i = 0; i < parts.size(); ++i) s += (i ? ", " : "") + parts[i];
  return s;
}

// First violated constraint, for error messages.
std::string violated_constraint(const ResourceRequirements& req, const InstanceType& inst) {
  if (req.min_gpus && inst.gpus < *req.min_gpus) return "gpus";
  if (req.min_memory_gib && inst.memory_gib < *req.min_memory_gib) return "memory_gib";
  if (req.min_vcpus && inst.vcpus < *req.min_vcpus) return "vcpus";
  if (req.provider && inst.provider != *req.provider) return "provider";
  if (req.max_price_per_hour && inst.price_per_hour > *req.max_price_per_hour) return "price";
  return "";
}

}  // namespace

SelectionResult select_instance(const ResourceRequirements& req, const CatalogSnapshot& snapshot) {
  if (snapshot.empty()) throw Error(ErrorCode::NoFeasibleInstance, "catalog snapshot is empty");

  if (req.instance_type) {
    std::vector<const InstanceType*> named;
    for (const auto& t : snapshot.entries()) {
      if (t.name == *req.instance_type) named.push_back(&t);
    }
    if (named.empty()) {
      throw Error(ErrorCode::UnknownInstanceType,
                  "instance type '" + *req.instance_type + "' is not in the catalog");
    }
    std::vector<const InstanceType*> candidates;
    for (const auto* t : named) {
      if (!req.provider || t->provider == *req.provider) candidates.push_back(t);
    }
    if (candidates.empty()) {
      throw Error(ErrorCode::InfeasibleExplicitChoice,
                  "instance type '" + *req.instance_type + "' is not offered by provider " +
                      *req.provider);
    }
    for (const auto* t : candidates) {
      if (t->provider != candidates.front()->provider) {
        throw Error(ErrorCode::InvalidArgument,
                    "instance type '" + *req.instance_type +
                        "' is offered by several providers; set the provider");
      }
    }
    // Same name in several regions: keep the cheapest, then canonical order.
    const auto* chosen = *std::min_element(candidates.begin(), candidates.end(),
                                           [](const InstanceType* a, const InstanceType* b) {
                                             return a->price_per_hour < b->price_per_hour;
                                           });
    const auto bad = violated_constraint(req, *chosen);
    if (!bad.empty()) {
      throw Error(ErrorCode::InfeasibleExplicitChoice,
                  "instance type '" + chosen->name + "' violates the " + bad + " constraint (" +
                      describe_constraints(req) + ")");
    }
    return {*chosen, "explicit instance type " + triple(*chosen) + " satisfies " +
                         describe_constraints(req)};
  }

  const auto feasible = filter_feasible(req, snapshot);
  if (feasible.empty()) {
    throw Error(ErrorCode::NoFeasibleInstance,
                "no catalog entry satisfies " + describe_constraints(req));
  }
  const auto best = std::min_element(feasible.begin(), feasible.end(), [](const auto& a, const auto& b) {
    return std::tie(a.price_per_hour, a.vcpus, a.provider, a.region, a.name) <
           std::tie(b.price_per_hour, b.vcpus, b.provider, b.region, b.name);
  });
  std::ostringstream why;
  why << "cheapest of " << feasible.size() << " feasible entries meeting "
      << describe_constraints(req) << ": " << triple(*best) << " at $"
      << best->price_per_hour.to_string() << "/h";
  return {*best, why.str()};
}

Money estimate_cost(const InstanceType& instance, double wall_hours, int node_count) {
  if (!(wall_hours >= 0) || !std::isfinite(wall_hours)) {
    throw Error(ErrorCode::InvalidArgument, "wall_hours must be a finite value >= 0");
  }
  if (node_count < 1) throw Error(ErrorCode::InvalidArgument, "node_count must be >= 1");
  const double micros =
      static_cast<double>(instance.price_per_hour.micros()) * wall_hours * node_count;
  return Money::from_micros(static_cast<std::int64_t>(std::llround(micros)));
}

}  // namespace adviser::catalog
