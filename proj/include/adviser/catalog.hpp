#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adviser/money.hpp"
#include "json.hpp"

namespace adviser::catalog {

enum class FamilyClass { compute, general, memory, hpc, accelerated };

std::string_view to_string(FamilyClass f) noexcept;
FamilyClass family_from_string(std::string_view s);

struct InstanceType {
  std::string provider;  // aws, gcp, azure, ...
  std::string region;
  std::string name;
  int vcpus = 1;
  double memory_gib = 1.0;
  int gpus = 0;
  std::optional<std::string> gpu_model;
  double network_gbps = 1.0;
  Money price_per_hour;
  FamilyClass family_class = FamilyClass::general;

  bool operator==(const InstanceType&) const = default;
};

struct ResourceRequirements {
  std::optional<int> min_gpus;
  std::optional<double> min_memory_gib;
  std::optional<int> min_vcpus;
  std::optional<std::string> provider;
  std::optional<std::string> instance_type;
  int num_nodes = 1;
  std::optional<Money> max_price_per_hour;

  bool operator==(const ResourceRequirements&) const = default;
};

// Immutable after construction; entries are kept in (provider, region, name)
// order.
class CatalogSnapshot {
 public:
  CatalogSnapshot() = default;
  // Sorts entries and rejects duplicate (provider, region, name) triples.
  CatalogSnapshot(std::vector<InstanceType> entries, std::string snapshot_date,
                  std::string source_label);

  const std::vector<InstanceType>& entries() const { return entries_; }
  const std::string& snapshot_date() const { return snapshot_date_; }
  const std::string& source_label() const { return source_label_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<InstanceType> entries_;
  std::string snapshot_date_;
  std::string source_label_;
};

struct SelectionResult {
  InstanceType instance;
  std::string rationale;
};

// Parses the catalog document (JSON). Throws MalformedCatalog / DuplicateEntry.
CatalogSnapshot load_catalog(std::string_view source);
CatalogSnapshot load_catalog_file(const std::string& path);

bool satisfies(const ResourceRequirements& req, const InstanceType& inst);

std::vector<InstanceType> filter_feasible(const ResourceRequirements& req,
                                          const CatalogSnapshot& snapshot);

// Cheapest feasible entry; ties by fewest vcpus then (provider, region, name).
// An explicit instance_type short-circuits the search but is still checked
// against every capability constraint.
SelectionResult select_instance(const ResourceRequirements& req,
                                const CatalogSnapshot& snapshot);

// price_per_hour * wall_hours * node_count, prorated per second.
Money estimate_cost(const InstanceType& instance, double wall_hours, int node_count);

void to_json(nlohmann::json& j, const InstanceType& t);
void from_json(const nlohmann::json& j, InstanceType& t);
void to_json(nlohmann::json& j, const ResourceRequirements& r);
void from_json(const nlohmann::json& j, ResourceRequirements& r);
nlohmann::json to_json(const CatalogSnapshot& s);

}  // namespace adviser::catalog
