#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "adviser/error.hpp"
#include "adviser/money.hpp"
#include "json.hpp"

namespace adviser::governance {

// Totally ordered: admin implies write implies run implies read.
enum class Action { read = 0, run = 1, write = 2, admin = 3 };

std::string_view to_string(Action a) noexcept;
Action action_from_string(std::string_view s);
bool implies(Action held, Action requested) noexcept;

enum class ResourceKind { workflow, dataset, environment, result, compute };

std::string_view to_string(ResourceKind k) noexcept;
ResourceKind resource_kind_from_string(std::string_view s);

struct ResourceRef {
  ResourceKind kind = ResourceKind::workflow;
  std::string id;

  auto operator<=>(const ResourceRef&) const = default;
};

std::string to_string(const ResourceRef& r);  // "workflow:pism-greenland"

struct Group {
  std::string id;
  std::set<std::string> members;  // "*" matches every principal
};

struct AclEntry {
  ResourceRef resource;
  std::string group;
  std::set<Action> actions;
};

struct Workspace {
  std::string id;
  std::string name;
  std::vector<std::string> member_groups;
  std::vector<std::string> budgets;
  std::set<ResourceRef> resources;
  std::vector<AclEntry> acl;
};

struct Decision {
  bool allowed = false;
  std::string reason;
};

// Groups and workspaces. Permission checks take a shared lock; the admin
// verbs take an exclusive one.
class Directory {
 public:
  void add_group(Group g);
  void add_member(const std::string& group, const std::string& principal);
  void add_workspace(Workspace w);
  void add_resource(const std::string& workspace, ResourceRef r);
  // Throws InvalidArgument for an unknown group.
  void grant(const std::string& workspace, const ResourceRef& r, const std::string& group,
             Action action);

  // Throws UnknownResource when the resource is not registered in the
  // workspace (or the workspace does not exist).
  Decision check_permission(const std::string& principal, const std::string& workspace,
                            const ResourceRef& resource, Action action) const;

  std::optional<Workspace> workspace(const std::string& id) const;
  std::vector<Group> groups() const;
  std::vector<Workspace> workspaces() const;

 private:
  bool is_member(const Group& g, const std::string& principal) const;

  mutable std::shared_mutex mutex_;
  std::map<std::string, Group> groups_;
  std::map<std::string, Workspace> workspaces_;
};

struct Budget {
  std::string id;
  Money allocation;
  Money reserved;
  Money spent;

  Money headroom() const { return allocation - spent - reserved; }
};

struct OverageFlag {
  std::string reservation;
  Money estimate;
  Money actual;
  Money uncovered;  // part of actual that could not be charged
};

class BudgetExhausted : public Error {
 public:
  BudgetExhausted(const std::string& message, Money headroom)
      : Error(ErrorCode::BudgetExhausted, message), headroom_(headroom) {}
  Money headroom() const { return headroom_; }

 private:
  Money headroom_;
};

struct SettleResult {
  Budget budget;
  std::optional<OverageFlag> overage;
};

// Each budget is its own serialization point; reserve and settle are atomic
// read-modify-write operations on it.
class BudgetLedger {
 public:
  void create(const std::string& id, Money allocation);
  void set_allocation(const std::string& id, Money allocation);

  // Returns a reservation id; throws BudgetExhausted when
  // spent + reserved + estimate > allocation.
  std::string reserve(const std::string& budget, Money estimate);

  // Releases the reservation and charges `actual`. Charges above the
  // estimate are taken only up to the headroom; the rest is flagged.
  SettleResult settle(const std::string& reservation, Money actual);

  // Drops an open reservation without charging it.
  Budget release(const std::string& reservation);

  Budget get(const std::string& id) const;
  std::vector<Budget> list() const;
  std::vector<OverageFlag> overages(const std::string& id) const;

 private:
  struct Reservation {
    Money estimate;
    bool settled = false;
  };
  struct Slot {
    mutable std::mutex mutex;
    Budget budget;
    std::map<std::string, Reservation> reservations;
    std::vector<OverageFlag> overages;
    std::uint64_t next = 1;
  };

  Slot& slot(const std::string& id) const;
  Slot& slot_for_reservation(const std::string& reservation) const;

  mutable std::shared_mutex mutex_;  // guards the map itself
  std::map<std::string, std::unique_ptr<Slot>> slots_;
};

// Loads groups, workspaces and budgets from a JSON document.
void load_config(const nlohmann::json& doc, Directory& directory, BudgetLedger& ledger);
nlohmann::json to_json(const Budget& b);

}  // namespace adviser::governance
