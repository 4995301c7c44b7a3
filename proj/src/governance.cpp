#include "adviser/governance.hpp"

#include <algorithm>

namespace adviser::governance {

using nlohmann::json;

std::string_view to_string(Action a) noexcept {
  switch (a) {
    case Action::read: return "read";
    case Action::run: return "run";
    case Action::write: return "write";
    case Action::admin: return "admin";
  }
  return "read";
}

Action action_from_string(std::string_view s) {
  for (auto a : {Action::read, Action::run, Action::write, Action::admin}) {
    if (to_string(a) == s) return a;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown action '" + std::string(s) + "'");
}

bool implies(Action held, Action requested) noexcept {
  return static_cast<int>(held) >= static_cast<int>(requested);
}

std::string_view to_string(ResourceKind k) noexcept {
  switch (k) {
    case ResourceKind::workflow: return "workflow";
    case ResourceKind::dataset: return "dataset";
    case ResourceKind::environment: return "environment";
    case ResourceKind::result: return "result";
    case ResourceKind::compute: return "compute";
  }
  return "workflow";
}

ResourceKind resource_kind_from_string(std::string_view s) {
  for (auto k : {ResourceKind::workflow, ResourceKind::dataset, ResourceKind::environment,
                 ResourceKind::result, ResourceKind::compute}) {
    if (to_string(k) == s) return k;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown resource kind '" + std::string(s) + "'");
}

std::string to_string(const ResourceRef& r) {
  return std::string(to_string(r.kind)) + ":" + r.id;
}

// ---------------------------------------------------------------------------

void Directory::add_group(Group g) {
  std::unique_lock lock(mutex_);
  groups_[g.id] = std::move(g);
}

void Directory::add_member(const std::string& group, const std::string& principal) {
  std::unique_lock lock(mutex_);
  auto it = groups_.find(group);
  if (it == groups_.end()) throw Error(ErrorCode::InvalidArgument, "unknown group " + group);
  it->second.members.insert(principal);
}

void Directory::add_workspace(Workspace w) {
  std::unique_lock lock(mutex_);
  for (const auto& e : w.acl) {
    if (!groups_.count(e.group)) {
      throw Error(ErrorCode::InvalidArgument, "acl references unknown group " + e.group);
    }
    w.resources.insert(e.resource);
  }
  workspaces_[w.id] = std::move(w);
}

void Directory::add_resource(const std::string& workspace, ResourceRef r) {
  std::unique_lock lock(mutex_);
  auto it = workspaces_.find(workspace);
  if (it == workspaces_.end()) throw Error(ErrorCode::InvalidArgument, "unknown workspace " + workspace);
  it->second.resources.insert(std::move(r));
}

void Directory::grant(const std::string& workspace, const ResourceRef& r, const std::string& group,
                      Action action) {
  std::unique_lock lock(mutex_);
  auto it = workspaces_.find(workspace);
  if (it == workspaces_.end()) throw Error(ErrorCode::InvalidArgument, "unknown workspace " + workspace);
  if (!groups_.count(group)) throw Error(ErrorCode::InvalidArgument, "unknown group " + group);
  auto& ws = it->second;
  ws.resources.insert(r);
  for (auto& e : ws.acl) {
    if (e.resource == r && e.group == group) {
      e.actions.insert(action);
      return;
    }
  }
  ws.acl.push_back({r, group, {action}});
}

bool Directory::is_member(const Group& g, const std::string& principal) const {
  return g.members.count(principal) || g.members.count("*");
}

Decision Directory::check_permission(const std::string& principal, const std::string& workspace,
                                     const ResourceRef& resource, Action action) const {
  std::shared_lock lock(mutex_);
  auto ws = workspaces_.find(workspace);
  if (ws == workspaces_.end()) {
    throw Error(ErrorCode::UnknownResource, "unknown workspace " + workspace);
  }
  if (!ws->second.resources.count(resource)) {
    throw Error(ErrorCode::UnknownResource,
                to_string(resource) + " is not registered in workspace " + workspace);
  }
  for (const auto& e : ws->second.acl) {
    if (e.resource != resource) continue;
    auto g = groups_.find(e.group);
    if (g == groups_.end() || !is_member(g->second, principal)) continue;
    for (auto held : e.actions) {
      if (implies(held, action)) {
        return {true, "group " + e.group + " holds " + std::string(to_string(held)) + " on " +
                          to_string(resource)};
      }
    }
  }
  return {false, principal + " has no group granting " + std::string(to_string(action)) + " on " +
                     to_string(resource)};
}

std::optional<Workspace> Directory::workspace(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = workspaces_.find(id);
  if (it == workspaces_.end()) return std::nullopt;
  return it->second;
}

std::vector<Group> Directory::groups() const {
  std::shared_lock lock(mutex_);
  std::vector<Group> out;
  for (const auto& [_, g] : groups_) out.push_back(g);
  return out;
}

std::vector<Workspace> Directory::workspaces() const {
  std::shared_lock lock(mutex_);
  std::vector<Workspace> out;
  for (const auto& [_, w] : workspaces_) out.push_back(w);
  return out;
}

// ---------------------------------------------------------------------------

void BudgetLedger::create(const std::string& id, Money allocation) {
  if (allocation < Money{}) throw Error(ErrorCode::InvalidArgument, "allocation must be >= 0");
  std::unique_lock lock(mutex_);
  auto slot = std::make_unique<Slot>();
  slot->budget = {id, allocation, Money{}, Money{}};
  slots_[id] = std::move(slot);
}

BudgetLedger::Slot& BudgetLedger::slot(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = slots_.find(id);
  if (it == slots_.end()) throw Error(ErrorCode::UnknownBudget, "unknown budget " + id);
  return *it->second;
}

// Reservation ids are "<budget>#<n>".
BudgetLedger::Slot& BudgetLedger::slot_for_reservation(const std::string& reservation) const {
  const auto hash = reservation.rfind('#');
  if (hash == std::string::npos) {
    throw Error(ErrorCode::UnknownReservation, "unknown reservation " + reservation);
  }
  try {
    return slot(reservation.substr(0, hash));
  } catch (const Error&) {
    throw Error(ErrorCode::UnknownReservation, "unknown reservation " + reservation);
  }
}

void BudgetLedger::set_allocation(const std::string& id, Money allocation) {
  auto& s = slot(id);
  std::lock_guard lock(s.mutex);
  if (allocation < s.budget.spent + s.budget.reserved) {
    throw Error(ErrorCode::InvalidArgument,
                "allocation below spent + reserved (" + (s.budget.spent + s.budget.reserved).to_string() + ")");
  }
  s.budget.allocation = allocation;
}

std::string BudgetLedger::reserve(const std::string& budget, Money estimate) {
  if (estimate < Money{}) throw Error(ErrorCode::InvalidArgument, "estimate must be >= 0");
  auto& s = slot(budget);
  std::lock_guard lock(s.mutex);
  const auto headroom = s.budget.headroom();
  if (estimate > headroom) {
    throw BudgetExhausted("budget " + budget + " cannot cover " + estimate.to_string() +
                              " (headroom " + headroom.to_string() + ")",
                          headroom);
  }
  s.budget.reserved += estimate;
  auto id = budget + "#" + std::to_string(s.next++);
  s.reservations[id] = {estimate, false};
  return id;
}

SettleResult BudgetLedger::settle(const std::string& reservation, Money actual) {
  if (actual < Money{}) throw Error(ErrorCode::InvalidArgument, "actual must be >= 0");
  auto& s = slot_for_reservation(reservation);
  std::lock_guard lock(s.mutex);
  auto it = s.reservations.find(reservation);
  if (it == s.reservations.end()) {
    throw Error(ErrorCode::UnknownReservation, "unknown reservation " + reservation);
  }
  if (it->second.settled) throw Error(ErrorCode::DoubleSettle, reservation + " already settled");

  const auto estimate = it->second.estimate;
  const auto headroom = s.budget.headroom();  // measured while the reservation is still held
  SettleResult result;
  Money charge = std::min(actual, estimate);
  if (actual > estimate) {
    const auto over = actual - estimate;
    const auto covered = std::min(over, headroom);
    charge += covered;
    OverageFlag flag{reservation, estimate, actual, over - covered};
    s.overages.push_back(flag);
    result.overage = flag;
  }
  s.budget.reserved -= estimate;
  s.budget.spent += charge;
  it->second.settled = true;
  result.budget = s.budget;
  return result;
}

Budget BudgetLedger::release(const std::string& reservation) {
  auto& s = slot_for_reservation(reservation);
  std::lock_guard lock(s.mutex);
  auto it = s.reservations.find(reservation);
  if (it == s.reservations.end()) {
    throw Error(ErrorCode::UnknownReservation, "unknown reservation " + reservation);
  }
  if (it->second.settled) throw Error(ErrorCode::DoubleSettle, reservation + " already settled");
  s.budget.reserved -= it->second.estimate;
  it->second.settled = true;
  return s.budget;
}

Budget BudgetLedger::get(const std::string& id) const {
  auto& s = slot(id);
  std::lock_guard lock(s.mutex);
  return s.budget;
}

std::vector<Budget> BudgetLedger::list() const {
  std::vector<std::string> ids;
  {
    std::shared_lock lock(mutex_);
    for (const auto& [id, _] : slots_) ids.push_back(id);
  }
  std::vector<Budget> out;
  for (const auto& id : ids) out.push_back(get(id));
  return out;
}

std::vector<OverageFlag> BudgetLedger::overages(const std::string& id) const {
  auto& s = slot(id);
  std::lock_guard lock(s.mutex);
  return s.overages;
}

// ---------------------------------------------------------------------------

namespace {

ResourceRef parse_resource(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw Error(ErrorCode::InvalidArgument, "resource must be kind:id");
    return {resource_kind_from_string(s.substr(0, colon)), s.substr(colon + 1)};
  }
  return {resource_kind_from_string(j.at("kind").get<std::string>()), j.at("id").get<std::string>()};
}

}  // namespace

// {
//   "groups": [{"id": "instructors", "members": ["alice"]}],
//   "budgets": [{"id": "class", "allocation": 100.0}],
//   "workspaces": [{"id": "default", "name": "...", "member_groups": [...],
//                   "budgets": ["class"], "resources": ["compute:simulated"],
//                   "acl": [{"resource": "workflow:pism", "group": "students",
//                            "actions": ["run"]}]}]
// }
void load_config(const json& doc, Directory& directory, BudgetLedger& ledger) {
  try {
    for (const auto& g : doc.value("groups", json::array())) {
      Group group;
      group.id = g.at("id").get<std::string>();
      for (const auto& m : g.value("members", json::array())) group.members.insert(m.get<std::string>());
      directory.add_group(std::move(group));
    }
    for (const auto& b : doc.value("budgets", json::array())) {
      ledger.create(b.at("id").get<std::string>(), Money::from_dollars(b.at("allocation").get<double>()));
    }
    for (const auto& w : doc.value("workspaces", json::array())) {
      Workspace ws;
      ws.id = w.at("id").get<std::string>();
      ws.name = w.value("name", ws.id);
      ws.member_groups = w.value("member_groups", std::vector<std::string>{});
      ws.budgets = w.value("budgets", std::vector<std::string>{});
      for (const auto& r : w.value("resources", json::array())) ws.resources.insert(parse_resource(r));
      for (const auto& e : w.value("acl", json::array())) {
        AclEntry entry;
        entry.resource = parse_resource(e.at("resource"));
        entry.group = e.at("group").get<std::string>();
        for (const auto& a : e.at("actions")) entry.actions.insert(action_from_string(a.get<std::string>()));
        ws.acl.push_back(std::move(entry));
      }
      directory.add_workspace(std::move(ws));
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("bad governance config: ") + e.what());
  }
}

json to_json(const Budget& b) {
  return json{{"id", b.id},
              {"allocation", b.allocation.to_string()},
              {"reserved", b.reserved.to_string()},
              {"spent", b.spent.to_string()},
              {"headroom", b.headroom().to_string()}};
}

}  // namespace adviser::governance
