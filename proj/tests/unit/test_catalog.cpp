#include <algorithm>
#include <random>

#include "adviser/catalog.hpp"
#include "adviser/error.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace adviser;
using namespace adviser::catalog;
using testing::make_instance;

namespace {

ErrorCode code_of(auto&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return ErrorCode::InvalidArgument;
}

// Exhaustive scan used as the selection oracle.
const InstanceType* brute_force_cheapest(const ResourceRequirements& req, const CatalogSnapshot& snap) {
  const InstanceType* best = nullptr;
  for (const auto& t : snap.entries()) {
    if (req.min_gpus && t.gpus < *req.min_gpus) continue;
    if (req.min_memory_gib && t.memory_gib < *req.min_memory_gib) continue;
    if (req.min_vcpus && t.vcpus < *req.min_vcpus) continue;
    if (req.provider && t.provider != *req.provider) continue;
    if (req.max_price_per_hour && t.price_per_hour > *req.max_price_per_hour) continue;
    if (!best) {
      best = &t;
      continue;
    }
    auto key = [](const InstanceType* x) {
      return std::make_tuple(x->price_per_hour.micros(), x->vcpus, x->provider, x->region, x->name);
    };
    if (key(&t) < key(best)) best = &t;
  }
  return best;
}

CatalogSnapshot random_snapshot(std::mt19937_64& rng, int n) {
  std::vector<InstanceType> v;
  const char* providers[] = {"aws", "gcp", "azure"};
  for (int i = 0; i < n; ++i) {
    auto t = make_instance(providers[rng() % 3], "t" + std::to_string(i), 1 << (rng() % 7),
                           static_cast<double>(4 << (rng() % 6)), static_cast<int>(rng() % 3),
                           0.05 * static_cast<double>(1 + rng() % 40));
    v.push_back(t);
  }
  return CatalogSnapshot(std::move(v), "2026-01-01", "random");
}

ResourceRequirements random_req(std::mt19937_64& rng) {
  ResourceRequirements r;
  if (rng() % 2) r.min_gpus = static_cast<int>(rng() % 3);
  if (rng() % 2) r.min_memory_gib = static_cast<double>(4 << (rng() % 6));
  if (rng() % 2) r.min_vcpus = 1 << (rng() % 7);
  if (rng() % 4 == 0) r.provider = std::vector<std::string>{"aws", "gcp", "azure"}[rng() % 3];
  if (rng() % 4 == 0) r.max_price_per_hour = Money::from_dollars(0.05 * static_cast<double>(1 + rng() % 40));
  return r;
}

}  // namespace

TEST_CASE("fixture catalog loads with every named entry") {
  const auto& snap = testing::fixture_catalog();
  CHECK(snap.size() == 17);
  CHECK(snap.snapshot_date() == "2026-01-15");
  for (const char* name : {"m6a.2xlarge", "m7a.2xlarge", "m8a.2xlarge", "c8a.2xlarge", "r8a.2xlarge",
                           "hpc7a.12xlarge", "hpc7a.48xlarge", "g6.2xlarge"}) {
    CHECK(std::any_of(snap.entries().begin(), snap.entries().end(),
                      [&](const InstanceType& t) { return t.name == name; }));
  }
  CHECK(std::is_sorted(snap.entries().begin(), snap.entries().end(), [](const auto& a, const auto& b) {
    return std::tie(a.provider, a.region, a.name) < std::tie(b.provider, b.region, b.name);
  }));
}

TEST_CASE("load_catalog edge cases") {
  CHECK(load_catalog(R"({"snapshot_date":"2026-02-01","source_label":"x","entries":[]})").size() == 0);

  const std::string dup = R"({"snapshot_date":"2026-02-01","source_label":"x","entries":[
    {"provider":"aws","region":"us-east-1","name":"m8a.2xlarge","vcpus":8,"memory_gib":32,"network_gbps":15,"price_per_hour":0.4853,"family_class":"general"},
    {"provider":"aws","region":"us-east-1","name":"m8a.2xlarge","vcpus":8,"memory_gib":32,"network_gbps":15,"price_per_hour":0.4853,"family_class":"general"}]})";
  CHECK(code_of([&] { load_catalog(dup); }) == ErrorCode::DuplicateEntry);

  SUBCASE("syntax error reports a line") {
    try {
      load_catalog("{\n\"snapshot_date\": \"2026-02-01\",\n oops }");
      FAIL("expected MalformedCatalog");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedCatalog);
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("bad entry names its index and line") {
    const std::string bad = "{\"snapshot_date\":\"2026-02-01\",\"source_label\":\"x\",\"entries\":[\n"
                            "{\"provider\":\"aws\",\"region\":\"r\",\"name\":\"a\",\"vcpus\":-2,\"memory_gib\":1,"
                            "\"network_gbps\":1,\"price_per_hour\":1,\"family_class\":\"general\"}]}";
    try {
      load_catalog(bad);
      FAIL("expected MalformedCatalog");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::MalformedCatalog);
      CHECK(std::string(e.what()).find("entries[0]") != std::string::npos);
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  CHECK(code_of([] { load_catalog(R"({"snapshot_date":"yesterday","source_label":"x","entries":[]})"); }) ==
        ErrorCode::MalformedCatalog);
  CHECK(code_of([] { load_catalog(R"({"source_label":"x","entries":[]})"); }) == ErrorCode::MalformedCatalog);
}

TEST_CASE("catalog JSON round-trips") {
  const auto& snap = testing::fixture_catalog();
  auto again = load_catalog(to_json(snap).dump());
  CHECK(again.entries() == snap.entries());
  CHECK(again.source_label() == snap.source_label());
}

TEST_CASE("gpu + 32 GiB selects g6.2xlarge on aws") {
  ResourceRequirements req;
  req.min_gpus = 1;
  req.min_memory_gib = 32;
  auto sel = select_instance(req, testing::fixture_catalog());
  CHECK(sel.instance.name == "g6.2xlarge");
  CHECK(sel.instance.provider == "aws");
  CHECK(sel.rationale.find("gpus>=1") != std::string::npos);
  CHECK(sel.rationale.find("memory_gib>=32") != std::string::npos);
  REQUIRE(brute_force_cheapest(req, testing::fixture_catalog()) != nullptr);
  CHECK(*brute_force_cheapest(req, testing::fixture_catalog()) == sel.instance);
}

TEST_CASE("singleton snapshot and tie breaking") {
  auto x = make_instance("aws", "x", 2, 4, 0, 0.1);
  CHECK(select_instance({}, CatalogSnapshot({x}, "2026-01-01", "s")).instance == x);

  auto big = make_instance("aws", "big", 16, 64, 0, 0.5);
  auto small = make_instance("gcp", "small", 8, 64, 0, 0.5);
  auto small_aws = make_instance("aws", "small2", 8, 64, 0, 0.5);
  CatalogSnapshot snap({big, small, small_aws}, "2026-01-01", "s");
  // Equal price: fewer vCPUs first, then provider order.
  CHECK(select_instance({}, snap).instance.name == "small2");
}

TEST_CASE("min_vcpus over a five-entry snapshot matches exhaustive scan") {
  std::vector<InstanceType> v{make_instance("aws", "a", 4, 16, 0, 0.20), make_instance("aws", "b", 8, 16, 0, 0.35),
                              make_instance("gcp", "c", 16, 32, 0, 0.30), make_instance("gcp", "d", 8, 8, 0, 0.40),
                              make_instance("azure", "e", 32, 64, 0, 0.90)};
  CatalogSnapshot snap(v, "2026-01-01", "s");
  ResourceRequirements req;
  req.min_vcpus = 8;
  CHECK(select_instance(req, snap).instance.name == "c");
  CHECK(select_instance(req, snap).instance == *brute_force_cheapest(req, snap));
}

TEST_CASE("explicit instance type handling") {
  const auto& snap = testing::fixture_catalog();
  ResourceRequirements req;
  req.instance_type = "hpc7a.12xlarge";
  req.provider = "aws";
  req.num_nodes = 4;
  CHECK(select_instance(req, snap).instance.vcpus == 24);

  req.instance_type = "nope.large";
  CHECK(code_of([&] { select_instance(req, snap); }) == ErrorCode::UnknownInstanceType);

  req.instance_type = "hpc7a.12xlarge";
  req.min_gpus = 1;
  CHECK(code_of([&] { select_instance(req, snap); }) == ErrorCode::InfeasibleExplicitChoice);

  req.min_gpus.reset();
  req.provider = "gcp";
  CHECK(code_of([&] { select_instance(req, snap); }) == ErrorCode::InfeasibleExplicitChoice);
}

TEST_CASE("no feasible instance and empty snapshot") {
  ResourceRequirements req;
  req.min_gpus = 64;
  CHECK(code_of([&] { select_instance(req, testing::fixture_catalog()); }) == ErrorCode::NoFeasibleInstance);
  CHECK(code_of([&] { select_instance({}, CatalogSnapshot{}); }) == ErrorCode::NoFeasibleInstance);
}

TEST_CASE("selection properties on random snapshots") {
  std::mt19937_64 rng(42);
  for (int round = 0; round < 300; ++round) {
    auto snap = random_snapshot(rng, 1 + static_cast<int>(rng() % 30));
    auto req = random_req(rng);
    auto feasible = filter_feasible(req, snap);
    const auto* oracle = brute_force_cheapest(req, snap);
    if (!oracle) {
      CHECK(feasible.empty());
      CHECK(code_of([&] { select_instance(req, snap); }) == ErrorCode::NoFeasibleInstance);
      continue;
    }
    auto sel = select_instance(req, snap);
    CHECK(sel.instance == *oracle);
    CHECK(std::find(feasible.begin(), feasible.end(), sel.instance) != feasible.end());
    for (const auto& f : feasible) CHECK(f.price_per_hour >= sel.instance.price_per_hour);
    CHECK(select_instance(req, snap).instance == sel.instance);

    // Tightening one constraint can only shrink the feasible set.
    auto tighter = req;
    tighter.min_vcpus = std::max(req.min_vcpus.value_or(0), 1) * 2;
    auto sub = filter_feasible(tighter, snap);
    for (const auto& s : sub) CHECK(std::find(feasible.begin(), feasible.end(), s) != feasible.end());
  }
}

TEST_CASE("estimate_cost arithmetic") {
  auto t = make_instance("aws", "x", 8, 32, 0, 2.50);
  CHECK(estimate_cost(t, 0.0, 3).micros() == 0);
  CHECK(estimate_cost(t, 2.0, 4) == Money::from_dollars(20.0));

  const auto& snap = testing::fixture_catalog();
  auto m8a = *std::find_if(snap.entries().begin(), snap.entries().end(),
                           [](const InstanceType& e) { return e.name == "m8a.2xlarge"; });
  // 16.3 s at 0.4853 $/h: 0.4853 * 16.3 / 3600 = 0.00219734... dollars
  CHECK(estimate_cost(m8a, 16.3 / 3600.0, 1).micros() == 2197);
  CHECK(code_of([&] { estimate_cost(t, -1.0, 1); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([&] { estimate_cost(t, 1.0, 0); }) == ErrorCode::InvalidArgument);

  // Linear in hours and in nodes (up to one micro-dollar of rounding).
  for (int n = 1; n <= 8; ++n) {
    auto one = estimate_cost(t, 0.37, 1).micros();
    CHECK(std::llabs(estimate_cost(t, 0.37, n).micros() - n * one) <= n);
  }
}
