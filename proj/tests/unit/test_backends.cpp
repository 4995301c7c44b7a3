#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include "adviser/backends.hpp"
#include "adviser/error.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace adviser;
using namespace adviser::backends;

namespace {

workflow::ExecutablePlan plan(std::optional<std::string> setup, std::string run) {
  return {std::move(setup), std::move(run)};
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

}  // namespace

TEST_CASE("local execution captures output and status") {
  testing::TempDir tmp;
  auto ok = local_execute(plan(std::nullopt, "echo hello"), tmp.path());
  CHECK(ok.exit_status == ExitStatus::success);
  CHECK(ok.log_text.find("hello") != std::string::npos);
  CHECK(ok.wall_time_hours > 0);

  try {
    local_execute(plan(std::nullopt, "echo partial; exit 3"), tmp.path());
    FAIL("expected RunFailed");
  } catch (const CommandFailed& e) {
    CHECK(e.code() == ErrorCode::RunFailed);
    CHECK(e.status() == 3);
    CHECK(e.log().find("partial") != std::string::npos);
  }

  try {
    local_execute(plan(std::string("exit 4"), "echo never > ran"), tmp.path());
    FAIL("expected SetupFailed");
  } catch (const CommandFailed& e) {
    CHECK(e.code() == ErrorCode::SetupFailed);
    CHECK(e.status() == 4);
  }
  CHECK_FALSE(std::filesystem::exists(tmp.path() / "ran"));
}

TEST_CASE("setup runs before run in the same workdir") {
  testing::TempDir tmp;
  auto out = local_execute(plan(std::string("echo token-42 > made.txt"), "cat made.txt && test -f made.txt"),
                           tmp.path());
  CHECK(out.exit_status == ExitStatus::success);
  CHECK(out.log_text.find("token-42") != std::string::npos);
}

TEST_CASE("outputs, environment and stderr capture") {
  testing::TempDir tmp;
  LocalOptions opt;
  opt.env["GREETING"] = "hi there";
  auto out = local_execute(plan(std::nullopt,
                                "echo \"$GREETING\" >&2; mkdir -p \"$ADVISER_OUTPUT_DIR/sub\";"
                                " echo 1 > \"$ADVISER_OUTPUT_DIR/b.txt\"; echo 2 > \"$ADVISER_OUTPUT_DIR/sub/a.txt\""),
                           tmp.path(), opt);
  CHECK(out.log_text.find("hi there") != std::string::npos);
  CHECK(out.output_refs == std::vector<std::string>{"outputs/b.txt", "outputs/sub/a.txt"});
}

TEST_CASE("timeout and cancellation kill the process group") {
  testing::TempDir tmp;
  LocalOptions opt;
  opt.timeout = std::chrono::milliseconds(200);
  auto t0 = std::chrono::steady_clock::now();
  try {
    local_execute(plan(std::nullopt, "sleep 30 & sleep 30; wait"), tmp.path(), opt);
    FAIL("expected Timeout");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Timeout);
  }
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(5));

  std::stop_source src;
  LocalOptions copt;
  copt.stop = src.get_token();
  std::jthread canceller([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(150));
    src.request_stop();
  });
  t0 = std::chrono::steady_clock::now();
  CHECK_THROWS_AS(local_execute(plan(std::nullopt, "sleep 30"), tmp.path(), copt), Error);
  CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(5));
}

TEST_CASE("on_setup_done fires between the steps") {
  testing::TempDir tmp;
  LocalOptions opt;
  bool seen_setup_file = false;
  opt.on_setup_done = [&] { seen_setup_file = std::filesystem::exists(tmp.path() / "s"); };
  local_execute(plan(std::string("touch s"), "touch r"), tmp.path(), opt);
  CHECK(seen_setup_file);
}

TEST_CASE("simulator formula") {
  SimParams p;
  p.t_serial_hours = 10;
  p.serial_fraction = 0;
  CHECK(sim_execute(16, 1, p).wall_time_hours == doctest::Approx(sim_execute(8, 1, p).wall_time_hours / 2));

  p.serial_fraction = 0.2;
  p.internode_penalty_per_node_hours = 0.05;
  // Direct evaluation: 10 * (0.2 + 0.8/32) + 0.05 * 3 * 32/8
  CHECK(sim_execute(32, 4, p).wall_time_hours == doctest::Approx(10 * (0.2 + 0.8 / 32) + 0.05 * 3 * 4.0));
  CHECK(sim_execute(32, 4, p).wall_time_hours > sim_execute(32, 1, p).wall_time_hours);
  CHECK_THROWS_AS(sim_execute(0, 1, p), Error);
}

TEST_CASE("simulator determinism and monotonicity") {
  SimParams p;
  p.t_serial_hours = 7.3;
  p.serial_fraction = 0.06;
  p.internode_penalty_per_node_hours = 0.01;
  p.jitter_fraction = 0.1;
  p.seed = 1234;
  for (int np = 1; np <= 128; ++np) {
    CHECK(sim_execute(np, 2, p, 3) == sim_execute(np, 2, p, 3));
    const double w = sim_execute(np, 2, p, 3).wall_time_hours;
    CHECK(w >= model_wall_hours(np, 2, p) * 0.9 - 1e-12);
    CHECK(w <= model_wall_hours(np, 2, p) * 1.1 + 1e-12);
  }
  auto other = p;
  other.seed = 1235;
  CHECK(sim_execute(8, 1, p).wall_time_hours != sim_execute(8, 1, other).wall_time_hours);

  p.jitter_fraction = 0;
  // Non-increasing in np on one node, or on any node count without a penalty.
  auto flat = p;
  flat.internode_penalty_per_node_hours = 0;
  for (int np = 2; np <= 256; ++np) {
    CHECK(model_wall_hours(np, 1, p) <= model_wall_hours(np - 1, 1, p));
    for (int nodes = 2; nodes <= 8; ++nodes)
      CHECK(model_wall_hours(np, nodes, flat) <= model_wall_hours(np - 1, nodes, flat));
  }
  for (int np = 1; np <= 64; ++np) {
    for (int nodes = 2; nodes <= 8; ++nodes) CHECK(model_wall_hours(np, nodes, p) > model_wall_hours(np, nodes - 1, p));
  }
}

TEST_CASE("keyed draws are uniform-looking") {
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double u = keyed_uniform(9, static_cast<std::uint64_t>(i), 1, 2);
    CHECK((u >= 0 && u < 1));
    sum += u;
  }
  CHECK(sum / n == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("simulated provisioning") {
  execution::ProvisioningPlan plan;
  plan.instance = testing::make_instance("aws", "hpc7a.12xlarge", 24, 768, 0, 7.2);
  plan.num_nodes = 1;
  plan.total_slots = 24;
  SimParams p;
  p.provision_delay_seconds_per_node = 30;
  CHECK(sim_provision(plan, p).delay_seconds == 30);
  plan.num_nodes = 4;
  auto r = sim_provision(plan, p);
  CHECK(r.delay_seconds == 120);
  REQUIRE(r.nodes.size() == 4);
  CHECK(r.nodes[3].hostname == "node-3");

  p.stockout_injection = true;
  p.stockout_probability = 1.0;
  try {
    sim_provision(plan, p);
    FAIL("expected SimulatedStockout");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SimulatedStockout);
  }
  // Seeded oracle: find a seed whose draw is under 0.5 and one above.
  p.stockout_probability = 0.5;
  int stockouts = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    p.seed = seed;
    bool threw = false;
    try {
      sim_provision(plan, p);
    } catch (const Error&) {
      threw = true;
    }
    auto again = threw;
    try {
      sim_provision(plan, p);
      again = false;
    } catch (const Error&) {
      again = true;
    }
    CHECK(threw == again);
    stockouts += threw;
  }
  CHECK(stockouts > 50);
  CHECK(stockouts < 150);

  plan.backend = execution::Backend::local;
  CHECK_THROWS_AS(sim_provision(plan, p), Error);
}

TEST_CASE("calibration recovers generating parameters") {
  SimParams truth;
  truth.t_serial_hours = 10;
  truth.serial_fraction = 0.1;
  std::vector<Observation> obs;
  for (int np : {1, 2, 4, 8, 16, 32}) obs.push_back({np, 1, model_wall_hours(np, 1, truth)});
  auto fit = calibrate_model(obs);
  CHECK(rel(fit.t_serial_hours, 10) < 1e-6);
  CHECK(rel(fit.serial_fraction, 0.1) < 1e-6);
  CHECK(fit.internode_penalty_per_node_hours == 0);
  CHECK(fit.jitter_fraction == 0);
  CHECK(fit.seed == 0);

  truth.internode_penalty_per_node_hours = 0.02;
  obs.clear();
  for (int np : {8, 16, 32, 64})
    for (int nodes : {1, 2, 4}) obs.push_back({np, nodes, model_wall_hours(np, nodes, truth)});
  fit = calibrate_model(obs);
  CHECK(rel(fit.t_serial_hours, 10) < 1e-6);
  CHECK(rel(fit.serial_fraction, 0.1) < 1e-6);
  CHECK(rel(fit.internode_penalty_per_node_hours, 0.02) < 1e-6);
}

TEST_CASE("calibration on single-node data matches a two-parameter oracle") {
  // Weighted least squares in closed form for T = a + b/np with weights 1/T^2.
  const std::vector<std::pair<int, double>> pts = {{8, 1.38}, {16, 0.80}, {24, 0.87}, {32, 0.71},
                                                   {48, 0.56}, {64, 0.52}, {96, 0.62}};
  double s11 = 0, s12 = 0, s22 = 0, r1 = 0, r2 = 0;
  for (auto [np, t] : pts) {
    const double x1 = 1 / t, x2 = 1.0 / np / t;
    s11 += x1 * x1, s12 += x1 * x2, s22 += x2 * x2, r1 += x1, r2 += x2;
  }
  const double det = s11 * s22 - s12 * s12;
  const double a = (r1 * s22 - r2 * s12) / det;
  const double b = (s11 * r2 - s12 * r1) / det;
  std::vector<Observation> obs;
  for (auto [np, t] : pts) obs.push_back({np, 1, t});
  auto fit = calibrate_model(obs);
  CHECK(rel(fit.t_serial_hours, a + b) < 1e-9);
  CHECK(rel(fit.serial_fraction, a / (a + b)) < 1e-9);
}

TEST_CASE("calibration keeps parameters non-negative") {
  // Times that grow with np would need a negative parallel term.
  std::vector<Observation> obs{{1, 1, 1.0}, {2, 1, 1.5}, {4, 1, 2.0}};
  auto fit = calibrate_model(obs);
  CHECK(fit.serial_fraction >= 0);
  CHECK(fit.serial_fraction <= 1);
  CHECK(fit.t_serial_hours > 0);
  CHECK(fit.internode_penalty_per_node_hours >= 0);
}

TEST_CASE("calibration preconditions") {
  auto code = [](std::vector<Observation> obs) {
    try {
      calibrate_model(obs);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(code({{8, 1, 1.0}, {16, 1, 0.6}}) == ErrorCode::Underdetermined);
  CHECK(code({{8, 1, 1.0}, {8, 1, 1.1}, {8, 1, 0.9}}) == ErrorCode::Underdetermined);
}

TEST_CASE("params validation and JSON") {
  SimParams p;
  p.jitter_fraction = 0.5;
  CHECK_THROWS_AS(validate(p), Error);
  p.jitter_fraction = 0.1;
  p.seed = 0xFFFFFFFFFFFFFFFFull;
  nlohmann::json j = p;
  CHECK(j.get<SimParams>() == p);
}
