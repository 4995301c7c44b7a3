// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "adviser/backends.hpp"
#include "adviser/catalog.hpp"
#include "adviser/error.hpp"
#include "adviser/execution.hpp"
#include "adviser/gateway.hpp"
#include "adviser/governance.hpp"
#include "adviser/results.hpp"
#include "harness.hpp"

using namespace adviser;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + what;
    }
  }
};

struct Criterion {
  std::string name;
  std::chrono::duration<double> limit;
  std::function<Outcome()> body;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

const std::vector<int> kRanks{8, 16, 24, 32, 48, 64, 96};
const std::vector<double> kScaleUpHours{1.38, 0.80, 0.87, 0.71, 0.56, 0.52, 0.62};
const std::vector<double> kScaleOutHours{1.36, 0.81, 1.02, 0.85, 0.86, 0.69, 0.82};
const std::vector<int> kScaleOutNodes{1, 1, 1, 2, 2, 4, 4};
const std::vector<double> kScaleUpEff{100.0, 86.5, 53.1, 48.5, 40.8, 33.5, 18.7};
const std::vector<double> kScaleOutEff{100.0, 83.4, 44.3, 39.8, 26.3, 24.6, 13.8};

Outcome grid_decomposition() {
  const std::vector<std::pair<int, int>> expected{{2, 4}, {4, 4}, {4, 6}, {4, 8}, {6, 8}, {8, 8}, {8, 12}};
  Outcome o;
  for (std::size_t i = 0; i < kRanks.size(); ++i) {
    auto g = execution::decompose_grid(kRanks[i]);
    o.check(g.nx == expected[i].first && g.ny == expected[i].second,
            "np=" + std::to_string(kRanks[i]) + " gave (" + std::to_string(g.nx) + "," + std::to_string(g.ny) + ")");
  }
  return o;
}

Outcome efficiency_reproduction() {
  Outcome o;
  double worst = 0;
  auto run = [&](const std::vector<double>& hours, const std::vector<double>& printed, const char* label) {
    std::vector<results::ScalingPoint> pts;
    for (std::size_t i = 0; i < kRanks.size(); ++i) pts.push_back({kRanks[i], hours[i]});
    auto eff = results::parallel_efficiency(results::ScalingSeries(pts));
    for (std::size_t i = 0; i < eff.size(); ++i) {
      const double d = std::abs(eff[i].efficiency_percent - printed[i]);
      worst = std::max(worst, d);
      o.check(d <= 1.5, std::string(label) + " np=" + std::to_string(kRanks[i]) + " off by " + fmt("%.2f", d) + " pp");
    }
  };
  run(kScaleUpHours, kScaleUpEff, "scale-up");
  run(kScaleOutHours, kScaleOutEff, "scale-out");
  if (o.pass) o.detail = "max deviation " + fmt("%.2f", worst) + " pp";
  return o;
}

Outcome simulator_calibration() {
  std::vector<backends::Observation> obs;
  for (std::size_t i = 0; i < kRanks.size(); ++i) obs.push_back({kRanks[i], 1, kScaleUpHours[i]});
  const auto p = backends::calibrate_model(obs);

  Outcome o;
  double worst = 0;
  for (std::size_t i = 0; i < kRanks.size(); ++i) {
    const double err = std::abs(backends::model_wall_hours(kRanks[i], 1, p) - kScaleUpHours[i]) / kScaleUpHours[i];
    worst = std::max(worst, err);
    o.check(err <= 0.15, "np=" + std::to_string(kRanks[i]) + " error " + fmt("%.1f", 100 * err) + "%");
  }

  int argmin = kRanks.front();
  double best = INFINITY;
  for (int np : kRanks) {
    const double t = backends::model_wall_hours(np, 1, p);
    if (t < best) best = t, argmin = np;
  }
  o.check(argmin == 64, "calibrated scale-up minimum at np=" + std::to_string(argmin) + ", not 64");

  for (std::size_t i = 3; i < kRanks.size(); ++i) {
    const double up = backends::model_wall_hours(kRanks[i], 1, p);
    const double out = backends::model_wall_hours(kRanks[i], kScaleOutNodes[i], p);
    o.check(out >= up, "scale-out faster than scale-up at np=" + std::to_string(kRanks[i]));
  }
  if (o.pass) o.detail = "max error " + fmt("%.1f", 100 * worst) + "%";
  else o.detail += " (max error " + fmt("%.1f", 100 * worst) + "%)";
  return o;
}

Outcome instance_selection() {
  const auto& snap = testing::fixture_catalog();
  catalog::ResourceRequirements req;
  req.min_gpus = 1;
  req.min_memory_gib = 32;
  const auto chosen = catalog::select_instance(req, snap).instance;

  const catalog::InstanceType* oracle = nullptr;
  auto key = [](const catalog::InstanceType& t) {
    return std::make_tuple(t.price_per_hour, t.vcpus, t.provider, t.region, t.name);
  };
  for (const auto& t : snap.entries()) {
    if (t.gpus < 1 || t.memory_gib < 32) continue;
    if (!oracle || key(t) < key(*oracle)) oracle = &t;
  }
  Outcome o;
  o.check(chosen.name == "g6.2xlarge", "selected " + chosen.name);
  o.check(oracle && oracle->name == chosen.name, "brute force disagrees");
  return o;
}

Outcome cost_ordering() {
  const auto& snap = testing::fixture_catalog();
  auto find = [&](const std::string& name) {
    return *std::find_if(snap.entries().begin(), snap.entries().end(), [&](const auto& t) { return t.name == name; });
  };
  auto cost = [&](const std::string& name, double seconds) {
    results::RunMetrics m;
    m.n = 20;
    m.mean_seconds = seconds;
    return results::cost_per_run(m, find(name), 1);
  };
  const auto c = cost("c8a.2xlarge", 16.5), m = cost("m8a.2xlarge", 16.3), r = cost("r8a.2xlarge", 16.6);
  Outcome o;
  o.check(c < m && m < r, "ordering c8a=" + c.to_string() + " m8a=" + m.to_string() + " r8a=" + r.to_string());
  if (o.pass) o.detail = "c8a " + c.to_string() + " < m8a " + m.to_string() + " < r8a " + r.to_string() + " USD";
  return o;
}

Outcome cli_grammar() {
  using gateway::parse_run_command;
  Outcome o;
  auto a = parse_run_command({"adviser", "run", "--setup", "./setup_pism.sh", "./run_pism.sh"});
  o.check(a.setup_command == "./setup_pism.sh" && a.run_command == "./run_pism.sh" &&
              a.requirements == catalog::ResourceRequirements{},
          "example 1");
  auto b = parse_run_command({"adviser", "run", "python train.py", "--gpu", "1", "--ram", "32"});
  o.check(b.run_command == "python train.py" && b.requirements.min_gpus == 1 && b.requirements.min_memory_gib == 32.0 &&
              !b.requirements.provider && !b.setup_command,
          "example 2");
  auto c = parse_run_command({"adviser", "run", "--setup", "./setup_pism.sh", "./run_pism.sh --np 96", "--cloud", "aws",
                              "--num-nodes", "4", "--instance-type", "hpc7a.12xlarge"});
  o.check(c.setup_command == "./setup_pism.sh" && c.run_command == "./run_pism.sh --np 96" &&
              c.requirements.provider == "aws" && c.requirements.num_nodes == 4 &&
              c.requirements.instance_type == "hpc7a.12xlarge",
          "example 3");

  const std::vector<std::string> pool{"run", "adviser", "--setup", "--gpu", "--ram", "--cloud", "--num-nodes",
                                      "--instance-type", "--template", "--set", "--", "--dry-run", "--wait",
                                      "--backend", "--cpus", "--max-price", "--workspace", "1", "-2", "32", "aws",
                                      "k=v", "", "=", "--gpu=", "x@", "x@1", "local", "nan", "1e400", "./a.sh"};
  std::mt19937_64 rng(2024);
  std::size_t parsed = 0, rejected = 0, unexpected = 0;
  for (int i = 0; i < 100000; ++i) {
    std::vector<std::string> argv;
    if (rng() % 4) argv.push_back("run");
    const int n = static_cast<int>(rng() % 12);
    for (int k = 0; k < n; ++k) {
      if (rng() % 8 == 0) {
        std::string junk;
        for (int ch = static_cast<int>(rng() % 8); ch > 0; --ch) junk.push_back(static_cast<char>(rng() % 256));
        argv.push_back(std::move(junk));
      } else {
        argv.push_back(pool[rng() % pool.size()]);
      }
    }
    try {
      parse_run_command(argv);
      ++parsed;
    } catch (const Error& e) {
      const auto code = e.code();
      if (code == ErrorCode::UnknownFlag || code == ErrorCode::MissingFlagValue ||
          code == ErrorCode::ConflictingCommandSources || code == ErrorCode::InvalidArgument) {
        ++rejected;
      } else {
        ++unexpected;
      }
    } catch (...) {
      ++unexpected;
    }
  }
  o.check(unexpected == 0, std::to_string(unexpected) + " unstructured failures in fuzzing");
  if (o.pass) o.detail = "1e5 fuzz lists: " + std::to_string(parsed) + " parsed, " + std::to_string(rejected) + " rejected";
  return o;
}

Outcome end_to_end_local() {
  testing::Harness h;
  auto orch = h.start();
  const auto setup = h.script("setup.sh", "echo staging inputs\necho 42 > input.dat");
  const auto run = h.script("run.sh", "echo solving with $(cat input.dat)\necho result > output.dat");
  auto req = gateway::parse_run_command({"run", "--setup", setup.string(), run.string(), "--backend", "local"});

  Outcome o;
  std::vector<results::ProvenanceRecord> recs;
  for (int i = 0; i < 2; ++i) {
    auto id = *orch->submit(req, "student").job_id;
    const auto state = orch->wait(id, std::chrono::seconds(25));
    o.check(state == execution::JobState::Succeeded, "run " + std::to_string(i) + " ended " +
                                                         std::string(execution::to_string(state)));
    auto rec = orch->record_for(id);
    o.check(rec.has_value(), "no provenance record");
    if (rec) recs.push_back(*rec);
  }
  if (recs.size() != 2) return o;

  const auto doc = results::canonical_document(recs[0]);
  for (const char* field : {"template", "environment", "parameters", "resources"})
    o.check(doc.contains(field), std::string("record lacks ") + field);
  o.check(recs[0].template_version.version >= 1, "template version unset");
  o.check(recs[0].resources.backend == execution::Backend::local, "resources do not name the local backend");

  auto second = recs[1];
  second.outcome = recs[0].outcome;
  o.check(results::compute_record_id(second) == recs[0].record_id, "identical runs differ outside outcome fields");
  if (o.pass) o.detail = "record " + recs[0].record_id.substr(0, 12);
  return o;
}

Outcome state_machine() {
  using execution::JobEvent;
  using execution::JobState;
  std::map<std::pair<JobState, JobEvent>, JobState> table{
      {{JobState::Queued, JobEvent::ProvisionStarted}, JobState::Provisioning},
      {{JobState::Provisioning, JobEvent::NodesReady}, JobState::Setup},
      {{JobState::Setup, JobEvent::SetupDone}, JobState::Running},
      {{JobState::Running, JobEvent::RunCompleted}, JobState::Collecting},
      {{JobState::Collecting, JobEvent::OutputsStored}, JobState::Succeeded}};
  for (auto s : {JobState::Queued, JobState::Provisioning, JobState::Setup, JobState::Running, JobState::Collecting}) {
    table[{s, JobEvent::ErrorRaised}] = JobState::Failed;
    table[{s, JobEvent::CancelRequested}] = JobState::Cancelled;
  }
  Outcome o;
  int valid = 0;
  for (auto s : execution::kAllStates) {
    for (auto e : execution::kAllEvents) {
      const auto got = execution::try_transition(s, e);
      const auto it = table.find({s, e});
      const bool match = it == table.end() ? !got.has_value() : (got && *got == it->second);
      o.check(match, std::string(execution::to_string(s)) + "+" + std::string(execution::to_string(e)));
      if (got) ++valid;
      if (execution::is_terminal(s)) o.check(!got, "terminal state accepted an event");
    }
  }
  if (o.pass) o.detail = std::to_string(valid) + " valid of 56 pairs";
  return o;
}

Outcome budget_concurrency() {
  governance::BudgetLedger ledger;
  ledger.create("shared", Money::from_dollars(100));
  std::atomic<int> admitted{0};
  std::atomic<bool> go{false}, stop{false}, violated{false};
  std::atomic<long> samples{0};
  std::thread sampler([&] {
    while (!stop) {
      auto b = ledger.get("shared");
      if (b.spent + b.reserved > b.allocation) violated = true;
      ++samples;
    }
  });
  std::vector<std::thread> threads;
  for (int i = 0; i < 50; ++i) {
    threads.emplace_back([&] {
      while (!go) std::this_thread::yield();
      try {
        ledger.reserve("shared", Money::from_dollars(3));
        ++admitted;
      } catch (const governance::BudgetExhausted&) {
      }
    });
  }
  go = true;
  for (auto& t : threads) t.join();
  stop = true;
  sampler.join();

  int oracle = 0;
  Money held;
  for (int i = 0; i < 50; ++i) {
    if (held + Money::from_dollars(3) <= Money::from_dollars(100)) held += Money::from_dollars(3), ++oracle;
  }
  Outcome o;
  o.check(admitted == 33, "admitted " + std::to_string(admitted.load()));
  o.check(admitted == oracle, "sequential replay admitted " + std::to_string(oracle));
  o.check(!violated, "spent + reserved exceeded the allocation");
  if (o.pass) o.detail = "33 admitted, " + std::to_string(samples.load()) + " samples";
  return o;
}

Outcome repetition_statistics() {
  backends::SimParams p = testing::Harness().cfg.options.sim_params;
  p.jitter_fraction = 0.05;
  p.seed = 7;
  std::vector<double> samples;
  for (std::uint64_t rep = 0; rep < 21; ++rep)
    samples.push_back(backends::sim_execute(4, 1, p, rep).wall_time_hours * 3600.0);

  const auto m = results::aggregate_repetitions(samples, 1);
  double sum = 0;
  for (std::size_t i = 1; i < samples.size(); ++i) sum += samples[i];
  const double mean = sum / 20.0;
  double ss = 0;
  for (std::size_t i = 1; i < samples.size(); ++i) ss += (samples[i] - mean) * (samples[i] - mean);
  const double sd = std::sqrt(ss / 19.0);

  Outcome o;
  o.check(m.n == 20, "n=" + std::to_string(m.n));
  o.check(sd > 0, "samples carry no jitter");
  o.check(std::abs(m.mean_seconds - mean) <= 1e-9 * std::abs(mean), "mean differs from direct summation");
  o.check(std::abs(m.std_seconds - sd) <= 1e-9 * sd, "std differs from direct summation");
  if (o.pass) o.detail = "n=20 mean " + fmt("%.3f", mean) + " s std " + fmt("%.3f", sd) + " s";
  return o;
}

}  // namespace

int main() {
  using std::chrono::milliseconds;
  using std::chrono::seconds;
  const std::vector<Criterion> criteria{
      {"grid-decomposition", milliseconds(1), grid_decomposition},
      {"efficiency-reproduction", milliseconds(1), efficiency_reproduction},
      {"simulator-calibration", seconds(1), simulator_calibration},
      {"instance-selection", milliseconds(1), instance_selection},
      {"cost-ordering", milliseconds(1), cost_ordering},
      {"cli-grammar", seconds(10), cli_grammar},
      {"end-to-end-local-run", seconds(30), end_to_end_local},
      {"state-machine-exhaustion", milliseconds(1), state_machine},
      {"budget-concurrency", seconds(5), budget_concurrency},
      {"repetition-statistics", seconds(1), repetition_statistics},
  };
  testing::fixture_catalog();  // load once outside the timed regions

  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = c.body();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const std::chrono::duration<double> took = Clock::now() - t0;
    if (took > c.limit) {
      o.pass = false;
      o.detail += (o.detail.empty() ? "" : "; ") + std::string("exceeded time limit");
    }
    if (!o.pass) ++failed;
    std::printf("%s %s (%.3f ms) %s\n", o.pass ? "PASS" : "FAIL", c.name.c_str(), took.count() * 1e3,
                o.detail.c_str());
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
