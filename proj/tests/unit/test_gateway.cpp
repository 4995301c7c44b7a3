#include <random>

#include "adviser/error.hpp"
#include "adviser/gateway.hpp"
#include "doctest.h"

using namespace adviser;
using namespace adviser::gateway;

namespace {

std::optional<ErrorCode> code_of(const std::vector<std::string>& argv) {
  try {
    parse_run_command(argv);
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("the three documented command lines") {
  auto a = parse_run_command({"adviser", "run", "--setup", "./setup_pism.sh", "./run_pism.sh"});
  CHECK(a.setup_command == "./setup_pism.sh");
  CHECK(a.run_command == "./run_pism.sh");
  CHECK(a.requirements == catalog::ResourceRequirements{});
  CHECK(a.backend == execution::Backend::simulated);

  auto b = parse_run_command({"run", "python train.py", "--gpu", "1", "--ram", "32"});
  CHECK(b.run_command == "python train.py");
  CHECK(b.requirements.min_gpus == 1);
  CHECK(b.requirements.min_memory_gib == 32.0);
  CHECK_FALSE(b.requirements.provider.has_value());
  CHECK_FALSE(b.setup_command.has_value());

  auto c = parse_run_command({"run", "--setup", "./setup_pism.sh", "./run_pism.sh --np 96", "--cloud", "aws",
                              "--num-nodes", "4", "--instance-type", "hpc7a.12xlarge"});
  CHECK(c.setup_command == "./setup_pism.sh");
  CHECK(c.run_command == "./run_pism.sh --np 96");
  CHECK(c.requirements.provider == "aws");
  CHECK(c.requirements.num_nodes == 4);
  CHECK(c.requirements.instance_type == "hpc7a.12xlarge");
  CHECK(extract_rank_count(*c.run_command) == 96);
}

TEST_CASE("named parse errors") {
  CHECK(code_of({"run", "x", "--gpus", "1"}) == ErrorCode::UnknownFlag);
  CHECK(code_of({"run", "x", "--gpu"}) == ErrorCode::MissingFlagValue);
  CHECK(code_of({"run", "x", "--ram", "--gpu", "1"}) == ErrorCode::MissingFlagValue);
  CHECK(code_of({"run", "a", "b"}) == ErrorCode::ConflictingCommandSources);
  CHECK(code_of({"run", "--template", "t", "cmd"}) == ErrorCode::ConflictingCommandSources);
  CHECK(code_of({"run"}) == ErrorCode::ConflictingCommandSources);
  CHECK(code_of({"jobs"}) == ErrorCode::InvalidArgument);
  CHECK(code_of({"run", "x", "--gpu", "-1"}) == ErrorCode::InvalidArgument);
  CHECK(code_of({"run", "x", "--ram", "0"}) == ErrorCode::InvalidArgument);
  CHECK(code_of({"run", "x", "--gpu", "1", "--gpu", "2"}) == ErrorCode::InvalidArgument);
  CHECK(code_of({"run", "x", "--backend", "cloud"}) == ErrorCode::InvalidArgument);
  CHECK(code_of({"run", "x", "--set", "q=1"}) == ErrorCode::InvalidArgument);
}

TEST_CASE("flag forms") {
  auto r = parse_run_command({"run", "--template", "pism-greenland@2", "--set", "q=0.5", "--set", "np=16",
                              "--gpu=0", "--backend", "local", "--dry-run", "--wait", "--workspace", "w"});
  REQUIRE(r.template_ref.has_value());
  CHECK(r.template_ref->name == "pism-greenland");
  CHECK(r.template_ref->version == 2);
  CHECK(r.overrides.at("q") == "0.5");
  CHECK(r.overrides.at("np") == "16");
  CHECK(r.requirements.min_gpus == 0);
  CHECK(r.backend == execution::Backend::local);
  CHECK(r.dry_run);
  CHECK(r.wait);
  CHECK(r.workspace == "w");

  auto d = parse_run_command({"run", "--", "--weird-script"});
  CHECK(d.run_command == "--weird-script");
}

TEST_CASE("rank count extraction") {
  CHECK(extract_rank_count("mpirun -n 8 ./a") == 8);
  CHECK(extract_rank_count("./run --np=24") == 24);
  CHECK(extract_rank_count("./run -np 48 -x") == 48);
  CHECK_FALSE(extract_rank_count("./run --np zero").has_value());
  CHECK_FALSE(extract_rank_count("./run").has_value());
}

TEST_CASE("render and reparse round trip") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> cmds{"./run.sh", "python train.py", "-dash-first", "--double", "a=b", "x y z"};
  for (int i = 0; i < 2000; ++i) {
    RunRequest r;
    if (rng() % 3 == 0) {
      r.template_ref = TemplateRef{"tpl" + std::to_string(rng() % 5), std::nullopt};
      if (rng() % 2) r.template_ref->version = static_cast<int>(rng() % 9) + 1;
      for (int k = 0; k < static_cast<int>(rng() % 3); ++k)
        r.overrides["k" + std::to_string(k)] = std::to_string(rng() % 100);
    } else {
      r.run_command = cmds[rng() % cmds.size()];
      if (rng() % 2) r.setup_command = cmds[rng() % cmds.size()];
    }
    auto& q = r.requirements;
    if (rng() % 2) q.min_gpus = static_cast<int>(rng() % 4);
    if (rng() % 2) q.min_memory_gib = static_cast<double>(rng() % 1000) / 8.0 + 0.125;
    if (rng() % 2) q.min_vcpus = static_cast<int>(rng() % 64) + 1;
    if (rng() % 2) q.provider = rng() % 2 ? "aws" : "gcp";
    q.num_nodes = static_cast<int>(rng() % 4) + 1;
    if (rng() % 3 == 0) q.instance_type = "c8a.xlarge";
    if (rng() % 3 == 0) q.max_price_per_hour = Money::from_micros(static_cast<std::int64_t>(rng() % 10'000'000));
    r.backend = rng() % 2 ? execution::Backend::local : execution::Backend::simulated;
    if (rng() % 2) r.workspace = "ws" + std::to_string(rng() % 3);
    r.dry_run = rng() % 2;
    r.wait = rng() % 2;

    auto back = parse_run_command(to_argv(r));
    CHECK(back == r);

    nlohmann::json j = r;
    CHECK(j.get<RunRequest>() == r);
  }
}

TEST_CASE("fuzzed token lists only raise named errors") {
  std::mt19937_64 rng(17);
  const std::vector<std::string> pool{"run", "--setup", "--gpu", "--ram", "--cloud", "--num-nodes", "--instance-type",
                                      "--template", "--set", "--", "--dry-run", "--wait", "--backend", "1", "-3", "32",
                                      "aws", "x=y", "", "=", "--gpu=", "--ram=abc", "local", "./a.sh", "1e999", "@",
                                      "t@", "t@0", "--max-price", "nan", "--cpus", "0", "--workspace"};
  for (int i = 0; i < 20000; ++i) {
    std::vector<std::string> argv;
    if (rng() % 4) argv.push_back("run");
    const int n = static_cast<int>(rng() % 10);
    for (int k = 0; k < n; ++k) {
      if (rng() % 10 == 0) {
        std::string junk;
        for (int c = static_cast<int>(rng() % 6); c > 0; --c) junk.push_back(static_cast<char>(rng() % 256));
        argv.push_back(junk);
      } else {
        argv.push_back(pool[rng() % pool.size()]);
      }
    }
    try {
      auto r = parse_run_command(argv);
      CHECK((r.run_command.has_value() != r.template_ref.has_value()));
    } catch (const Error& e) {
      const auto c = e.code();
      CHECK((c == ErrorCode::UnknownFlag || c == ErrorCode::MissingFlagValue ||
             c == ErrorCode::ConflictingCommandSources || c == ErrorCode::InvalidArgument));
    }
  }
}
