#include "adviser/backends.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstring>
#include <sstream>

#include <fcntl.h>
#include <poll.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

namespace adviser::backends {

using nlohmann::json;

std::string_view to_string(ExitStatus s) noexcept {
  return s == ExitStatus::success ? "success" : "failure";
}

void validate(const SimParams& p) {
  auto bad = [](const std::string& m) { throw Error(ErrorCode::InvalidArgument, m); };
  if (!(p.t_serial_hours > 0)) bad("t_serial_hours must be > 0");
  if (!(p.serial_fraction >= 0 && p.serial_fraction <= 1)) bad("serial_fraction must be in [0,1]");
  if (!(p.internode_penalty_per_node_hours >= 0)) bad("internode penalty must be >= 0");
  if (!(p.provision_delay_seconds_per_node >= 0)) bad("provision delay must be >= 0");
  if (!(p.jitter_fraction >= 0 && p.jitter_fraction < 0.5)) bad("jitter_fraction must be in [0, 0.5)");
  if (!(p.stockout_probability >= 0 && p.stockout_probability <= 1))
    bad("stockout_probability must be in [0,1]");
}

// ---------------------------------------------------------------------------
// Local backend

namespace {

struct StepResult {
  int status = 0;
  bool timed_out = false;
  bool cancelled = false;
  std::string log;
};

StepResult run_shell(const std::string& command, const std::filesystem::path& workdir,
                     const std::map<std::string, std::string>& env,
                     std::chrono::steady_clock::time_point deadline, const std::stop_token& stop) {
  int fds[2];
  if (::pipe2(fds, O_CLOEXEC) != 0) {
    throw Error(ErrorCode::InvalidArgument, std::string("pipe failed: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(fds[0]);
    ::close(fds[1]);
    throw Error(ErrorCode::InvalidArgument, std::string("fork failed: ") + std::strerror(errno));
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(fds[1], STDOUT_FILENO);
    ::dup2(fds[1], STDERR_FILENO);
    int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    if (::chdir(workdir.c_str()) != 0) _exit(126);
    for (const auto& [k, v] : env) ::setenv(k.c_str(), v.c_str(), 1);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  ::setpgid(pid, pid);
  ::close(fds[1]);

  StepResult result;
  std::array<char, 4096> buf{};
  bool open = true;
  while (open) {
    if (std::chrono::steady_clock::now() >= deadline) result.timed_out = true;
    if (stop.stop_requested()) result.cancelled = true;
    if (result.timed_out || result.cancelled) {
      ::kill(-pid, SIGKILL);
      break;
    }
    pollfd pfd{fds[0], POLLIN, 0};
    const int ready = ::poll(&pfd, 1, 20);
    if (ready > 0) {
      const auto n = ::read(fds[0], buf.data(), buf.size());
      if (n > 0) {
        result.log.append(buf.data(), static_cast<std::size_t>(n));
      } else if (n == 0 || errno != EINTR) {
        open = false;
      }
    }
  }
  // Drain anything left after the writer side closed or was killed.
  ::fcntl(fds[0], F_SETFL, O_NONBLOCK);
  ssize_t n = 0;
  while ((n = ::read(fds[0], buf.data(), buf.size())) > 0) result.log.append(buf.data(), n);
  ::close(fds[0]);

  int wstatus = 0;
  while (::waitpid(pid, &wstatus, 0) < 0 && errno == EINTR) {
  }
  if (WIFEXITED(wstatus)) {
    result.status = WEXITSTATUS(wstatus);
  } else if (WIFSIGNALED(wstatus)) {
    result.status = 128 + WTERMSIG(wstatus);
  }
  return result;
}

[[noreturn]] void fail_step(const StepResult& r, ErrorCode code, const std::string& step,
                            const std::string& log) {
  if (r.timed_out) throw CommandFailed(ErrorCode::Timeout, step + " step timed out", r.status, log);
  if (r.cancelled) throw CommandFailed(code, step + " step cancelled", r.status, log);
  throw CommandFailed(code, step + " command exited with status " + std::to_string(r.status),
                      r.status, log);
}

}  // namespace

ExecutionOutcome local_execute(const workflow::ExecutablePlan& plan,
                               const std::filesystem::path& workdir, const LocalOptions& options) {
  namespace fs = std::filesystem;
  if (plan.run.empty() || (plan.setup && plan.setup->empty())) {
    throw Error(ErrorCode::InvalidArgument, "commands must be non-empty");
  }
  fs::create_directories(workdir / "outputs");
  auto env = options.env;
  env["ADVISER_OUTPUT_DIR"] = fs::absolute(workdir / "outputs").string();

  const auto start = std::chrono::steady_clock::now();
  const auto deadline = start + options.timeout;
  std::string log;

  if (plan.setup) {
    auto r = run_shell(*plan.setup, workdir, env, deadline, options.stop);
    log += r.log;
    if (r.status != 0 || r.timed_out || r.cancelled) fail_step(r, ErrorCode::SetupFailed, "setup", log);
    if (options.on_setup_done) options.on_setup_done();
  }
  auto r = run_shell(plan.run, workdir, env, deadline, options.stop);
  log += r.log;
  if (r.status != 0 || r.timed_out || r.cancelled) fail_step(r, ErrorCode::RunFailed, "run", log);

  const std::chrono::duration<double, std::ratio<3600>> elapsed =
      std::chrono::steady_clock::now() - start;

  ExecutionOutcome out;
  out.wall_time_hours = std::max(elapsed.count(), 1e-12);
  out.exit_status = ExitStatus::success;
  out.log_text = std::move(log);
  for (const auto& entry : fs::recursive_directory_iterator(workdir / "outputs")) {
    if (entry.is_regular_file()) {
      out.output_refs.push_back(fs::relative(entry.path(), workdir).generic_string());
    }
  }
  std::sort(out.output_refs.begin(), out.output_refs.end());
  return out;
}

// ---------------------------------------------------------------------------
// Simulator

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_text(std::string_view s) {
  std::uint64_t h = 0xCBF29CE484222325ULL;  // FNV-1a
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

std::string format_hours(double h) {
  std::ostringstream s;
  s.precision(17);
  s << h;
  return s.str();
}

}  // namespace

double keyed_uniform(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double model_wall_hours(int np, int num_nodes, const SimParams& p) {
  if (np < 1 || num_nodes < 1) throw Error(ErrorCode::InvalidArgument, "np and num_nodes must be >= 1");
  const double compute = p.t_serial_hours * (p.serial_fraction + (1.0 - p.serial_fraction) / np);
  const double internode = p.internode_penalty_per_node_hours * (num_nodes - 1) * (np / 8.0);
  return compute + internode;
}

ExecutionOutcome sim_execute(int np, int num_nodes, const SimParams& params, std::uint64_t repetition) {
  validate(params);
  const double base = model_wall_hours(np, num_nodes, params);
  double factor = 1.0;
  if (params.jitter_fraction > 0) {
    const double u = keyed_uniform(params.seed, static_cast<std::uint64_t>(np),
                                   static_cast<std::uint64_t>(num_nodes), repetition);
    factor += params.jitter_fraction * (2.0 * u - 1.0);
  }
  ExecutionOutcome out;
  out.wall_time_hours = base * factor;
  out.exit_status = ExitStatus::success;
  out.log_text = "simulated run np=" + std::to_string(np) + " nodes=" + std::to_string(num_nodes) +
                 " repetition=" + std::to_string(repetition) +
                 " wall_hours=" + format_hours(out.wall_time_hours) + "\n";
  out.output_refs.push_back("sim://" + std::to_string(params.seed) + "/np" + std::to_string(np) +
                            "-nodes" + std::to_string(num_nodes) + "-rep" +
                            std::to_string(repetition) + "/summary");
  return out;
}

ProvisionResult sim_provision(const execution::ProvisioningPlan& plan, const SimParams& params) {
  if (plan.backend != execution::Backend::simulated) {
    throw Error(ErrorCode::InvalidArgument, "sim_provision requires a simulated plan");
  }
  validate(params);
  if (params.stockout_injection) {
    const double draw = keyed_uniform(params.seed, 0x570C0u, static_cast<std::uint64_t>(plan.num_nodes),
                                      hash_text(plan.instance.name));
    if (draw < params.stockout_probability) {
      throw Error(ErrorCode::SimulatedStockout,
                  "simulated capacity stockout for " + plan.instance.name + " in " +
                      plan.instance.region);
    }
  }
  ProvisionResult out;
  for (int i = 0; i < plan.num_nodes; ++i) out.nodes.push_back({"node-" + std::to_string(i), i});
  out.delay_seconds = params.provision_delay_seconds_per_node * plan.num_nodes;
  return out;
}

// ---------------------------------------------------------------------------
// Calibration

namespace {

constexpr int kParams = 3;
using Vec = std::array<double, kParams>;
using Mat = std::array<Vec, kParams>;

// Solves the normal equations restricted to `active` columns; false when the
// restricted system is singular.
bool solve_subset(const Mat& ata, const Vec& atb, const std::array<bool, kParams>& active, Vec& x) {
  std::array<int, kParams> idx{};
  int n = 0;
  for (int i = 0; i < kParams; ++i) {
    if (active[i]) idx[n++] = i;
  }
  double m[kParams][kParams + 1] = {};
  double scale = 0;
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) m[r][c] = ata[idx[r]][idx[c]];
    m[r][n] = atb[idx[r]];
    scale = std::max(scale, std::abs(m[r][r]));
  }
  for (int col = 0; col < n; ++col) {
    int piv = col;
    for (int r = col + 1; r < n; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    if (std::abs(m[piv][col]) <= 1e-12 * std::max(scale, 1e-300)) return false;
    for (int c = 0; c <= n; ++c) std::swap(m[col][c], m[piv][c]);
    for (int r = 0; r < n; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c = col; c <= n; ++c) m[r][c] -= f * m[col][c];
    }
  }
  x = {0, 0, 0};
  for (int r = 0; r < n; ++r) x[idx[r]] = m[r][n] / m[r][r];
  return true;
}

}  // namespace

SimParams calibrate_model(const std::vector<Observation>& observations) {
  if (observations.size() < 3) {
    throw Error(ErrorCode::Underdetermined, "calibration needs at least 3 observations");
  }
  std::vector<int> distinct_np;
  bool multi_node = false;
  for (const auto& o : observations) {
    if (o.np < 1 || o.num_nodes < 1 || !(o.wall_hours > 0)) {
      throw Error(ErrorCode::InvalidArgument, "observations need np, num_nodes >= 1 and wall_hours > 0");
    }
    if (std::find(distinct_np.begin(), distinct_np.end(), o.np) == distinct_np.end())
      distinct_np.push_back(o.np);
    multi_node = multi_node || o.num_nodes > 1;
  }
  if (distinct_np.size() < 2) {
    throw Error(ErrorCode::Underdetermined, "calibration needs at least 2 distinct np values");
  }

  // Linear in (a, b, c): T = a + b/np + c*(nodes-1)*np/8, with a = t*s and
  // b = t*(1-s). Rows are divided by the observed time (relative error).
  Mat ata{};
  Vec atb{};
  for (const auto& o : observations) {
    const Vec row = {1.0 / o.wall_hours, (1.0 / o.np) / o.wall_hours,
                     (o.num_nodes - 1) * (o.np / 8.0) / o.wall_hours};
    for (int r = 0; r < kParams; ++r) {
      for (int c = 0; c < kParams; ++c) ata[r][c] += row[r] * row[c];
      atb[r] += row[r];  // target is 1 after scaling
    }
  }

  std::array<bool, kParams> full = {true, true, multi_node};
  Vec probe{};
  if (!solve_subset(ata, atb, full, probe)) {
    throw Error(ErrorCode::Underdetermined, "calibration design matrix is rank-deficient");
  }

  // Non-negative least squares by enumerating active sets; the objective is
  // x'AtA x - 2 x'Atb (+ const).
  Vec best{};
  double best_obj = INFINITY;
  for (int mask = 1; mask < (1 << kParams); ++mask) {
    std::array<bool, kParams> active{};
    bool allowed = true;
    for (int i = 0; i < kParams; ++i) {
      active[i] = (mask >> i) & 1;
      if (active[i] && !full[i]) allowed = false;
    }
    if (!allowed) continue;
    Vec x{};
    if (!solve_subset(ata, atb, active, x)) continue;
    if (std::any_of(x.begin(), x.end(), [](double v) { return v < 0; })) continue;
    double obj = 0;
    for (int r = 0; r < kParams; ++r) {
      for (int c = 0; c < kParams; ++c) obj += x[r] * ata[r][c] * x[c];
      obj -= 2 * x[r] * atb[r];
    }
    if (obj < best_obj) {
      best_obj = obj;
      best = x;
    }
  }
  const double t = best[0] + best[1];
  if (!(t > 0)) throw Error(ErrorCode::Underdetermined, "calibration produced no positive fit");

  SimParams p;
  p.t_serial_hours = t;
  p.serial_fraction = best[0] / t;
  p.internode_penalty_per_node_hours = best[2];
  p.jitter_fraction = 0;
  p.seed = 0;
  return p;
}

void to_json(json& j, const SimParams& p) {
  j = json{{"t_serial_hours", p.t_serial_hours},
           {"serial_fraction", p.serial_fraction},
           {"internode_penalty_per_node_hours", p.internode_penalty_per_node_hours},
           {"provision_delay_seconds_per_node", p.provision_delay_seconds_per_node},
           {"jitter_fraction", p.jitter_fraction},
           {"seed", p.seed},
           {"stockout_injection", p.stockout_injection},
           {"stockout_probability", p.stockout_probability}};
}

void from_json(const json& j, SimParams& p) {
  p = SimParams{};
  p.t_serial_hours = j.at("t_serial_hours").get<double>();
  p.serial_fraction = j.at("serial_fraction").get<double>();
  p.internode_penalty_per_node_hours = j.value("internode_penalty_per_node_hours", 0.0);
  p.provision_delay_seconds_per_node = j.value("provision_delay_seconds_per_node", 0.0);
  p.jitter_fraction = j.value("jitter_fraction", 0.0);
  p.seed = j.value("seed", std::uint64_t{0});
  p.stockout_injection = j.value("stockout_injection", false);
  p.stockout_probability = j.value("stockout_probability", 0.0);
  validate(p);
}

}  // namespace adviser::backends
