#include "ktune/measurement.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <json.hpp>

#include "ktune/errors.hpp"
#include "ktune/rng.hpp"

namespace ktune {

std::vector<MeasurementResult> measure_batch(Backend& backend, const DesignSpace& space,
                                             const std::vector<Configuration>& configs,
                                             const MeasureOptions& options) {
  std::vector<MeasurementResult> results(configs.size());

  auto measure_one = [&](std::size_t i) {
    const Configuration& config = configs[i];
    MeasurementResult& result = results[i];
    result.config = config;
    if (!validate(space, config)) {
      result.valid = false;
      result.fitness = 0.0;
      result.cost_units = options.invalid_cost_factor * 1.0;
      return;
    }
    const BackendResult br = backend.evaluate(space, config);
    if (br.fitness.has_value()) {
      result.valid = true;
      result.fitness = *br.fitness;
      result.cost_units = br.nominal_cost;
    } else {
      result.valid = false;
      result.fitness = 0.0;
      result.cost_units = options.invalid_cost_factor * br.nominal_cost;
    }
  };

  const int workers = std::max(1, options.workers);
  if (workers == 1 || configs.size() <= 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) measure_one(i);
    return results;
  }

  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  const int pool_size = std::min<std::size_t>(workers, configs.size());
  pool.reserve(static_cast<std::size_t>(pool_size));
  for (int w = 0; w < pool_size; ++w) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= configs.size()) return;
        try {
          measure_one(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

// ---------------------------------------------------------------------------
// Synthetic landscape
// ---------------------------------------------------------------------------

PeakSet derive_peaks(const SyntheticLandscapeParams& params, int num_knobs) {
  if (params.num_peaks < 1) {
    throw ConfigError("synthetic landscape: num_peaks must be >= 1");
  }
  if (params.noise_amplitude < 0.0 || params.peak_sharpness < 0.0) {
    throw ConfigError("synthetic landscape: amplitudes must be >= 0");
  }
  PeakSet peaks;
  peaks.centers.resize(params.num_peaks, num_knobs);
  peaks.amplitudes.resize(params.num_peaks);
  Rng rng(stream_seed(params.seed, "landscape-peaks"));
  for (int p = 0; p < params.num_peaks; ++p) {
    for (int d = 0; d < num_knobs; ++d) {
      peaks.centers(p, d) = rng.uniform01();
    }
    peaks.amplitudes[p] = 0.5 + 0.5 * rng.uniform01();
  }
  return peaks;
}

namespace {

double peak_fitness(const PeakSet& peaks, double sharpness, const FeatureVector& features) {
  double sum = 0.0;
  for (Eigen::Index p = 0; p < peaks.amplitudes.size(); ++p) {
    const double d2 = (features.transpose() - peaks.centers.row(p)).squaredNorm();
    sum += peaks.amplitudes[p] * std::exp(-sharpness * d2);
  }
  return sum;
}

}  // namespace

double synthetic_fitness(const SyntheticLandscapeParams& params, const DesignSpace& space,
                         const Configuration& config) {
  if (!params.invalid_rule.empty()) {
    std::vector<std::string> names;
    for (const Knob& knob : space.knobs()) names.push_back(knob.name);
    const ValidityRule rule = ValidityRule::parse(params.invalid_rule, names);
    if (rule.evaluate(space.values_of(config))) return 0.0;
  }
  const PeakSet peaks = derive_peaks(params, space.num_knobs());
  const double base = peak_fitness(peaks, params.peak_sharpness, encode_features(space, config));
  return base + params.noise_amplitude * hash01(params.seed, id_of(space, config));
}

SyntheticBackend::SyntheticBackend(SyntheticLandscapeParams params, const DesignSpace& space)
    : params_(std::move(params)), peaks_(derive_peaks(params_, space.num_knobs())) {
  if (!params_.invalid_rule.empty()) {
    std::vector<std::string> names;
    for (const Knob& knob : space.knobs()) names.push_back(knob.name);
    invalid_rule_ = ValidityRule::parse(params_.invalid_rule, names);
  }
}

BackendResult SyntheticBackend::evaluate(const DesignSpace& space, const Configuration& config) {
  if (invalid_rule_.has_value() && invalid_rule_->evaluate(space.values_of(config))) {
    return {std::nullopt, 1.0};
  }
  const double base = peak_fitness(peaks_, params_.peak_sharpness, encode_features(space, config));
  const double fitness =
      base + params_.noise_amplitude * hash01(params_.seed, id_of(space, config));
  return {fitness, 1.0};
}

// ---------------------------------------------------------------------------
// Tabular backend
// ---------------------------------------------------------------------------

TabularBackend::TabularBackend(std::vector<double> fitness_by_id)
    : fitness_by_id_(std::move(fitness_by_id)) {}

TabularBackend TabularBackend::load(const std::filesystem::path& path, const DesignSpace& space) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("tabular backend: cannot open '" + path.string() + "'");
  }
  std::string line;
  if (!std::getline(in, line) || line != "id,fitness") {
    throw ConfigError("tabular backend: '" + path.string() + "' must start with header id,fitness");
  }
  std::vector<double> table(space.size(), -1.0);
  std::uint64_t rows = 0;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ss(line);
    std::uint64_t id = 0;
    double fitness = 0.0;
    char comma = 0;
    if (!(ss >> id >> comma >> fitness) || comma != ',') {
      throw ConfigError("tabular backend: malformed row at line " + std::to_string(line_no) +
                        " of '" + path.string() + "'");
    }
    if (id >= space.size()) {
      throw ConfigError("tabular backend: id " + std::to_string(id) +
                        " out of range for space of size " + std::to_string(space.size()));
    }
    if (fitness < 0.0 || !std::isfinite(fitness)) {
      throw ConfigError("tabular backend: fitness must be finite and >= 0 at line " +
                        std::to_string(line_no));
    }
    if (table[id] >= 0.0) {
      throw ConfigError("tabular backend: duplicate id " + std::to_string(id));
    }
    table[id] = fitness;
    ++rows;
  }
  if (rows != space.size()) {
    throw ConfigError("tabular backend: table has " + std::to_string(rows) + " rows, space has " +
                      std::to_string(space.size()) + " configurations");
  }
  return TabularBackend(std::move(table));
}

BackendResult TabularBackend::evaluate(const DesignSpace& space, const Configuration& config) {
  const std::uint64_t id = id_of(space, config);
  if (id >= fitness_by_id_.size()) {
    throw BackendError("tabular backend: id " + std::to_string(id) + " not listed");
  }
  const double fitness = fitness_by_id_[id];
  if (fitness <= 0.0) return {std::nullopt, 1.0};
  return {fitness, 1.0};
}

void write_tabular_csv(const std::filesystem::path& path,
                       const std::vector<double>& fitness_by_id) {
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("tabular backend: cannot write '" + path.string() + "'");
  }
  out << "id,fitness\n";
  char buf[64];
  for (std::size_t id = 0; id < fitness_by_id.size(); ++id) {
    std::snprintf(buf, sizeof(buf), "%zu,%.17g\n", id, fitness_by_id[id]);
    out << buf;
  }
}

// ---------------------------------------------------------------------------
// External backend
// ---------------------------------------------------------------------------

ExternalBackend::ExternalBackend(std::string command_template, double timeout_seconds)
    : command_(std::move(command_template)), timeout_seconds_(timeout_seconds) {
  if (command_.empty()) {
    throw ConfigError("external backend: empty command");
  }
  if (timeout_seconds_ <= 0.0) {
    throw ConfigError("external backend: timeout must be positive");
  }
  // Writes to a child that exited early must not kill the process.
  static const int sigpipe_ignored = [] {
    ::signal(SIGPIPE, SIG_IGN);
    return 0;
  }();
  (void)sigpipe_ignored;
}

namespace {

struct ChildProcess {
  pid_t pid = -1;
  int stdin_fd = -1;
  int stdout_fd = -1;
};

ChildProcess spawn_shell(const std::string& command) {
  int in_pipe[2];   // parent writes -> child stdin
  int out_pipe[2];  // child stdout -> parent reads
  if (::pipe(in_pipe) != 0) {
    throw BackendError("external backend: pipe() failed: " + std::string(std::strerror(errno)));
  }
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw BackendError("external backend: pipe() failed: " + std::string(std::strerror(errno)));
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    throw BackendError("external backend: fork() failed: " + std::string(std::strerror(errno)));
  }
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  return {pid, in_pipe[1], out_pipe[0]};
}

// Reads child stdout until EOF or deadline. Returns false on timeout.
bool read_until_deadline(int fd, std::chrono::steady_clock::time_point deadline,
                         std::string& output) {
  char buf[4096];
  for (;;) {
    const auto now = std::chrono::steady_clock::now();
    if (now >= deadline) return false;
    const auto remaining =
        std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    struct pollfd pfd = {fd, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(std::max<long long>(1, remaining)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      throw BackendError("external backend: poll() failed: " + std::string(std::strerror(errno)));
    }
    if (rc == 0) return false;  // timeout
    const ssize_t n = ::read(fd, buf, sizeof(buf));
    if (n < 0) {
      if (errno == EINTR) continue;
      throw BackendError("external backend: read() failed: " + std::string(std::strerror(errno)));
    }
    if (n == 0) return true;  // EOF
    output.append(buf, static_cast<std::size_t>(n));
  }
}

}  // namespace

BackendResult ExternalBackend::evaluate(const DesignSpace& space, const Configuration& config) {
  nlohmann::json request;
  request["workload"] = space.workload();
  request["knobs"] = nlohmann::json::object();
  const std::vector<std::int64_t> values = space.values_of(config);
  for (int i = 0; i < space.num_knobs(); ++i) {
    request["knobs"][space.knobs()[static_cast<std::size_t>(i)].name] =
        values[static_cast<std::size_t>(i)];
  }
  const std::string input = request.dump() + "\n";

  const auto start = std::chrono::steady_clock::now();
  const auto deadline =
      start + std::chrono::milliseconds(static_cast<long long>(timeout_seconds_ * 1000.0));

  ChildProcess child = spawn_shell(command_);

  // Best effort: a command may legitimately exit without reading stdin.
  std::size_t written = 0;
  while (written < input.size()) {
    const ssize_t n = ::write(child.stdin_fd, input.data() + written, input.size() - written);
    if (n <= 0) break;
    written += static_cast<std::size_t>(n);
  }
  ::close(child.stdin_fd);

  std::string output;
  const bool finished = read_until_deadline(child.stdout_fd, deadline, output);
  ::close(child.stdout_fd);

  if (!finished) {
    ::kill(child.pid, SIGKILL);
  }
  int status = 0;
  ::waitpid(child.pid, &status, 0);
  const double elapsed =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  const double nominal = std::max(elapsed, 1e-9);

  if (!finished) {
    return {std::nullopt, nominal};  // timeout -> invalid with reset cost
  }
  const int exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  if (exit_code == 126 || exit_code == 127) {
    throw BackendError("external backend: command cannot be run: '" + command_ + "'");
  }
  if (exit_code != 0) {
    return {std::nullopt, nominal};
  }

  nlohmann::json response;
  try {
    response = nlohmann::json::parse(output);
  } catch (const nlohmann::json::exception&) {
    throw BackendError("external backend: unparsable output: '" + output + "'");
  }
  if (!response.is_object() || !response.contains("runtime_seconds") ||
      !response["runtime_seconds"].is_number()) {
    throw BackendError("external backend: output missing numeric 'runtime_seconds'");
  }
  const double runtime = response["runtime_seconds"].get<double>();
  if (!(runtime > 0.0) || !std::isfinite(runtime)) {
    throw BackendError("external backend: runtime_seconds must be positive and finite");
  }
  return {1.0 / runtime, nominal};
}

}  // namespace ktune
