#include "comet/cost_model.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include "comet/error.hpp"

extern char** environ;

namespace comet {

std::string_view to_string(IntervalBounds b) { return b == IntervalBounds::Open ? "open" : "closed"; }

IntervalBounds parse_interval_bounds(std::string_view s) {
  if (s == "open") return IntervalBounds::Open;
  if (s == "closed") return IntervalBounds::Closed;
  throw ConfigError("interval bounds must be 'open' or 'closed', got '" + std::string(s) + "'");
}

namespace {

std::string trim(std::string_view s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Strict positive decimal: digits with an optional fraction and exponent.
bool parse_positive(const std::string& s, double& out) {
  if (s.empty() || !(std::isdigit(static_cast<unsigned char>(s[0])) || s[0] == '.')) return false;
  char* end = nullptr;
  errno = 0;
  double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end != s.c_str() + s.size()) return false;
  if (!std::isfinite(v) || v <= 0.0) return false;
  out = v;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------
// CostTable

CostTable::CostTable(std::string march, std::map<std::string, double> cycles)
    : march_(std::move(march)), cycles_(std::move(cycles)) {
  for (const auto& [m, c] : cycles_)
    if (!(c > 0.0) || !std::isfinite(c)) throw ModelError("cost for '" + m + "' must be positive");
}

CostTable CostTable::load(const std::filesystem::path& path, std::string march) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read cost table " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), std::move(march));
}

CostTable CostTable::parse(std::string_view csv, std::string march) {
  std::map<std::string, double> cycles;
  std::istringstream in{std::string(csv)};
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty()) continue;
    if (!header) {
      if (t != "mnemonic,cycles") throw ConfigError("cost table: expected header 'mnemonic,cycles'");
      header = true;
      continue;
    }
    auto comma = t.find(',');
    if (comma == std::string::npos)
      throw ConfigError("cost table line " + std::to_string(line_no) + ": expected mnemonic,cycles");
    std::string m = trim(t.substr(0, comma));
    std::transform(m.begin(), m.end(), m.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    double v = 0.0;
    if (m.empty() || !parse_positive(trim(t.substr(comma + 1)), v))
      throw ConfigError("cost table line " + std::to_string(line_no) + ": bad entry");
    if (!cycles.emplace(m, v).second)
      throw ConfigError("cost table line " + std::to_string(line_no) + ": duplicate mnemonic " + m);
  }
  if (!header) throw ConfigError("cost table is empty");
  return CostTable(std::move(march), std::move(cycles));
}

double CostTable::at(const std::string& mnemonic) const {
  auto it = cycles_.find(mnemonic);
  if (it == cycles_.end()) throw ModelError("cost table " + march_ + " has no entry for '" + mnemonic + "'");
  return it->second;
}

void CostTable::check_covers(const IsaKb& kb) const {
  for (const auto& [m, spec] : kb.opcodes())
    if (spec.bb_valid && !cycles_.count(m))
      throw ModelError("cost table " + march_ + " has no entry for '" + m + "'");
}

// ---------------------------------------------------------------------------
// Crude model

double feature_cost(const CostTable& table, const BlockGraph& g, const Feature& f) {
  const auto& bb = g.block();
  switch (f.type) {
    case FeatureType::Inst: return table.at(bb[f.index - 1].mnemonic);
    case FeatureType::Dep:
      if (f.dep.kind != DepKind::RAW) return 0.0;
      return table.at(bb[f.dep.src - 1].mnemonic) + table.at(bb[f.dep.dst - 1].mnemonic);
    case FeatureType::NumInsts: return static_cast<double>(f.count) / 4.0;
  }
  return 0.0;
}

double crude_predict(const CostTable& table, const BlockGraph& g) {
  double best = static_cast<double>(g.size()) / 4.0;
  std::vector<double> inst(g.size());
  for (std::size_t i = 0; i < g.size(); ++i) {
    inst[i] = table.at(g.block()[i].mnemonic);
    best = std::max(best, inst[i]);
  }
  for (const auto& e : g.dep_edges())
    if (e.kind == DepKind::RAW) best = std::max(best, inst[e.src - 1] + inst[e.dst - 1]);
  return best;
}

FeatureSet ground_truth_explanation(const CostTable& table, const BlockGraph& g) {
  const double top = crude_predict(table, g);
  std::vector<Feature> out;
  for (const auto& f : extract_features(g))
    if (feature_cost(table, g, f) == top) out.push_back(f);
  return FeatureSet(std::move(out));
}

CrudeModel::CrudeModel(const IsaKb& kb, CostTable table) : kb_(&kb), table_(std::move(table)) {}

double CrudeModel::predict(const BasicBlock& bb) const { return crude_predict(table_, build_graph(*kb_, bb)); }

double CrudeModel::predict_graph(const BlockGraph& g) const { return crude_predict(table_, g); }

// ---------------------------------------------------------------------------
// External process adapter

namespace {

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

struct Fd {
  int fd = -1;
  ~Fd() { close(); }
  void close() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

}  // namespace

double external_predict(const std::string& command, double timeout_seconds, const BasicBlock& bb,
                        const std::string& march) {
  auto argv_s = split_words(command);
  if (argv_s.empty()) throw ModelError("empty model command");
  const std::string input = render_block(bb);

  std::vector<std::string> env_s;
  for (char** e = environ; *e; ++e)
    if (std::strncmp(*e, "COMET_MARCH=", 12) != 0) env_s.emplace_back(*e);
  if (!march.empty()) env_s.push_back("COMET_MARCH=" + march);

  std::vector<char*> argv;
  for (auto& a : argv_s) argv.push_back(a.data());
  argv.push_back(nullptr);
  std::vector<char*> envp;
  for (auto& e : env_s) envp.push_back(e.data());
  envp.push_back(nullptr);

  int in_pipe[2];
  int out_pipe[2];
  int err_pipe[2];  // reports exec failure from the child
  if (pipe2(in_pipe, O_CLOEXEC) != 0) throw ModelError("pipe failed");
  if (pipe2(out_pipe, O_CLOEXEC) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw ModelError("pipe failed");
  }
  if (pipe2(err_pipe, O_CLOEXEC) != 0) {
    for (int fd : {in_pipe[0], in_pipe[1], out_pipe[0], out_pipe[1]}) ::close(fd);
    throw ModelError("pipe failed");
  }
  Fd child_in{in_pipe[1]}, child_out{out_pipe[0]}, exec_err{err_pipe[0]};
  Fd in_r{in_pipe[0]}, out_w{out_pipe[1]}, err_w{err_pipe[1]};

  pid_t pid = fork();
  if (pid < 0) throw ModelError("fork failed: " + std::string(std::strerror(errno)));
  if (pid == 0) {
    dup2(in_pipe[0], 0);
    dup2(out_pipe[1], 1);
    signal(SIGPIPE, SIG_DFL);
    execvpe(argv[0], argv.data(), envp.data());
    int err = errno;
    ssize_t ignored = write(err_pipe[1], &err, sizeof err);
    (void)ignored;
    _exit(127);
  }
  in_r.close();
  out_w.close();
  err_w.close();

  int exec_errno = 0;
  if (read(exec_err.fd, &exec_errno, sizeof exec_errno) == static_cast<ssize_t>(sizeof exec_errno)) {
    waitpid(pid, nullptr, 0);
    throw ModelError("cannot run '" + argv_s[0] + "': " + std::strerror(exec_errno));
  }

  // Block SIGPIPE on this thread while feeding a child that may exit early.
  sigset_t pipe_set, old_set;
  sigemptyset(&pipe_set);
  sigaddset(&pipe_set, SIGPIPE);
  pthread_sigmask(SIG_BLOCK, &pipe_set, &old_set);

  fcntl(child_in.fd, F_SETFL, O_NONBLOCK);
  std::size_t written = 0;
  std::string output;
  bool timed_out = false;
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                            std::chrono::duration<double>(timeout_seconds));
  if (input.empty()) child_in.close();
  while (child_out.fd >= 0) {
    auto now = std::chrono::steady_clock::now();
    if (now >= deadline) {
      timed_out = true;
      break;
    }
    int wait_ms = static_cast<int>(std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count()) + 1;
    pollfd fds[2];
    int nfds = 0;
    fds[nfds++] = {child_out.fd, POLLIN, 0};
    if (child_in.fd >= 0) fds[nfds++] = {child_in.fd, POLLOUT, 0};
    int rc = poll(fds, nfds, wait_ms);
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (nfds == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      ssize_t w = write(child_in.fd, input.data() + written, input.size() - written);
      if (w > 0) written += static_cast<std::size_t>(w);
      if (w < 0 && errno != EAGAIN) written = input.size();
      if (written >= input.size()) child_in.close();
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      char buf[4096];
      ssize_t r = read(child_out.fd, buf, sizeof buf);
      if (r > 0) {
        output.append(buf, static_cast<std::size_t>(r));
        if (output.size() > (1u << 20)) break;
      } else if (r == 0 || errno != EAGAIN) {
        child_out.close();
      }
    }
  }
  child_in.close();
  child_out.close();

  int status = 0;
  if (timed_out) {
    kill(pid, SIGKILL);
    waitpid(pid, &status, 0);
  } else {
    // stdout closed; give the child the remaining budget to exit.
    for (;;) {
      pid_t w = waitpid(pid, &status, WNOHANG);
      if (w == pid) break;
      if (std::chrono::steady_clock::now() >= deadline) {
        timed_out = true;
        kill(pid, SIGKILL);
        waitpid(pid, &status, 0);
        break;
      }
      usleep(1000);
    }
  }
  // Swallow a SIGPIPE raised by our own writes before restoring the mask.
  timespec zero{0, 0};
  while (sigtimedwait(&pipe_set, nullptr, &zero) > 0) {
  }
  pthread_sigmask(SIG_SETMASK, &old_set, nullptr);

  if (timed_out) throw ModelError("model '" + command + "' timed out after " + std::to_string(timeout_seconds) + " s");
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw ModelError("model '" + command + "' failed with status " +
                     std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status)));

  std::string text = output;
  if (!text.empty() && text.back() == '\n') text.pop_back();
  if (!text.empty() && text.back() == '\r') text.pop_back();
  double value = 0.0;
  if (text.find('\n') != std::string::npos || !parse_positive(trim(text), value))
    throw ModelError("model '" + command + "' returned unparseable output: '" + trim(output) + "'");
  return value;
}

ExternalModel::ExternalModel(std::string command, std::string march, double timeout_seconds, int max_concurrent)
    : command_(std::move(command)), march_(std::move(march)), timeout_(timeout_seconds) {
  if (max_concurrent < 1 || max_concurrent > 1024) throw ConfigError("model concurrency must be in [1, 1024]");
  if (!(timeout_seconds > 0.0)) throw ConfigError("model timeout must be positive");
  slots_ = std::make_unique<std::counting_semaphore<1024>>(max_concurrent);
}

ExternalModel::~ExternalModel() = default;

double ExternalModel::predict(const BasicBlock& bb) const {
  slots_->acquire();
  try {
    double v = external_predict(command_, timeout_, bb, march_);
    slots_->release();
    return v;
  } catch (...) {
    slots_->release();
    throw;
  }
}

// ---------------------------------------------------------------------------
// Cache

CachedModel::CachedModel(std::shared_ptr<const CostModel> inner, std::size_t capacity)
    : inner_(std::move(inner)), capacity_(capacity) {
  if (!inner_) throw ConfigError("cached model needs an inner model");
  if (capacity_ < 1) throw ConfigError("cache capacity must be >= 1");
}

template <typename F>
double CachedModel::lookup(const std::string& key, F&& compute) const {
  {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = index_.find(key);
    if (it != index_.end()) {
      lru_.splice(lru_.begin(), lru_, it->second);
      ++hits_;
      return it->second->second;
    }
  }
  ++misses_;
  double v = compute();
  std::lock_guard<std::mutex> lock(mu_);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second->second;
  lru_.emplace_front(key, v);
  index_[key] = lru_.begin();
  while (lru_.size() > capacity_) {
    index_.erase(lru_.back().first);
    lru_.pop_back();
  }
  return v;
}

double CachedModel::predict(const BasicBlock& bb) const {
  return lookup(render_block(bb), [&] { return inner_->predict(bb); });
}

double CachedModel::predict_graph(const BlockGraph& g) const {
  return lookup(render_block(g.block()), [&] { return inner_->predict_graph(g); });
}

std::size_t CachedModel::size() const {
  std::lock_guard<std::mutex> lock(mu_);
  return lru_.size();
}

}  // namespace comet
