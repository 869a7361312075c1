#include "scitikz/process.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <sstream>

#include "scitikz/error.hpp"

extern char** environ;

namespace scitikz {

namespace {

using Clock = std::chrono::steady_clock;

struct Fd {
  int fd = -1;
  Fd() = default;
  explicit Fd(int f) : fd(f) {}
  Fd(const Fd&) = delete;
  Fd& operator=(const Fd&) = delete;
  Fd(Fd&& o) noexcept : fd(o.fd) { o.fd = -1; }
  ~Fd() { reset(); }
  void reset() {
    if (fd >= 0) ::close(fd);
    fd = -1;
  }
};

std::vector<std::string> build_env(const ProcessOptions& opts) {
  std::vector<std::string> env;
  for (const auto& name : opts.env_allow) {
    if (name.ends_with('*')) {
      const std::string_view prefix(name.data(), name.size() - 1);
      for (char** e = environ; *e; ++e)
        if (std::string_view(*e).starts_with(prefix)) env.emplace_back(*e);
    } else if (const char* v = std::getenv(name.c_str())) {
      env.push_back(name + "=" + v);
    }
  }
  for (const auto& kv : opts.env_extra) env.push_back(kv);
  return env;
}

std::string search_path(const std::string& program, const std::vector<std::string>& env) {
  if (program.find('/') != std::string::npos) return program;
  std::string path = "/usr/local/bin:/usr/bin:/bin";
  for (const auto& kv : env) {
    if (kv.starts_with("PATH=")) path = kv.substr(5);
  }
  std::stringstream ss(path);
  std::string dir;
  while (std::getline(ss, dir, ':')) {
    if (dir.empty()) dir = ".";
    const std::string candidate = dir + "/" + program;
    if (::access(candidate.c_str(), X_OK) == 0) return candidate;
  }
  return {};
}

void kill_group(pid_t pid, int sig) {
  if (::kill(-pid, sig) != 0) ::kill(pid, sig);
}

}  // namespace

bool program_exists(const std::string& program) {
  std::vector<std::string> env;
  if (const char* p = std::getenv("PATH")) env.push_back(std::string("PATH=") + p);
  const std::string resolved = search_path(program, env);
  if (resolved.empty()) return false;
  struct stat st {};
  return ::stat(resolved.c_str(), &st) == 0 && S_ISREG(st.st_mode) && ::access(resolved.c_str(), X_OK) == 0;
}

ProcessResult run_process(const std::vector<std::string>& argv, const ProcessOptions& opts) {
  if (argv.empty()) throw Error("run_process: empty argv");
  ProcessResult result;

  const std::vector<std::string> env = build_env(opts);
  const std::string resolved = search_path(argv[0], env);
  if (resolved.empty()) {
    result.not_found = true;
    result.output = argv[0] + ": command not found";
    return result;
  }

  int out_pipe[2], err_pipe[2], in_pipe[2];
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw EnvironmentError("pipe failed");
  Fd out_r(out_pipe[0]), out_w(out_pipe[1]);
  if (::pipe2(err_pipe, O_CLOEXEC) != 0) throw EnvironmentError("pipe failed");
  Fd err_r(err_pipe[0]), err_w(err_pipe[1]);
  if (::pipe2(in_pipe, O_CLOEXEC) != 0) throw EnvironmentError("pipe failed");
  Fd in_r(in_pipe[0]), in_w(in_pipe[1]);

  std::vector<char*> cargv;
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  std::vector<char*> cenv;
  for (const auto& e : env) cenv.push_back(const_cast<char*>(e.c_str()));
  cenv.push_back(nullptr);
  const std::string cwd = opts.cwd.string();

  const auto start = Clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) throw EnvironmentError(std::string("fork failed: ") + std::strerror(errno));
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(in_r.fd, STDIN_FILENO);
    ::dup2(out_w.fd, STDOUT_FILENO);
    ::dup2(out_w.fd, STDERR_FILENO);
    if (!cwd.empty() && ::chdir(cwd.c_str()) != 0) _exit(126);
    ::execve(resolved.c_str(), cargv.data(), cenv.data());
    const int code = errno;
    const ssize_t ignored = ::write(err_w.fd, &code, sizeof code);
    (void)ignored;
    _exit(127);
  }
  ::setpgid(pid, pid);
  out_w.reset();
  err_w.reset();
  in_r.reset();

  if (!opts.stdin_data.empty()) {
    // Small payloads only; larger inputs would need to be interleaved with
    // reading to avoid pipe deadlock.
    std::size_t off = 0;
    ::signal(SIGPIPE, SIG_IGN);
    while (off < opts.stdin_data.size()) {
      const ssize_t w = ::write(in_w.fd, opts.stdin_data.data() + off, opts.stdin_data.size() - off);
      if (w <= 0) break;
      off += static_cast<std::size_t>(w);
    }
  }
  in_w.reset();

  const auto deadline = start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(opts.timeout_s));
  bool out_open = true;
  char buf[8192];
  while (out_open) {
    const auto now = Clock::now();
    if (now >= deadline) {
      result.timed_out = true;
      break;
    }
    const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - now).count();
    pollfd pfd{out_r.fd, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(std::max<long long>(1, remaining)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (rc == 0) continue;
    const ssize_t r = ::read(out_r.fd, buf, sizeof buf);
    if (r <= 0) {
      out_open = false;
    } else if (result.output.size() < opts.max_output_bytes) {
      result.output.append(buf, static_cast<std::size_t>(std::min<std::size_t>(r, opts.max_output_bytes - result.output.size())));
    }
  }

  int status = 0;
  if (result.timed_out) {
    kill_group(pid, SIGTERM);
    const auto hard = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(opts.grace_s));
    bool reaped = false;
    while (Clock::now() < hard) {
      if (::waitpid(pid, &status, WNOHANG) == pid) {
        reaped = true;
        break;
      }
      ::usleep(10000);
    }
    kill_group(pid, SIGKILL);
    if (!reaped) ::waitpid(pid, &status, 0);
  } else {
    // Output closed; the child may still be running if it closed stdout.
    while (true) {
      const pid_t w = ::waitpid(pid, &status, WNOHANG);
      if (w == pid) break;
      if (Clock::now() >= deadline) {
        result.timed_out = true;
        kill_group(pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        break;
      }
      ::usleep(5000);
    }
    kill_group(pid, SIGKILL);  // stray grandchildren
  }
  result.duration_s = std::chrono::duration<double>(Clock::now() - start).count();

  int exec_errno = 0;
  if (::read(err_r.fd, &exec_errno, sizeof exec_errno) == static_cast<ssize_t>(sizeof exec_errno)) {
    result.not_found = true;
    result.output = argv[0] + ": " + std::strerror(exec_errno);
    return result;
  }
  if (!result.timed_out) {
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) result.exit_code = 128 + WTERMSIG(status);
  }
  return result;
}

}  // namespace scitikz
