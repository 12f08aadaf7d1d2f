#pragma once

// Runs a user-supplied MUS enumerator as a subprocess (POSIX only).
//
// The command template may contain {cnf} (path of a DIMACS file holding the
// formula), {timeout} (remaining seconds, decimal) and {timeout_s} (remaining
// seconds rounded up). The program prints one MUS per line as 1-based clause
// indices in file order, optionally terminated by 0. Lines starting with 'c'
// or '#' and blank lines are ignored. Only newline-terminated lines emitted
// before the deadline count.

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "musprune/cnf.hpp"
#include "musprune/mus.hpp"

namespace musprune {

struct ExternalRun {
  std::string output;
  bool timed_out = false;
  /// Exit code, or 128 + signal when killed.
  int exit_status = 0;
};

struct ParsedMuses {
  std::vector<ClauseSet> muses;  // 0-based
  std::size_t malformed_lines = 0;
};

inline std::string expand_command(std::string tmpl, const std::string& cnf_path,
                                  std::chrono::duration<double> timeout) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", timeout.count());
  const std::string decimal = buf;
  const std::string whole = std::to_string(static_cast<long long>(std::ceil(timeout.count())));
  auto replace_all = [&](const std::string& key, const std::string& value) {
    for (std::size_t pos = tmpl.find(key); pos != std::string::npos;
         pos = tmpl.find(key, pos + value.size())) {
      tmpl.replace(pos, key.size(), value);
    }
  };
  replace_all("{cnf}", cnf_path);
  replace_all("{timeout_s}", whole);
  replace_all("{timeout}", decimal);
  return tmpl;
}

inline ParsedMuses parse_mus_lines(const std::string& text, std::size_t num_clauses) {
  ParsedMuses out;
  std::size_t begin = 0;
  while (true) {
    const auto nl = text.find('\n', begin);
    if (nl == std::string::npos) break;  // unterminated tail is dropped
    const std::string line = text.substr(begin, nl - begin);
    begin = nl + 1;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == 'c' || line[first] == '#') continue;
    std::istringstream in(line);
    ClauseSet mus;
    bool ok = true;
    std::string tok;
    while (in >> tok) {
      char* end = nullptr;
      errno = 0;
      const long long v = std::strtoll(tok.c_str(), &end, 10);
      if (errno != 0 || *end != '\0' || v < 0 || static_cast<unsigned long long>(v) > num_clauses) {
        ok = false;
        break;
      }
      if (v == 0) {
        if (in >> tok) ok = false;
        break;
      }
      mus.push_back(static_cast<ClauseIndex>(v - 1));
    }
    if (!ok || mus.empty()) {
      ++out.malformed_lines;
      continue;
    }
    out.muses.push_back(canonical(std::move(mus)));
  }
  return out;
}

/// Runs `command` under /bin/sh with stdout captured. The process group is
/// killed at the deadline.
inline ExternalRun run_command(const std::string& command, std::chrono::duration<double> timeout) {
  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + std::chrono::duration_cast<clock::duration>(timeout);
  int fds[2];
  if (pipe(fds) != 0) throw Error(std::string("pipe: ") + std::strerror(errno));
  const pid_t pid = fork();
  if (pid < 0) {
    close(fds[0]);
    close(fds[1]);
    throw Error(std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    setpgid(0, 0);
    dup2(fds[1], STDOUT_FILENO);
    close(fds[0]);
    close(fds[1]);
    const int devnull = open("/dev/null", O_RDWR);
    if (devnull >= 0) {
      dup2(devnull, STDIN_FILENO);
      dup2(devnull, STDERR_FILENO);
    }
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  setpgid(pid, pid);
  close(fds[1]);
  ExternalRun run;
  char buf[4096];
  for (;;) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    if (left.count() <= 0) {
      run.timed_out = true;
      break;
    }
    pollfd p{fds[0], POLLIN, 0};
    const int ready = poll(&p, 1, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (ready < 0 && errno != EINTR) break;
    if (ready <= 0) continue;
    const ssize_t n = read(fds[0], buf, sizeof buf);
    if (n <= 0) break;
    run.output.append(buf, static_cast<std::size_t>(n));
  }
  if (run.timed_out) kill(-pid, SIGKILL);
  close(fds[0]);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  if (WIFEXITED(status)) {
    run.exit_status = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    run.exit_status = 128 + WTERMSIG(status);
  }
  return run;
}

struct ExternalTrace {
  EnumerationTrace trace;
  ExternalRun run;
  std::size_t malformed_lines = 0;
};

/// Writes the formula to a temporary DIMACS file and runs the enumerator on
/// it. A nonzero exit without a timeout throws.
inline ExternalTrace enumerate_external(const CnfFormula& formula, const std::string& command_template,
                                        std::chrono::duration<double> budget) {
  auto path = (std::filesystem::temp_directory_path() / "musprune-XXXXXX.cnf").string();
  const int fd = mkstemps(path.data(), 4);
  if (fd < 0) throw Error("cannot create temporary file");
  close(fd);
  {
    std::ofstream out(path);
    out << write_dimacs(formula);
  }
  ExternalTrace result;
  try {
    result.run = run_command(expand_command(command_template, path, budget), budget);
  } catch (...) {
    std::filesystem::remove(path);
    throw;
  }
  std::filesystem::remove(path);
  auto parsed = parse_mus_lines(result.run.output, formula.num_clauses());
  result.malformed_lines = parsed.malformed_lines;
  for (auto& m : parsed.muses) result.trace.muses.push_back(MusRecord{std::move(m), {}});
  if (!result.run.timed_out && result.run.exit_status != 0) {
    throw Error("external enumerator exited with status " + std::to_string(result.run.exit_status));
  }
  result.trace.exhausted = !result.run.timed_out;
  return result;
}

}  // namespace musprune
