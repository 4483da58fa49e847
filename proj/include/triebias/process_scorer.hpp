// Copyright 2026 The triebias Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Runs a scorer bridge as a child process speaking the wire protocol on its
// stdin/stdout.

#pragma once

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <csignal>
#include <cstdio>
#include <memory>
#include <optional>
#include <string>

#include "triebias/error.hpp"
#include "triebias/scorer.hpp"

namespace triebias {

class ProcessChannel : public LineChannel {
 public:
  /// Starts `/bin/sh -c command`.
  explicit ProcessChannel(const std::string& command) {
    int to_child[2];
    int from_child[2];
    if (pipe(to_child) != 0) throw ProtocolError("pipe() failed");
    if (pipe(from_child) != 0) {
      close(to_child[0]);
      close(to_child[1]);
      throw ProtocolError("pipe() failed");
    }
    pid_ = fork();
    if (pid_ < 0) throw ProtocolError("fork() failed");
    if (pid_ == 0) {
      dup2(to_child[0], STDIN_FILENO);
      dup2(from_child[1], STDOUT_FILENO);
      close(to_child[0]);
      close(to_child[1]);
      close(from_child[0]);
      close(from_child[1]);
      execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      _exit(127);
    }
    close(to_child[0]);
    close(from_child[1]);
    // Writes to a dead bridge should surface as errors, not SIGPIPE.
    std::signal(SIGPIPE, SIG_IGN);
    in_ = fdopen(from_child[0], "r");
    out_ = fdopen(to_child[1], "w");
    if (!in_ || !out_) throw ProtocolError("fdopen() failed");
  }

  ProcessChannel(const ProcessChannel&) = delete;
  ProcessChannel& operator=(const ProcessChannel&) = delete;

  ~ProcessChannel() override {
    if (out_) std::fclose(out_);
    if (in_) std::fclose(in_);
    if (pid_ > 0) {
      int status = 0;
      waitpid(pid_, &status, 0);
    }
  }

  void write_line(const std::string& line) override {
    if (std::fputs(line.c_str(), out_) < 0 || std::fputc('\n', out_) < 0 ||
        std::fflush(out_) != 0) {
      throw ProtocolError("failed writing to scorer process");
    }
  }

  std::optional<std::string> read_line() override {
    std::string line;
    int c = 0;
    while ((c = std::fgetc(in_)) != EOF) {
      if (c == '\n') return line;
      line.push_back(static_cast<char>(c));
    }
    if (line.empty()) return std::nullopt;
    return line;
  }

 private:
  pid_t pid_ = -1;
  FILE* in_ = nullptr;
  FILE* out_ = nullptr;
};

inline std::unique_ptr<StepScorer> make_process_scorer(
    const std::string& command) {
  return std::make_unique<WireScorer>(
      std::make_unique<ProcessChannel>(command));
}

}  // namespace triebias
