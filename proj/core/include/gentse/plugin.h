// Copyright 2026 The gentse Authors
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

#pragma once

#include <chrono>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace gentse {

// Long-lived child process speaking newline-delimited JSON over stdio:
// one request object per line on its stdin, one response object per line
// on its stdout. A request that gets no answer within the timeout kills
// the child; the next request starts a fresh one.
class PluginProcess {
 public:
  explicit PluginProcess(std::vector<std::string> argv,
                         std::chrono::milliseconds timeout = std::chrono::seconds(60));
  ~PluginProcess();
  PluginProcess(const PluginProcess&) = delete;
  PluginProcess& operator=(const PluginProcess&) = delete;

  // kPlugin on spawn failure, timeout, crash, or an unparseable reply.
  nlohmann::json request(const nlohmann::json& req);

  const std::vector<std::string>& argv() const { return argv_; }

 private:
  void start();
  void stop();

  std::vector<std::string> argv_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace gentse
