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

// Small helpers for the line-oriented text formats used throughout.

#pragma once

#include <fstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "triebias/error.hpp"

namespace triebias::io {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  return in;
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path);
  return out;
}

inline std::string_view trim(std::string_view s) {
  constexpr std::string_view kSpace = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(kSpace);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(kSpace);
  return s.substr(b, e - b + 1);
}

inline std::string where(const std::string& path, std::size_t line_no) {
  return path + ":" + std::to_string(line_no);
}

// Reads `key<TAB>value` lines. Blank lines are skipped; a line without a tab
// is a value-less key. Duplicate keys are an error.
inline std::vector<std::pair<std::string, std::string>> read_keyed_lines(
    std::istream& in, const std::string& name) {
  std::vector<std::pair<std::string, std::string>> rows;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto tab = line.find('\t');
    std::string key(trim(std::string_view(line).substr(0, tab)));
    std::string value =
        tab == std::string::npos ? std::string() : line.substr(tab + 1);
    if (key.empty()) {
      throw InputError(where(name, line_no) + ": empty key");
    }
    if (!seen.insert(key).second) {
      throw InputError(where(name, line_no) + ": duplicate key '" + key + "'");
    }
    rows.emplace_back(std::move(key), std::move(value));
  }
  return rows;
}

inline std::vector<std::pair<std::string, std::string>> read_keyed_file(
    const std::string& path) {
  auto in = open_input(path);
  return read_keyed_lines(in, path);
}

}  // namespace triebias::io
