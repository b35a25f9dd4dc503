// Copyright 2026 The annotrace Authors
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

#include "annotrace/report.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>

#include "annotrace/errors.hpp"

#ifndef ANNOTRACE_VERSION
#define ANNOTRACE_VERSION "0.0.0"
#endif

namespace annotrace {

std::string_view version() { return ANNOTRACE_VERSION; }

void Table::add(std::vector<ordered_json> row) {
  if (row.size() != columns.size()) throw Error("table '" + name + "': row width differs from header");
  rows.push_back(std::move(row));
}

Report Report::make(std::string command, std::string workspace_id) {
  Report r;
  r.version = std::string(annotrace::version());
  r.command = std::move(command);
  r.workspace_id = std::move(workspace_id);
  std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  if (const char* sde = std::getenv("SOURCE_DATE_EPOCH"); sde && *sde) {
    now = static_cast<std::time_t>(std::strtoll(sde, nullptr, 10));
  }
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  r.generated_at = buf;
  return r;
}

ordered_json Report::payload_json() const {
  if (payload) return *payload;
  ordered_json out = ordered_json::object();
  for (const Table& t : tables) {
    ordered_json rows = ordered_json::array();
    for (const auto& row : t.rows) {
      ordered_json obj = ordered_json::object();
      for (std::size_t i = 0; i < t.columns.size(); ++i) obj[t.columns[i]] = row[i];
      rows.push_back(std::move(obj));
    }
    out[t.name] = std::move(rows);
  }
  return out;
}

std::string Report::to_json() const {
  ordered_json j;
  j["tool"] = tool;
  j["version"] = version;
  j["workspace_id"] = workspace_id;
  j["command"] = command;
  j["parameters"] = parameters;
  j["generated_at"] = generated_at;
  j["payload"] = payload_json();
  return j.dump(2) + "\n";
}

std::string tsv_cell(const ordered_json& cell) {
  if (cell.is_null()) return "";
  if (cell.is_number_float()) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f", cell.get<double>());
    return buf;
  }
  if (!cell.is_string()) return cell.dump();
  std::string out;
  for (char c : cell.get_ref<const std::string&>()) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\\': out += "\\\\"; break;
      default: out += c;
    }
  }
  return out;
}

std::string Report::to_tsv() const {
  std::string out;
  out += "# tool: " + tool + " " + version + "\n";
  out += "# workspace_id: " + workspace_id + "\n";
  out += "# command: " + command + "\n";
  out += "# parameters: " + parameters.dump() + "\n";
  out += "# generated_at: " + generated_at + "\n";
  for (const Table& t : tables) {
    out += "\n# table: " + t.name + "\n";
    for (std::size_t i = 0; i < t.columns.size(); ++i) out += (i ? "\t" : "") + t.columns[i];
    out += "\n";
    for (const auto& row : t.rows) {
      for (std::size_t i = 0; i < row.size(); ++i) {
        if (i) out += '\t';
        out += tsv_cell(row[i]);
      }
      out += "\n";
    }
  }
  return out;
}

}  // namespace annotrace
