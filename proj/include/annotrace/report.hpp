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

// Report envelope and its TSV / JSON renderings.
//
// TSV output starts with "# key: value" envelope lines, then one block per
// table: a "# table: <name>" line, the column header and the rows, with a
// blank line between tables.  JSON output is a single object whose
// "payload" maps table names to arrays of row objects, unless the report
// carries its own payload (chart series).

#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace annotrace {

using ordered_json = nlohmann::ordered_json;

std::string_view version();

struct Table {
  std::string name;
  std::vector<std::string> columns;
  std::vector<std::vector<ordered_json>> rows;  // cells parallel to columns

  void add(std::vector<ordered_json> row);
};

struct Report {
  std::string tool = "annotrace";
  std::string version;
  std::string workspace_id;
  std::string command;
  ordered_json parameters = ordered_json::object();
  std::string generated_at;  // UTC, ISO 8601
  std::vector<Table> tables;
  std::optional<ordered_json> payload;  // replaces the table payload in JSON

  /// Envelope with the current time (or SOURCE_DATE_EPOCH when set).
  static Report make(std::string command, std::string workspace_id);

  ordered_json payload_json() const;
  std::string to_json() const;
  std::string to_tsv() const;
};

/// Cell as printed in TSV: strings verbatim with tabs and newlines escaped,
/// floating point with two decimals, null as empty.
std::string tsv_cell(const ordered_json& cell);

}  // namespace annotrace
