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

// Release file parsing and sentence extraction.
//
// Four grammars are understood:
//
//   line-prefixed-flat  Swiss-Prot style.  "ID" opens a record (first token
//                       is the accession), "//" closes it.  Annotation lines
//                       carry a two-letter prefix ("CC" by default); topics
//                       start with "-!- TOPIC:" and continuation lines join
//                       with one space.
//   xml-abstract        Records are <interpro id="..."> elements; the text of
//                       the <abstract> child, tags removed, is the annotation.
//   keyed-block         PROSITE documentation style.  A braced id line such as
//                       "{PDOC00001}" precedes "{BEGIN}" ... "{END}"; every
//                       enclosed paragraph is annotation.
//   generic-tsv         "accession<TAB>text" per line.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "annotrace/corpus.hpp"

namespace annotrace {

enum class FormatKind { kLinePrefixedFlat, kXmlAbstract, kKeyedBlock, kGenericTsv };

std::string_view to_string(FormatKind kind);
/// Accepts the hyphenated names used in manifests, e.g. "xml-abstract".
FormatKind parse_format_kind(std::string_view name);

struct FormatOptions {
  std::string line_prefix = "CC";
  std::string record_element = "interpro";
  std::string id_attribute = "id";
  std::vector<std::string> annotation_elements = {"abstract"};
};

/// Selects which line-prefixed-flat topics count as textual annotation.
/// Topic names compare case-insensitively; an empty filter accepts all.
/// Other formats ignore the filter.
class TopicFilter {
 public:
  TopicFilter() = default;
  explicit TopicFilter(const std::vector<std::string>& topics);

  bool accepts(std::string_view topic) const;
  bool empty() const { return topics_.empty(); }
  std::vector<std::string> topics() const { return {topics_.begin(), topics_.end()}; }

 private:
  std::set<std::string> topics_;
};

/// Plain text of one record.  `topics[i]` names the topic of `blocks[i]`
/// (empty when the format has none); flat blocks keep their "TOPIC:" lead.
struct RawRecordText {
  RecordId record;
  std::vector<std::string> blocks;
  std::vector<std::string> topics;
};

struct ParseSummary {
  std::uint64_t records = 0;
  std::uint64_t damaged_records = 0;
  std::uint64_t bytes_read = 0;
  std::uint64_t replacement_chars = 0;
};

/// Push parser over a release file.  Bytes may be fed in arbitrary chunks;
/// the record stream does not depend on where the chunks are cut.
class ReleaseParser {
 public:
  using RecordSink = std::function<void(RawRecordText&&)>;

  ReleaseParser(FormatKind format, DatabaseId database, FormatOptions options, RecordSink sink);
  ~ReleaseParser();
  ReleaseParser(const ReleaseParser&) = delete;
  ReleaseParser& operator=(const ReleaseParser&) = delete;

  void feed(std::string_view bytes);
  /// Signals end of input.  Throws ParseError on an unterminated record.
  void finish();

  const ParseSummary& summary() const;

  class Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

/// Sequential reader over a release file, transparently gunzipping when
/// the file starts with the gzip magic bytes.
class InputFile {
 public:
  explicit InputFile(const std::filesystem::path& path);
  ~InputFile();
  InputFile(const InputFile&) = delete;
  InputFile& operator=(const InputFile&) = delete;

  /// Returns 0 at end of file.
  std::size_t read(char* buf, std::size_t size);
  bool compressed() const { return compressed_; }

 private:
  std::filesystem::path path_;
  bool compressed_ = false;
  void* handle_ = nullptr;
};

ParseSummary parse_release(std::string_view input, FormatKind format, const ReleaseVersion& release,
                           const FormatOptions& options, const ReleaseParser::RecordSink& sink);
ParseSummary parse_release(InputFile& input, FormatKind format, const ReleaseVersion& release,
                           const FormatOptions& options, const ReleaseParser::RecordSink& sink);

/// Removes database-specific formatting from a record-body fragment: line
/// prefixes, "-!-" topic sigils, continuation line breaks, and tags (inner
/// text kept, entities decoded).
std::string strip_markup(std::string_view raw, FormatKind format, const FormatOptions& options = {});

/// Splits markup-free text at '.', '!' or '?' followed by whitespace or end
/// of text.  A period never ends a sentence after a single letter ("E.
/// coli") or after e.g., i.e., et al., cf., sp., approx.  Outputs are
/// trimmed; a trailing fragment without terminator is kept.
std::vector<std::string> split_sentences(std::string_view text);

struct ExtractSummary {
  ParseSummary parse;
  std::uint64_t sentences = 0;
  std::uint64_t empty_dropped = 0;
  std::uint64_t duplicates_in_record = 0;
};

using SentenceSink = std::function<void(const RecordId&, const NormalizedSentence&)>;

/// parse -> strip -> split -> normalize, with duplicate sentences inside
/// one record collapsed and flat topics filtered.
ExtractSummary extract_release(std::string_view input, FormatKind format, const ReleaseVersion& release,
                               const FormatOptions& options, const TopicFilter& topics,
                               const SentenceSink& sink);
ExtractSummary extract_release(InputFile& input, FormatKind format, const ReleaseVersion& release,
                               const FormatOptions& options, const TopicFilter& topics,
                               const SentenceSink& sink);

}  // namespace annotrace
