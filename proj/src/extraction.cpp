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

#include "annotrace/extraction.hpp"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdio>
#include <unordered_set>

#include "annotrace/errors.hpp"
#include "annotrace/unicode.hpp"

namespace annotrace {

namespace {

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\f' || c == '\v'; }

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

std::string upper_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 32);
  }
  return out;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c + 32);
  }
  return out;
}

// Trims Unicode whitespace from both ends.
std::string_view trim_unicode(std::string_view s) {
  std::size_t begin = 0;
  while (begin < s.size()) {
    std::size_t pos = begin;
    char32_t cp = 0;
    if (unicode::decode(s, pos, cp) != unicode::DecodeStatus::kOk || !unicode::is_whitespace(cp)) break;
    begin = pos;
  }
  std::size_t end = s.size();
  while (end > begin) {
    std::size_t start = end - 1;
    while (start > begin && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80) --start;
    std::size_t pos = start;
    char32_t cp = 0;
    if (unicode::decode(s, pos, cp) != unicode::DecodeStatus::kOk || pos != end ||
        !unicode::is_whitespace(cp)) {
      break;
    }
    end = start;
  }
  return s.substr(begin, end - begin);
}

bool has_line_prefix(std::string_view line, std::string_view prefix) {
  return line.size() >= prefix.size() && line.substr(0, prefix.size()) == prefix &&
         (line.size() == prefix.size() || is_space(line[prefix.size()]));
}

// ---------------------------------------------------------------------------
// Entity decoding and tag handling for xml-abstract.

void append_entity(std::string& out, std::string_view entity) {
  // `entity` excludes '&' and ';'.
  if (entity == "amp") return out.push_back('&');
  if (entity == "lt") return out.push_back('<');
  if (entity == "gt") return out.push_back('>');
  if (entity == "quot") return out.push_back('"');
  if (entity == "apos") return out.push_back('\'');
  if (entity.size() > 1 && entity[0] == '#') {
    unsigned long value = 0;
    bool ok = true;
    if (entity[1] == 'x' || entity[1] == 'X') {
      ok = entity.size() > 2;
      for (char c : entity.substr(2)) {
        int d = (c >= '0' && c <= '9') ? c - '0'
                : (c >= 'a' && c <= 'f') ? c - 'a' + 10
                : (c >= 'A' && c <= 'F') ? c - 'A' + 10
                                         : -1;
        if (d < 0 || value > 0x10FFFF) ok = false;
        value = value * 16 + static_cast<unsigned long>(d < 0 ? 0 : d);
      }
    } else {
      for (char c : entity.substr(1)) {
        if (c < '0' || c > '9' || value > 0x10FFFF) ok = false;
        value = value * 10 + static_cast<unsigned long>(c >= '0' && c <= '9' ? c - '0' : 0);
      }
    }
    if (ok && value > 0 && value <= 0x10FFFF && !(value >= 0xD800 && value <= 0xDFFF)) {
      unicode::append_utf8(out, static_cast<char32_t>(value));
      return;
    }
  }
  out.push_back('&');
  out.append(entity);
  out.push_back(';');
}

std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] == '&') {
      const auto semi = s.find(';', i + 1);
      if (semi != std::string_view::npos && semi - i <= 12) {
        append_entity(out, s.substr(i + 1, semi - i - 1));
        i = semi + 1;
        continue;
      }
    }
    out.push_back(s[i++]);
  }
  return out;
}

bool is_block_tag(std::string_view name) {
  static const std::array<std::string_view, 19> kBlock = {
      "p", "br", "li", "ul", "ol", "div", "table", "tr", "td", "th", "h1", "h2", "h3", "h4",
      "h5", "h6", "pre", "blockquote", "dd"};
  const std::string lower = lower_ascii(name);
  return std::find(kBlock.begin(), kBlock.end(), lower) != kBlock.end();
}

struct Tag {
  enum class Kind { kStart, kEnd, kEmpty, kOther };
  Kind kind = Kind::kOther;
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;

  const std::string* attribute(std::string_view key) const {
    for (const auto& [k, v] : attributes) {
      if (k == key) return &v;
    }
    return nullptr;
  }
};

// Parses a complete tag token "<...>".
Tag parse_tag(std::string_view token) {
  Tag tag;
  std::string_view body = token.substr(1, token.size() - 2);
  if (body.empty() || body[0] == '!' || body[0] == '?') return tag;
  if (body[0] == '/') {
    tag.kind = Tag::Kind::kEnd;
    tag.name = std::string(trim(body.substr(1)));
    return tag;
  }
  tag.kind = Tag::Kind::kStart;
  if (body.back() == '/') {
    tag.kind = Tag::Kind::kEmpty;
    body.remove_suffix(1);
  }
  std::size_t i = 0;
  while (i < body.size() && !is_space(body[i])) ++i;
  tag.name = std::string(body.substr(0, i));
  while (i < body.size()) {
    while (i < body.size() && is_space(body[i])) ++i;
    const std::size_t key_start = i;
    while (i < body.size() && body[i] != '=' && !is_space(body[i])) ++i;
    std::string key(body.substr(key_start, i - key_start));
    while (i < body.size() && is_space(body[i])) ++i;
    if (i >= body.size() || body[i] != '=') {
      if (!key.empty()) tag.attributes.emplace_back(std::move(key), std::string());
      continue;
    }
    ++i;
    while (i < body.size() && is_space(body[i])) ++i;
    if (i >= body.size()) break;
    std::string value;
    if (body[i] == '"' || body[i] == '\'') {
      const char quote = body[i++];
      const std::size_t end = body.find(quote, i);
      const std::size_t stop = end == std::string_view::npos ? body.size() : end;
      value = decode_entities(body.substr(i, stop - i));
      i = stop + 1;
    } else {
      const std::size_t start = i;
      while (i < body.size() && !is_space(body[i])) ++i;
      value = decode_entities(body.substr(start, i - start));
    }
    tag.attributes.emplace_back(std::move(key), std::move(value));
  }
  return tag;
}

enum class MarkupKind { kTag, kComment, kCData, kDeclaration, kIncomplete };

// Finds the end of the markup token starting at `s[start] == '<'`.  Returns
// the index one past the token.  kIncomplete when more input is needed.
MarkupKind scan_markup(std::string_view s, std::size_t start, std::size_t& end, bool final) {
  const std::string_view rest = s.substr(start);
  auto could_be = [&](std::string_view opener) {
    return rest.size() < opener.size() && opener.substr(0, rest.size()) == rest;
  };
  if (!final && (could_be("<!--") || could_be("<![CDATA["))) return MarkupKind::kIncomplete;
  auto find_close = [&](std::string_view closer, MarkupKind kind) {
    const auto pos = rest.find(closer);
    if (pos == std::string_view::npos) return MarkupKind::kIncomplete;
    end = start + pos + closer.size();
    return kind;
  };
  if (rest.starts_with("<!--")) return find_close("-->", MarkupKind::kComment);
  if (rest.starts_with("<![CDATA[")) return find_close("]]>", MarkupKind::kCData);
  if (rest.starts_with("<?")) return find_close("?>", MarkupKind::kDeclaration);
  const bool declaration = rest.starts_with("<!");
  char quote = 0;
  int brackets = 0;
  for (std::size_t i = 1; i < rest.size(); ++i) {
    const char c = rest[i];
    if (quote) {
      if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (declaration && c == '[') {
      ++brackets;
    } else if (declaration && c == ']') {
      --brackets;
    } else if (c == '>' && brackets <= 0) {
      end = start + i + 1;
      return declaration ? MarkupKind::kDeclaration : MarkupKind::kTag;
    }
  }
  return MarkupKind::kIncomplete;
}

std::string strip_xml(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  std::size_t i = 0;
  while (i < raw.size()) {
    const auto lt = raw.find('<', i);
    const std::size_t text_end = lt == std::string_view::npos ? raw.size() : lt;
    out += decode_entities(raw.substr(i, text_end - i));
    if (lt == std::string_view::npos) break;
    std::size_t end = 0;
    switch (scan_markup(raw, lt, end, true)) {
      case MarkupKind::kIncomplete:
        out += decode_entities(raw.substr(lt));
        i = raw.size();
        continue;
      case MarkupKind::kCData:
        out.append(raw.substr(lt + 9, end - lt - 12));
        break;
      case MarkupKind::kTag:
        if (is_block_tag(parse_tag(raw.substr(lt, end - lt)).name)) out.push_back(' ');
        break;
      case MarkupKind::kComment:
      case MarkupKind::kDeclaration:
        break;
    }
    i = end;
  }
  return std::string(trim(out));
}

std::string strip_lines(std::string_view raw, std::string_view prefix, bool sigils) {
  std::string out;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    auto nl = raw.find('\n', pos);
    if (nl == std::string_view::npos) nl = raw.size();
    std::string_view line = raw.substr(pos, nl - pos);
    pos = nl + 1;
    if (!prefix.empty() && has_line_prefix(line, prefix)) line.remove_prefix(prefix.size());
    line = trim(line);
    if (sigils && line.starts_with("-!-")) line = trim(line.substr(3));
    if (line.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out.append(line);
  }
  return out;
}

}  // namespace

std::string_view to_string(FormatKind kind) {
  switch (kind) {
    case FormatKind::kLinePrefixedFlat: return "line-prefixed-flat";
    case FormatKind::kXmlAbstract: return "xml-abstract";
    case FormatKind::kKeyedBlock: return "keyed-block";
    case FormatKind::kGenericTsv: return "generic-tsv";
  }
  return "unknown";
}

FormatKind parse_format_kind(std::string_view name) {
  for (auto kind : {FormatKind::kLinePrefixedFlat, FormatKind::kXmlAbstract, FormatKind::kKeyedBlock,
                    FormatKind::kGenericTsv}) {
    if (to_string(kind) == name) return kind;
  }
  throw InvalidInput("unknown format '" + std::string(name) +
                     "' (expected line-prefixed-flat, xml-abstract, keyed-block or generic-tsv)");
}

TopicFilter::TopicFilter(const std::vector<std::string>& topics) {
  for (const auto& t : topics) topics_.insert(upper_ascii(trim(t)));
}

bool TopicFilter::accepts(std::string_view topic) const {
  return topics_.empty() || topics_.contains(upper_ascii(trim(topic)));
}

std::string strip_markup(std::string_view raw, FormatKind format, const FormatOptions& options) {
  switch (format) {
    case FormatKind::kLinePrefixedFlat: return strip_lines(raw, options.line_prefix, true);
    case FormatKind::kXmlAbstract: return strip_xml(raw);
    case FormatKind::kKeyedBlock: return strip_lines(raw, {}, false);
    case FormatKind::kGenericTsv: return std::string(raw);
  }
  return std::string(raw);
}

// ---------------------------------------------------------------------------
// Sentence splitting.

namespace {

bool is_terminator(char32_t cp) { return cp == '.' || cp == '!' || cp == '?'; }

bool is_closer(char32_t cp) {
  return cp == ')' || cp == ']' || cp == '"' || cp == '\'' || cp == 0x2019 || cp == 0x201D || cp == 0xBB;
}

bool is_opener(char c) { return c == '(' || c == '[' || c == '"' || c == '\''; }

// Token ending at `dot` (inclusive), back to the previous whitespace.
std::string_view token_before(std::string_view text, std::size_t dot, std::size_t floor) {
  std::size_t start = dot;
  while (start > floor && !is_space(text[start - 1])) --start;
  std::string_view token = text.substr(start, dot + 1 - start);
  while (token.size() > 1 && is_opener(token.front())) token.remove_prefix(1);
  return token;
}

bool is_protected_period(std::string_view text, std::size_t dot, std::size_t floor) {
  const std::string token = lower_ascii(token_before(text, dot, floor));
  static const std::array<std::string_view, 5> kAbbreviations = {"e.g.", "i.e.", "cf.", "sp.", "approx."};
  if (std::find(kAbbreviations.begin(), kAbbreviations.end(), token) != kAbbreviations.end()) return true;

  if (token == "al.") {
    std::size_t before = dot + 1 - token.size();
    while (before > floor && is_space(text[before - 1])) --before;
    if (before >= floor + 2 && lower_ascii(text.substr(before - 2, 2)) == "et" &&
        (before - 2 == floor || is_space(text[before - 3]) || is_opener(text[before - 3]))) {
      return true;
    }
  }

  // Single letter followed by the period: initials, "E. coli".
  const std::string_view stem(token.data(), token.size() - 1);
  std::size_t pos = 0;
  char32_t cp = 0;
  if (!stem.empty() && unicode::decode(stem, pos, cp) == unicode::DecodeStatus::kOk && pos == stem.size() &&
      unicode::is_letter(cp)) {
    return true;
  }
  return false;
}

}  // namespace

std::vector<std::string> split_sentences(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  std::size_t pos = 0;
  auto emit = [&](std::size_t end) {
    const auto piece = trim_unicode(text.substr(start, end - start));
    if (!piece.empty()) out.emplace_back(piece);
    start = end;
  };
  while (pos < text.size()) {
    const std::size_t here = pos;
    char32_t cp = 0;
    unicode::decode(text, pos, cp);
    if (!is_terminator(cp)) continue;

    // Extend over a run of terminators and closing punctuation.
    std::size_t end = pos;
    bool single_period = cp == '.';
    while (end < text.size()) {
      std::size_t next = end;
      char32_t c2 = 0;
      unicode::decode(text, next, c2);
      if (is_terminator(c2)) {
        single_period = false;
      } else if (!is_closer(c2)) {
        break;
      }
      end = next;
    }
    bool boundary = end == text.size();
    if (!boundary) {
      std::size_t next = end;
      char32_t c2 = 0;
      unicode::decode(text, next, c2);
      boundary = unicode::is_whitespace(c2);
    }
    if (boundary && single_period && end == pos && is_protected_period(text, here, start)) boundary = false;
    if (boundary) emit(end);
    pos = end;
  }
  emit(text.size());
  return out;
}

// ---------------------------------------------------------------------------
// Parsers.

class ReleaseParser::Impl {
 public:
  Impl(DatabaseId database, FormatOptions options, RecordSink sink)
      : database_(std::move(database)), options_(std::move(options)), sink_(std::move(sink)) {}
  virtual ~Impl() = default;

  void feed(std::string_view bytes) {
    summary_.bytes_read += bytes.size();
    decoded_.clear();
    sanitizer_.feed(bytes, decoded_);
    consume(decoded_, false);
  }

  void finish() {
    decoded_.clear();
    sanitizer_.finish(decoded_);
    consume(decoded_, true);
    summary_.replacement_chars = sanitizer_.replacements();
  }

  ParseSummary summary_;

 protected:
  virtual void consume(std::string_view text, bool final) = 0;

  void emit(std::string accession, std::vector<std::string> blocks, std::vector<std::string> topics,
            bool damaged) {
    if (damaged) {
      ++summary_.damaged_records;
      return;
    }
    try {
      validate_accession(accession);
    } catch (const InvalidInput&) {
      ++summary_.damaged_records;
      return;
    }
    ++summary_.records;
    sink_(RawRecordText{RecordId(database_, std::move(accession)), std::move(blocks), std::move(topics)});
  }

  DatabaseId database_;
  FormatOptions options_;

 private:
  RecordSink sink_;
  unicode::Utf8Sanitizer sanitizer_;
  std::string decoded_;
};

namespace {

// Splits decoded text into lines ("\r\n" tolerated) and hands them on with
// the offset of the line start.
class LineParser : public ReleaseParser::Impl {
 public:
  using Impl::Impl;

 protected:
  virtual void on_line(std::string_view line, std::uint64_t offset) = 0;
  virtual void on_end(std::uint64_t offset) = 0;

  void consume(std::string_view text, bool final) override {
    std::size_t pos = 0;
    while (true) {
      const auto nl = text.find('\n', pos);
      if (nl == std::string_view::npos) break;
      std::string_view piece = text.substr(pos, nl - pos);
      if (!partial_.empty()) {
        partial_.append(piece);
        line(partial_);
        partial_.clear();
      } else {
        line(piece);
      }
      pos = nl + 1;
    }
    partial_.append(text.substr(pos));
    if (final) {
      if (!partial_.empty()) {
        const std::string last = std::move(partial_);
        partial_.clear();
        line(last);
      }
      on_end(offset_);
    }
  }

 private:
  void line(std::string_view l) {
    const std::uint64_t at = offset_;
    offset_ += l.size() + 1;
    if (!l.empty() && l.back() == '\r') l.remove_suffix(1);
    on_line(l, at);
  }

  std::string partial_;
  std::uint64_t offset_ = 0;
};

class FlatParser final : public LineParser {
 public:
  using LineParser::LineParser;

 private:
  void on_line(std::string_view line, std::uint64_t offset) override {
    if (line.starts_with("//")) {
      if (in_record_) {
        close_block();
        emit(std::move(accession_), std::move(blocks_), std::move(topics_), damaged_);
        reset();
      }
      return;
    }
    if (has_line_prefix(line, "ID")) {
      if (in_record_) {
        // Missing terminator: the open record is lost, the new one proceeds.
        emit(std::move(accession_), {}, {}, true);
        reset();
      }
      in_record_ = true;
      record_offset_ = offset;
      std::string_view rest = trim(line.substr(2));
      const auto token_end = rest.find_first_of(" \t");
      std::string_view token = rest.substr(0, token_end);
      if (!token.empty() && token.back() == ';') token.remove_suffix(1);
      accession_ = std::string(token);
      damaged_ = accession_.empty();
      return;
    }
    if (!in_record_) return;
    if (!has_line_prefix(line, options_.line_prefix)) {
      close_block();
      in_copyright_ = false;
      return;
    }
    const std::string_view content = trim(line.substr(options_.line_prefix.size()));
    if (content.starts_with("-!-")) {
      close_block();
      in_copyright_ = false;
      block_open_ = true;
      block_has_sigil_ = true;
      raw_block_.assign(line);
      return;
    }
    if (content.size() >= 3 && content.find_first_not_of('-') == std::string_view::npos) {
      close_block();
      in_copyright_ = true;
      return;
    }
    if (in_copyright_) return;
    if (!block_open_) {
      block_open_ = true;
      block_has_sigil_ = false;
      raw_block_.assign(line);
      return;
    }
    raw_block_.push_back('\n');
    raw_block_.append(line);
  }

  void on_end(std::uint64_t) override {
    if (in_record_) {
      throw ParseError("unterminated record '" + accession_ + "' (missing '//')", record_offset_);
    }
  }

  void close_block() {
    if (!block_open_) return;
    block_open_ = false;
    std::string text = strip_markup(raw_block_, FormatKind::kLinePrefixedFlat, options_);
    raw_block_.clear();
    if (text.empty()) return;
    std::string topic;
    if (block_has_sigil_) {
      const auto colon = text.find(':');
      if (colon != std::string::npos) topic = std::string(trim(std::string_view(text).substr(0, colon)));
    }
    blocks_.push_back(std::move(text));
    topics_.push_back(std::move(topic));
  }

  void reset() {
    in_record_ = false;
    damaged_ = false;
    block_open_ = false;
    in_copyright_ = false;
    accession_.clear();
    blocks_.clear();
    topics_.clear();
    raw_block_.clear();
  }

  bool in_record_ = false;
  bool damaged_ = false;
  bool block_open_ = false;
  bool in_copyright_ = false;
  bool block_has_sigil_ = false;
  std::uint64_t record_offset_ = 0;
  std::string accession_;
  std::string raw_block_;
  std::vector<std::string> blocks_;
  std::vector<std::string> topics_;
};


class XmlParser final : public ReleaseParser::Impl {
 public:
  using Impl::Impl;

 private:
  void consume(std::string_view text, bool final) override {
    buf_.append(text);
    std::size_t pos = 0;
    while (pos < buf_.size()) {
      const auto lt = buf_.find('<', pos);
      const std::size_t text_end = lt == std::string::npos ? buf_.size() : lt;
      if (capturing_) capture_.append(buf_, pos, text_end - pos);
      if (lt == std::string::npos) {
        pos = buf_.size();
        break;
      }
      std::size_t end = 0;
      const MarkupKind kind = scan_markup(buf_, lt, end, final);
      if (kind == MarkupKind::kIncomplete) {
        if (final) {
          if (in_record_) throw ParseError("unterminated markup inside record '" + accession_ + "'", base_ + lt);
          pos = buf_.size();
        } else {
          pos = lt;
        }
        break;
      }
      handle(kind, std::string_view(buf_).substr(lt, end - lt));
      if (in_record_ && record_offset_ == kUnset) record_offset_ = base_ + lt;
      pos = end;
    }
    base_ += pos;
    buf_.erase(0, pos);
    if (final && in_record_) {
      throw ParseError("unterminated record '" + accession_ + "' (missing </" + options_.record_element + ">)",
                       record_offset_);
    }
  }

  void handle(MarkupKind kind, std::string_view token) {
    if (capturing_) {
      if (kind == MarkupKind::kTag) {
        const Tag tag = parse_tag(token);
        if (tag.name == capture_name_) {
          if (tag.kind == Tag::Kind::kStart) {
            ++capture_depth_;
          } else if (tag.kind == Tag::Kind::kEnd) {
            if (capture_depth_ == 0) {
              close_capture();
              return;
            }
            --capture_depth_;
          }
        }
      }
      capture_.append(token);
      return;
    }
    if (kind != MarkupKind::kTag) return;
    const Tag tag = parse_tag(token);
    if (!in_record_) {
      if (tag.name != options_.record_element) return;
      if (tag.kind != Tag::Kind::kStart && tag.kind != Tag::Kind::kEmpty) return;
      const std::string* id = tag.attribute(options_.id_attribute);
      accession_ = id ? *id : std::string();
      damaged_ = accession_.empty();
      if (tag.kind == Tag::Kind::kEmpty) {
        emit(std::move(accession_), {}, {}, damaged_);
        reset();
        return;
      }
      in_record_ = true;
      record_offset_ = kUnset;
      record_depth_ = 0;
      return;
    }
    if (tag.name == options_.record_element) {
      if (tag.kind == Tag::Kind::kStart) {
        ++record_depth_;
      } else if (tag.kind == Tag::Kind::kEnd) {
        if (record_depth_ == 0) {
          emit(std::move(accession_), std::move(blocks_), std::move(topics_), damaged_);
          reset();
        } else {
          --record_depth_;
        }
      }
      return;
    }
    if (tag.kind == Tag::Kind::kStart &&
        std::find(options_.annotation_elements.begin(), options_.annotation_elements.end(), tag.name) !=
            options_.annotation_elements.end()) {
      capturing_ = true;
      capture_name_ = tag.name;
      capture_depth_ = 0;
      capture_.clear();
    }
  }

  void close_capture() {
    capturing_ = false;
    std::string text = strip_markup(capture_, FormatKind::kXmlAbstract, options_);
    capture_.clear();
    if (text.empty()) return;
    blocks_.push_back(std::move(text));
    topics_.push_back(capture_name_);
  }

  void reset() {
    in_record_ = false;
    damaged_ = false;
    capturing_ = false;
    accession_.clear();
    blocks_.clear();
    topics_.clear();
    capture_.clear();
  }

  static constexpr std::uint64_t kUnset = ~std::uint64_t{0};

  std::string buf_;
  std::uint64_t base_ = 0;
  bool in_record_ = false;
  bool damaged_ = false;
  bool capturing_ = false;
  int record_depth_ = 0;
  int capture_depth_ = 0;
  std::uint64_t record_offset_ = kUnset;
  std::string accession_;
  std::string capture_name_;
  std::string capture_;
  std::vector<std::string> blocks_;
  std::vector<std::string> topics_;
};

class KeyedBlockParser final : public LineParser {
 public:
  using LineParser::LineParser;

 private:
  void on_line(std::string_view line, std::uint64_t offset) override {
    const std::string_view t = trim(line);
    if (!in_block_) {
      if (t == "{BEGIN}") {
        in_block_ = true;
        damaged_ = pending_id_.empty();
        block_offset_ = offset;
      } else if (t.size() >= 2 && t.front() == '{' && t.back() == '}' && t != "{END}" && pending_id_.empty()) {
        std::string_view inner = t.substr(1, t.size() - 2);
        inner = trim(inner.substr(0, inner.find(';')));
        pending_id_ = std::string(inner);
      }
      return;
    }
    if (t == "{END}") {
      flush_paragraph();
      std::vector<std::string> topics(blocks_.size());
      emit(std::move(pending_id_), std::move(blocks_), std::move(topics), damaged_);
      pending_id_.clear();
      blocks_.clear();
      in_block_ = false;
      return;
    }
    if (t == "{BEGIN}") {
      damaged_ = true;
      return;
    }
    if (t.empty()) {
      flush_paragraph();
      return;
    }
    paragraph_.append(line);
    paragraph_.push_back('\n');
  }

  void on_end(std::uint64_t) override {
    if (in_block_) {
      throw ParseError("unterminated record '" + pending_id_ + "' (missing {END})", block_offset_);
    }
  }

  void flush_paragraph() {
    if (paragraph_.empty()) return;
    std::string text = strip_markup(paragraph_, FormatKind::kKeyedBlock, options_);
    paragraph_.clear();
    if (!text.empty()) blocks_.push_back(std::move(text));
  }

  bool in_block_ = false;
  bool damaged_ = false;
  std::uint64_t block_offset_ = 0;
  std::string pending_id_;
  std::string paragraph_;
  std::vector<std::string> blocks_;
};

class TsvParser final : public LineParser {
 public:
  using LineParser::LineParser;

 private:
  void on_line(std::string_view line, std::uint64_t) override {
    if (trim(line).empty()) return;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab == 0) {
      flush();
      ++summary_.damaged_records;
      return;
    }
    const std::string_view accession = line.substr(0, tab);
    if (has_pending_ && accession != accession_) flush();
    if (!has_pending_) {
      accession_ = std::string(accession);
      has_pending_ = true;
    }
    blocks_.push_back(strip_markup(line.substr(tab + 1), FormatKind::kGenericTsv, options_));
  }

  void on_end(std::uint64_t) override { flush(); }

  void flush() {
    if (!has_pending_) return;
    std::vector<std::string> topics(blocks_.size());
    emit(std::move(accession_), std::move(blocks_), std::move(topics), false);
    accession_.clear();
    blocks_.clear();
    has_pending_ = false;
  }

  bool has_pending_ = false;
  std::string accession_;
  std::vector<std::string> blocks_;
};

}  // namespace

ReleaseParser::ReleaseParser(FormatKind format, DatabaseId database, FormatOptions options, RecordSink sink) {
  switch (format) {
    case FormatKind::kLinePrefixedFlat:
      impl_ = std::make_unique<FlatParser>(std::move(database), std::move(options), std::move(sink));
      break;
    case FormatKind::kXmlAbstract:
      impl_ = std::make_unique<XmlParser>(std::move(database), std::move(options), std::move(sink));
      break;
    case FormatKind::kKeyedBlock:
      impl_ = std::make_unique<KeyedBlockParser>(std::move(database), std::move(options), std::move(sink));
      break;
    case FormatKind::kGenericTsv:
      impl_ = std::make_unique<TsvParser>(std::move(database), std::move(options), std::move(sink));
      break;
  }
}

ReleaseParser::~ReleaseParser() = default;

void ReleaseParser::feed(std::string_view bytes) { impl_->feed(bytes); }
void ReleaseParser::finish() { impl_->finish(); }
const ParseSummary& ReleaseParser::summary() const { return impl_->summary_; }

// ---------------------------------------------------------------------------

InputFile::InputFile(const std::filesystem::path& path) : path_(path) {
  std::FILE* probe = std::fopen(path.c_str(), "rb");
  if (!probe) throw NotFound("cannot open release file '" + path.string() + "'");
  unsigned char magic[2] = {0, 0};
  const std::size_t got = std::fread(magic, 1, 2, probe);
  compressed_ = got == 2 && magic[0] == 0x1F && magic[1] == 0x8B;
  if (!compressed_) {
    std::rewind(probe);
    handle_ = probe;
    return;
  }
  std::fclose(probe);
  gzFile gz = gzopen(path.c_str(), "rb");
  if (!gz) throw NotFound("cannot open compressed release file '" + path.string() + "'");
  gzbuffer(gz, 1 << 17);
  handle_ = gz;
}

InputFile::~InputFile() {
  if (!handle_) return;
  if (compressed_) {
    gzclose(static_cast<gzFile>(handle_));
  } else {
    std::fclose(static_cast<std::FILE*>(handle_));
  }
}

std::size_t InputFile::read(char* buf, std::size_t size) {
  if (compressed_) {
    const int n = gzread(static_cast<gzFile>(handle_), buf, static_cast<unsigned>(size));
    int code = Z_OK;
    const char* msg = gzerror(static_cast<gzFile>(handle_), &code);
    // A truncated stream returns its last bytes with Z_BUF_ERROR set.
    if (n < 0 || (code != Z_OK && code != Z_STREAM_END)) {
      throw ParseError("gzip error in '" + path_.string() + "': " + (msg ? msg : "unknown"), 0);
    }
    return static_cast<std::size_t>(n);
  }
  const std::size_t n = std::fread(buf, 1, size, static_cast<std::FILE*>(handle_));
  if (n == 0 && std::ferror(static_cast<std::FILE*>(handle_))) {
    throw Error("read error in '" + path_.string() + "'");
  }
  return n;
}

namespace {

template <typename Feeder>
ParseSummary run_parser(FormatKind format, const ReleaseVersion& release, const FormatOptions& options,
                        const ReleaseParser::RecordSink& sink, Feeder&& feeder) {
  ReleaseParser parser(format, release.database, options, sink);
  feeder(parser);
  parser.finish();
  return parser.summary();
}

void feed_file(ReleaseParser& parser, InputFile& input) {
  std::vector<char> buf(1 << 16);
  while (true) {
    const std::size_t n = input.read(buf.data(), buf.size());
    if (n == 0) break;
    parser.feed(std::string_view(buf.data(), n));
  }
}

class SentenceExtractor {
 public:
  SentenceExtractor(FormatKind format, const TopicFilter& topics, const SentenceSink& sink, ExtractSummary& summary)
      : format_(format), topics_(topics), sink_(sink), summary_(summary) {}

  void operator()(RawRecordText&& record) {
    seen_.clear();
    for (std::size_t i = 0; i < record.blocks.size(); ++i) {
      std::string_view text = record.blocks[i];
      const std::string_view topic = i < record.topics.size() ? std::string_view(record.topics[i]) : "";
      if (format_ == FormatKind::kLinePrefixedFlat) {
        if (!topics_.accepts(topic)) continue;
        if (!topic.empty()) text = text.substr(text.find(':') + 1);
      }
      const auto sentences = split_sentences(text);
      if (sentences.empty()) ++summary_.empty_dropped;
      for (const auto& raw : sentences) {
        auto sentence = normalize(raw);
        if (!sentence) {
          ++summary_.empty_dropped;
          continue;
        }
        if (!seen_.insert(sentence->fingerprint()).second) {
          ++summary_.duplicates_in_record;
          continue;
        }
        ++summary_.sentences;
        sink_(record.record, *sentence);
      }
    }
  }

 private:
  FormatKind format_;
  const TopicFilter& topics_;
  const SentenceSink& sink_;
  ExtractSummary& summary_;
  std::unordered_set<Fingerprint, FingerprintHash> seen_;
};

}  // namespace

ParseSummary parse_release(std::string_view input, FormatKind format, const ReleaseVersion& release,
                           const FormatOptions& options, const ReleaseParser::RecordSink& sink) {
  return run_parser(format, release, options, sink, [&](ReleaseParser& p) { p.feed(input); });
}

ParseSummary parse_release(InputFile& input, FormatKind format, const ReleaseVersion& release,
                           const FormatOptions& options, const ReleaseParser::RecordSink& sink) {
  return run_parser(format, release, options, sink, [&](ReleaseParser& p) { feed_file(p, input); });
}

ExtractSummary extract_release(std::string_view input, FormatKind format, const ReleaseVersion& release,
                               const FormatOptions& options, const TopicFilter& topics,
                               const SentenceSink& sink) {
  ExtractSummary summary;
  SentenceExtractor extractor(format, topics, sink, summary);
  summary.parse = parse_release(input, format, release, options, std::ref(extractor));
  return summary;
}

ExtractSummary extract_release(InputFile& input, FormatKind format, const ReleaseVersion& release,
                               const FormatOptions& options, const TopicFilter& topics,
                               const SentenceSink& sink) {
  ExtractSummary summary;
  SentenceExtractor extractor(format, topics, sink, summary);
  summary.parse = parse_release(input, format, release, options, std::ref(extractor));
  return summary;
}

}  // namespace annotrace
