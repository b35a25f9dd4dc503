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

#include "annotrace/store.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <bit>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <json.hpp>
#include <numeric>
#include <queue>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "annotrace/errors.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace annotrace {

namespace {

static_assert(std::endian::native == std::endian::little, "run files are little-endian");

struct Row {
  Fingerprint fp;
  std::uint32_t record;
};
static_assert(sizeof(Row) == 20);

constexpr char kRunMagic[8] = {'A', 'N', 'T', 'R', 'R', 'U', 'N', '1'};
constexpr std::size_t kRunHeader = 32;
constexpr std::uint32_t kByRelease = 1;
constexpr std::uint32_t kBySentence = 2;

std::string sys_error(const std::string& what, const fs::path& p) {
  return what + " '" + p.string() + "': " + std::strerror(errno);
}

class Fd {
 public:
  explicit Fd(int fd = -1) : fd_(fd) {}
  Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Fd& operator=(Fd&& o) noexcept {
    if (this != &o) {
      reset();
      fd_ = std::exchange(o.fd_, -1);
    }
    return *this;
  }
  ~Fd() { reset(); }
  int get() const { return fd_; }
  void reset() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }

 private:
  int fd_;
};

// Exclusive advisory lock on <root>/.lock, released on destruction.
class WriterLock {
 public:
  explicit WriterLock(const fs::path& root) {
    const fs::path p = root / ".lock";
    fd_ = Fd(::open(p.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644));
    if (fd_.get() < 0) throw Error(sys_error("cannot open lock file", p));
    if (::flock(fd_.get(), LOCK_EX | LOCK_NB) != 0) {
      if (errno == EWOULDBLOCK) throw StateError("workspace '" + root.string() + "' is locked by another writer");
      throw Error(sys_error("cannot lock", p));
    }
  }

 private:
  Fd fd_;
};

// Read-only memory map of a sorted run file.
class RunFile {
 public:
  RunFile(const fs::path& p, std::uint32_t kind, std::uint64_t expected_rows) : path_(p) {
    Fd fd(::open(p.c_str(), O_RDONLY | O_CLOEXEC));
    if (fd.get() < 0) throw IntegrityError(sys_error("cannot open release index", p));
    struct stat st {};
    if (::fstat(fd.get(), &st) != 0) throw IntegrityError(sys_error("cannot stat", p));
    size_ = static_cast<std::size_t>(st.st_size);
    if (size_ < kRunHeader) throw IntegrityError("release index '" + p.string() + "' is truncated");
    void* m = ::mmap(nullptr, size_, PROT_READ, MAP_SHARED, fd.get(), 0);
    if (m == MAP_FAILED) throw Error(sys_error("cannot map", p));
    map_ = static_cast<const std::uint8_t*>(m);
    std::uint32_t k = 0;
    std::uint64_t rows = 0;
    std::memcpy(&k, map_ + 8, 4);
    std::memcpy(&rows, map_ + 16, 8);
    if (std::memcmp(map_, kRunMagic, 8) != 0 || k != kind) {
      unmap();
      throw IntegrityError("release index '" + p.string() + "' has a bad header");
    }
    if (rows != expected_rows || size_ != kRunHeader + rows * sizeof(Row)) {
      unmap();
      throw IntegrityError("release index '" + p.string() + "' has " + std::to_string(rows) +
                           " rows, registry expects " + std::to_string(expected_rows));
    }
    rows_ = std::span<const Row>(reinterpret_cast<const Row*>(map_ + kRunHeader), rows);
    ::madvise(m, size_, MADV_SEQUENTIAL);
  }
  RunFile(const RunFile&) = delete;
  RunFile& operator=(const RunFile&) = delete;
  ~RunFile() { unmap(); }

  std::span<const Row> rows() const { return rows_; }

 private:
  void unmap() {
    if (map_) ::munmap(const_cast<std::uint8_t*>(map_), size_);
    map_ = nullptr;
  }
  fs::path path_;
  const std::uint8_t* map_ = nullptr;
  std::size_t size_ = 0;
  std::span<const Row> rows_;
};

void write_run(const fs::path& p, std::uint32_t kind, const std::vector<Row>& rows) {
  std::FILE* f = std::fopen(p.c_str(), "wb");
  if (!f) throw Error(sys_error("cannot create", p));
  std::uint8_t header[kRunHeader] = {};
  std::memcpy(header, kRunMagic, 8);
  std::memcpy(header + 8, &kind, 4);
  const std::uint64_t n = rows.size();
  std::memcpy(header + 16, &n, 8);
  bool ok = std::fwrite(header, 1, kRunHeader, f) == kRunHeader;
  if (ok && !rows.empty()) ok = std::fwrite(rows.data(), sizeof(Row), rows.size(), f) == rows.size();
  ok = std::fflush(f) == 0 && ok;
  ok = ::fsync(::fileno(f)) == 0 && ok;
  ok = std::fclose(f) == 0 && ok;
  if (!ok) throw Error(sys_error("cannot write", p));
}

void write_file_atomic(const fs::path& p, const std::string& content) {
  const fs::path tmp = p.string() + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw Error(sys_error("cannot create", tmp));
  bool ok = std::fwrite(content.data(), 1, content.size(), f) == content.size();
  ok = std::fflush(f) == 0 && ok;
  ok = ::fsync(::fileno(f)) == 0 && ok;
  ok = std::fclose(f) == 0 && ok;
  if (!ok) {
    fs::remove(tmp);
    throw Error(sys_error("cannot write", tmp));
  }
  fs::rename(tmp, p);
}

std::string read_prefix(const fs::path& p, std::uint64_t bytes) {
  if (bytes == 0) return {};
  std::ifstream in(p, std::ios::binary);
  if (!in) throw IntegrityError("missing workspace file '" + p.string() + "'");
  std::string data(bytes, '\0');
  in.read(data.data(), static_cast<std::streamsize>(bytes));
  if (static_cast<std::uint64_t>(in.gcount()) != bytes) {
    throw IntegrityError("workspace file '" + p.string() + "' is shorter than committed");
  }
  return data;
}

// Drops bytes past the committed length left behind by an interrupted ingest.
void truncate_to(const fs::path& p, std::uint64_t bytes) {
  std::error_code ec;
  const auto size = fs::file_size(p, ec);
  if (ec) {
    if (bytes != 0) throw IntegrityError("missing workspace file '" + p.string() + "'");
    return;
  }
  if (size > bytes) fs::resize_file(p, bytes);
}

void append_bytes(const fs::path& p, const std::string& data) {
  if (data.empty()) return;
  std::FILE* f = std::fopen(p.c_str(), "ab");
  if (!f) throw Error(sys_error("cannot open", p));
  bool ok = std::fwrite(data.data(), 1, data.size(), f) == data.size();
  ok = std::fflush(f) == 0 && ok;
  ok = ::fsync(::fileno(f)) == 0 && ok;
  ok = std::fclose(f) == 0 && ok;
  if (!ok) throw Error(sys_error("cannot append to", p));
}

void put_u32(std::string& out, std::uint32_t v) { out.append(reinterpret_cast<const char*>(&v), 4); }

std::uint32_t get_u32(std::string_view in, std::size_t pos) {
  std::uint32_t v;
  std::memcpy(&v, in.data() + pos, 4);
  return v;
}

std::string random_id() {
  std::random_device rd;
  std::ostringstream os;
  for (int i = 0; i < 4; ++i) {
    char buf[9];
    std::snprintf(buf, sizeof buf, "%08x", rd());
    os << buf;
  }
  return os.str();
}

json summary_to_json(const IngestSummary& s) {
  return {{"records", s.records},
          {"occurrences", s.occurrences},
          {"duplicates_collapsed", s.duplicates_collapsed},
          {"empty_dropped", s.empty_dropped},
          {"parse_damage", s.parse_damage},
          {"replacement_chars", s.replacement_chars}};
}

IngestSummary summary_from_json(const json& j, const ReleaseVersion& v) {
  IngestSummary s;
  s.release = v;
  s.records = j.at("records").get<std::uint64_t>();
  s.occurrences = j.at("occurrences").get<std::uint64_t>();
  s.duplicates_collapsed = j.at("duplicates_collapsed").get<std::uint64_t>();
  s.empty_dropped = j.at("empty_dropped").get<std::uint64_t>();
  s.parse_damage = j.at("parse_damage").get<std::uint64_t>();
  s.replacement_chars = j.at("replacement_chars").get<std::uint64_t>();
  return s;
}

}  // namespace

bool DatabaseInfo::fully_ingested() const {
  return std::all_of(releases.begin(), releases.end(), [](const ReleaseState& r) { return r.ingested; });
}

std::size_t DatabaseInfo::ingested_count() const {
  return static_cast<std::size_t>(
      std::count_if(releases.begin(), releases.end(), [](const ReleaseState& r) { return r.ingested; }));
}

// In-memory image of the committed workspace.

struct DbState {
  DatabaseInfo info;
  std::uint64_t records_bytes = 0;
  std::vector<std::string> accessions;              // by record id
  std::unordered_map<std::string, std::uint32_t> record_index;
  std::vector<std::uint32_t> rank;                  // record id -> position in accession order

  fs::path dir(const fs::path& root) const { return root / "db" / info.id.str(); }

  void rerank() {
    std::vector<std::uint32_t> order(accessions.size());
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) { return accessions[a] < accessions[b]; });
    rank.assign(accessions.size(), 0);
    for (std::uint32_t i = 0; i < order.size(); ++i) rank[order[i]] = i;
  }
};

struct Workspace::State {
  fs::path root;
  std::string id;
  std::uint64_t sentences_bytes = 0;
  std::vector<DbState> dbs;  // sorted by name
  std::vector<DatabaseId> names;
  std::vector<std::string> texts;
  std::unordered_map<Fingerprint, std::uint32_t, FingerprintHash> sentence_index;

  mutable std::mutex runs_mutex;
  mutable std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, std::shared_ptr<const RunFile>> runs;

  static std::unique_ptr<State> load(const fs::path& root);
  json to_json() const;

  std::uint32_t db_index(const DatabaseId& id) const {
    auto it = std::lower_bound(names.begin(), names.end(), id);
    if (it == names.end() || *it != id) throw NotFound("unknown database '" + id.str() + "'");
    return static_cast<std::uint32_t>(it - names.begin());
  }

  const ReleaseState& ingested_release(std::uint32_t db, std::uint32_t ordinal) const {
    const DbState& d = dbs[db];
    if (ordinal >= d.info.releases.size()) {
      throw NotFound("database '" + d.info.id.str() + "' has no release with ordinal " + std::to_string(ordinal));
    }
    const ReleaseState& r = d.info.releases[ordinal];
    if (!r.ingested) {
      throw NotFound("release '" + r.version.label + "' of '" + d.info.id.str() + "' is not ingested");
    }
    return r;
  }

  fs::path run_path(std::uint32_t db, std::uint32_t ordinal, std::uint32_t kind) const {
    return dbs[db].dir(root) / (std::to_string(ordinal) + (kind == kByRelease ? ".rel" : ".sen"));
  }

  std::shared_ptr<const RunFile> run(std::uint32_t db, std::uint32_t ordinal, std::uint32_t kind) const {
    const ReleaseState& r = ingested_release(db, ordinal);
    std::lock_guard lock(runs_mutex);
    auto& slot = runs[{db, ordinal, kind}];
    if (!slot) slot = std::make_shared<const RunFile>(run_path(db, ordinal, kind), kind, r.rows);
    return slot;
  }

  void rebuild_names() {
    std::sort(dbs.begin(), dbs.end(), [](const DbState& a, const DbState& b) { return a.info.id < b.info.id; });
    names.clear();
    for (const auto& d : dbs) names.push_back(d.info.id);
  }
};

std::unique_ptr<Workspace::State> Workspace::State::load(const fs::path& root) {
  const fs::path manifest = root / "workspace.json";
  std::ifstream in(manifest);
  if (!in) throw NotFound("no workspace at '" + root.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw IntegrityError("unreadable workspace.json in '" + root.string() + "': " + e.what());
  }
  const std::string format = j.value("format", "");
  if (format != kWorkspaceFormat) {
    throw IntegrityError("workspace '" + root.string() + "' has format '" + format + "', expected '" +
                         std::string(kWorkspaceFormat) + "'");
  }
  auto st = std::make_unique<State>();
  st->root = root;
  try {
    st->id = j.at("id").get<std::string>();
    st->sentences_bytes = j.at("sentences_bytes").get<std::uint64_t>();
    for (const json& jd : j.at("databases")) {
      DbState d;
      d.info.id = DatabaseId(jd.at("name").get<std::string>());
      d.info.epoch = Date::parse(jd.at("epoch").get<std::string>());
      d.records_bytes = jd.at("records_bytes").get<std::uint64_t>();
      std::uint32_t ordinal = 0;
      for (const json& jr : jd.at("releases")) {
        ReleaseState r;
        r.version = ReleaseVersion{d.info.id, jr.at("label").get<std::string>(), ordinal++,
                                   Date::parse(jr.at("date").get<std::string>()),
                                   jr.at("date_estimated").get<bool>()};
        r.ingested = jr.at("ingested").get<bool>();
        r.rows = jr.at("rows").get<std::uint64_t>();
        r.summary.release = r.version;
        if (r.ingested) r.summary = summary_from_json(jr.at("summary"), r.version);
        d.info.releases.push_back(std::move(r));
      }
      st->dbs.push_back(std::move(d));
    }
  } catch (const json::exception& e) {
    throw IntegrityError("malformed workspace.json in '" + root.string() + "': " + e.what());
  } catch (const InvalidInput& e) {
    throw IntegrityError("malformed workspace.json in '" + root.string() + "': " + e.what());
  }
  st->rebuild_names();

  const std::string sentences = read_prefix(root / "sentences.log", st->sentences_bytes);
  std::size_t pos = 0;
  while (pos < sentences.size()) {
    if (pos + 20 > sentences.size()) throw IntegrityError("sentences.log is truncated");
    Fingerprint fp;
    std::memcpy(fp.bytes.data(), sentences.data() + pos, 16);
    const std::uint32_t len = get_u32(sentences, pos + 16);
    pos += 20;
    if (pos + len > sentences.size()) throw IntegrityError("sentences.log is truncated");
    const auto idx = static_cast<std::uint32_t>(st->texts.size());
    if (!st->sentence_index.emplace(fp, idx).second) {
      throw IntegrityError("sentences.log holds fingerprint " + fp.hex() + " twice");
    }
    st->texts.emplace_back(sentences.data() + pos, len);
    pos += len;
  }

  for (DbState& d : st->dbs) {
    const std::string records = read_prefix(d.dir(root) / "records.log", d.records_bytes);
    std::size_t p = 0;
    while (p < records.size()) {
      if (p + 4 > records.size()) throw IntegrityError("records.log of '" + d.info.id.str() + "' is truncated");
      const std::uint32_t len = get_u32(records, p);
      p += 4;
      if (p + len > records.size()) throw IntegrityError("records.log of '" + d.info.id.str() + "' is truncated");
      std::string acc(records.data() + p, len);
      p += len;
      const auto rid = static_cast<std::uint32_t>(d.accessions.size());
      if (!d.record_index.emplace(acc, rid).second) {
        throw IntegrityError("records.log of '" + d.info.id.str() + "' lists '" + acc + "' twice");
      }
      d.accessions.push_back(std::move(acc));
    }
    d.rerank();
  }
  return st;
}

json Workspace::State::to_json() const {
  json jdbs = json::array();
  for (const DbState& d : dbs) {
    json jrel = json::array();
    for (const ReleaseState& r : d.info.releases) {
      json jr = {{"label", r.version.label},
                 {"date", r.version.date.iso()},
                 {"date_estimated", r.version.date_estimated},
                 {"ingested", r.ingested},
                 {"rows", r.rows}};
      if (r.ingested) jr["summary"] = summary_to_json(r.summary);
      jrel.push_back(std::move(jr));
    }
    jdbs.push_back({{"name", d.info.id.str()},
                    {"epoch", d.info.epoch.iso()},
                    {"records_bytes", d.records_bytes},
                    {"releases", std::move(jrel)}});
  }
  return {{"format", kWorkspaceFormat},
          {"id", id},
          {"sentences_bytes", sentences_bytes},
          {"databases", std::move(jdbs)}};
}

// Workspace ---------------------------------------------------------------

Workspace::Workspace(std::unique_ptr<State> state) : state_(std::move(state)) {}
Workspace::Workspace(Workspace&&) noexcept = default;
Workspace& Workspace::operator=(Workspace&&) noexcept = default;
Workspace::~Workspace() = default;

Workspace Workspace::open(const fs::path& root) { return Workspace(State::load(root)); }

Workspace Workspace::open_or_create(const fs::path& root) {
  if (!fs::exists(root / "workspace.json")) {
    if (fs::exists(root) && !fs::is_directory(root)) {
      throw InvalidInput("workspace path '" + root.string() + "' is not a directory");
    }
    fs::create_directories(root);
    WriterLock lock(root);
    if (!fs::exists(root / "workspace.json")) {
      State fresh;
      fresh.root = root;
      fresh.id = random_id();
      write_file_atomic(root / "workspace.json", fresh.to_json().dump(1) + "\n");
    }
  }
  return open(root);
}

const fs::path& Workspace::root() const { return state_->root; }
const std::string& Workspace::id() const { return state_->id; }

void Workspace::refresh() { state_ = State::load(state_->root); }

void Workspace::register_database(const DatabaseSpec& spec) {
  if (spec.releases.empty()) throw InvalidInput("database '" + spec.name.str() + "' lists no releases");
  std::unordered_set<std::string> labels;
  for (std::size_t i = 0; i < spec.releases.size(); ++i) {
    const auto& r = spec.releases[i];
    if (r.label.empty()) throw InvalidInput("release label must not be empty");
    if (!labels.insert(r.label).second) {
      throw InvalidInput("database '" + spec.name.str() + "' lists release '" + r.label + "' twice");
    }
    if (i > 0 && r.date < spec.releases[i - 1].date) {
      throw InvalidInput("release '" + r.label + "' of '" + spec.name.str() + "' is dated before its predecessor");
    }
  }
  const Date epoch = spec.epoch.value_or(spec.releases.front().date);
  if (spec.releases.front().date < epoch) {
    throw InvalidInput("epoch of '" + spec.name.str() + "' is after its first release");
  }

  WriterLock lock(state_->root);
  refresh();
  State& st = *state_;
  auto it = std::find_if(st.dbs.begin(), st.dbs.end(), [&](const DbState& d) { return d.info.id == spec.name; });
  if (it == st.dbs.end()) {
    DbState d;
    d.info.id = spec.name;
    d.info.epoch = epoch;
    for (std::size_t i = 0; i < spec.releases.size(); ++i) {
      const auto& r = spec.releases[i];
      ReleaseState rs;
      rs.version = ReleaseVersion{spec.name, r.label, static_cast<std::uint32_t>(i), r.date, r.date_estimated};
      rs.summary.release = rs.version;
      d.info.releases.push_back(std::move(rs));
    }
    fs::create_directories(d.dir(st.root));
    st.dbs.push_back(std::move(d));
    st.rebuild_names();
  } else {
    DbState& d = *it;
    if (spec.epoch && *spec.epoch != d.info.epoch) {
      throw InvalidInput("database '" + spec.name.str() + "' is registered with epoch " + d.info.epoch.iso());
    }
    const std::size_t common = std::min(spec.releases.size(), d.info.releases.size());
    for (std::size_t i = 0; i < common; ++i) {
      const auto& want = spec.releases[i];
      const auto& have = d.info.releases[i].version;
      if (want.label != have.label || want.date != have.date || want.date_estimated != have.date_estimated) {
        throw InvalidInput("release " + std::to_string(i) + " of '" + spec.name.str() +
                           "' conflicts with the registered release '" + have.label + "' (" + have.date.iso() + ")");
      }
    }
    if (spec.releases.size() > common && spec.releases[common].date < d.info.releases.back().version.date) {
      throw InvalidInput("release '" + spec.releases[common].label + "' of '" + spec.name.str() +
                         "' is dated before the last registered release");
    }
    for (std::size_t i = common; i < spec.releases.size(); ++i) {
      const auto& r = spec.releases[i];
      ReleaseState rs;
      rs.version = ReleaseVersion{spec.name, r.label, static_cast<std::uint32_t>(i), r.date, r.date_estimated};
      rs.summary.release = rs.version;
      d.info.releases.push_back(std::move(rs));
    }
  }
  write_file_atomic(st.root / "workspace.json", st.to_json().dump(1) + "\n");
}

const std::vector<DatabaseId>& Workspace::databases() const { return state_->names; }

const DatabaseInfo& Workspace::database(const DatabaseId& id) const {
  return state_->dbs[state_->db_index(id)].info;
}

std::uint32_t Workspace::database_index(const DatabaseId& id) const { return state_->db_index(id); }

const ReleaseVersion& Workspace::release(const DatabaseId& id, std::string_view label) const {
  for (const auto& r : database(id).releases) {
    if (r.version.label == label) return r.version;
  }
  throw NotFound("database '" + id.str() + "' has no release '" + std::string(label) + "'");
}

const ReleaseVersion& Workspace::release(const DatabaseId& id, std::uint32_t ordinal) const {
  const auto& rel = database(id).releases;
  if (ordinal >= rel.size()) {
    throw NotFound("database '" + id.str() + "' has no release with ordinal " + std::to_string(ordinal));
  }
  return rel[ordinal].version;
}

bool Workspace::is_ingested(const DatabaseId& id, std::uint32_t ordinal) const {
  const auto& rel = database(id).releases;
  return ordinal < rel.size() && rel[ordinal].ingested;
}

// Ingest ------------------------------------------------------------------

struct Workspace::Ingest::Buffer {
  WriterLock lock;
  std::uint32_t db = 0;
  std::uint32_t ordinal = 0;
  ReleaseVersion version;
  std::vector<Row> rows;
  std::vector<std::string> new_accessions;
  std::unordered_map<std::string, std::uint32_t> new_records;
  std::unordered_map<Fingerprint, std::string, FingerprintHash> new_sentences;
  UpstreamCounts upstream;
  bool finished = false;

  explicit Buffer(const fs::path& root) : lock(root) {}
};

Workspace::Ingest Workspace::begin_ingest(const DatabaseId& id, std::string_view label) {
  // Validate against the current view first so obvious mistakes do not
  // need the lock.
  const std::uint32_t ordinal = release(id, label).ordinal;
  return Ingest(*this, database_index(id), ordinal);
}

Workspace::Ingest::Ingest(Workspace& ws, std::uint32_t db, std::uint32_t ordinal) : ws_(&ws) {
  auto buf = std::make_unique<Buffer>(ws.state_->root);
  const DatabaseId id = ws.state_->names[db];
  ws.refresh();
  State& st = *ws.state_;
  buf->db = st.db_index(id);
  buf->ordinal = ordinal;
  const ReleaseState& r = st.dbs[buf->db].info.releases.at(ordinal);
  if (r.ingested) {
    throw StateError("release '" + r.version.label + "' of '" + id.str() + "' is already ingested");
  }
  buf->version = r.version;
  truncate_to(st.root / "sentences.log", st.sentences_bytes);
  for (const DbState& d : st.dbs) truncate_to(d.dir(st.root) / "records.log", d.records_bytes);
  buf_ = std::move(buf);
}

Workspace::Ingest::Ingest(Ingest&&) noexcept = default;
Workspace::Ingest::~Ingest() = default;

const ReleaseVersion& Workspace::Ingest::release() const { return buf_->version; }

void Workspace::Ingest::add(std::string_view accession, const NormalizedSentence& sentence) {
  Buffer& b = *buf_;
  if (b.finished) throw StateError("ingest session already finished");
  const State& st = *ws_->state_;
  const DbState& d = st.dbs[b.db];

  std::uint32_t rid;
  const std::string acc(accession);
  if (auto it = d.record_index.find(acc); it != d.record_index.end()) {
    rid = it->second;
  } else if (auto jt = b.new_records.find(acc); jt != b.new_records.end()) {
    rid = jt->second;
  } else {
    validate_accession(accession);
    rid = static_cast<std::uint32_t>(d.accessions.size() + b.new_accessions.size());
    b.new_records.emplace(acc, rid);
    b.new_accessions.push_back(acc);
  }

  const Fingerprint& fp = sentence.fingerprint();
  if (auto it = st.sentence_index.find(fp); it != st.sentence_index.end()) {
    if (st.texts[it->second] != sentence.text()) {
      throw IntegrityError("fingerprint collision: '" + sentence.text() + "' and '" + st.texts[it->second] +
                           "' share " + fp.hex());
    }
  } else {
    auto [jt, inserted] = b.new_sentences.emplace(fp, sentence.text());
    if (!inserted && jt->second != sentence.text()) {
      throw IntegrityError("fingerprint collision: '" + sentence.text() + "' and '" + jt->second + "' share " +
                           fp.hex());
    }
  }
  b.rows.push_back(Row{fp, rid});
}

void Workspace::Ingest::add_upstream(const UpstreamCounts& counts) {
  buf_->upstream.empty_dropped += counts.empty_dropped;
  buf_->upstream.duplicates_in_record += counts.duplicates_in_record;
  buf_->upstream.parse_damage += counts.parse_damage;
  buf_->upstream.replacement_chars += counts.replacement_chars;
}

IngestSummary Workspace::Ingest::commit() {
  Buffer& b = *buf_;
  if (b.finished) throw StateError("ingest session already finished");
  b.finished = true;
  State& st = *ws_->state_;
  DbState& d = st.dbs[b.db];

  // Accession order over existing plus new records.
  std::vector<std::string> all_acc = d.accessions;
  all_acc.insert(all_acc.end(), b.new_accessions.begin(), b.new_accessions.end());
  DbState ranked;
  ranked.accessions = std::move(all_acc);
  ranked.rerank();
  const auto& rank = ranked.rank;

  std::vector<Row> rows = std::move(b.rows);
  std::sort(rows.begin(), rows.end(), [&](const Row& x, const Row& y) {
    if (rank[x.record] != rank[y.record]) return rank[x.record] < rank[y.record];
    return x.fp < y.fp;
  });
  const std::size_t before = rows.size();
  rows.erase(std::unique(rows.begin(), rows.end(),
                         [](const Row& x, const Row& y) { return x.record == y.record && x.fp == y.fp; }),
             rows.end());

  IngestSummary summary;
  summary.release = b.version;
  summary.occurrences = rows.size();
  summary.duplicates_collapsed = b.upstream.duplicates_in_record + (before - rows.size());
  summary.empty_dropped = b.upstream.empty_dropped;
  summary.parse_damage = b.upstream.parse_damage;
  summary.replacement_chars = b.upstream.replacement_chars;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i == 0 || rows[i].record != rows[i - 1].record) ++summary.records;
  }

  const fs::path dir = d.dir(st.root);
  const fs::path rel = st.run_path(b.db, b.ordinal, kByRelease);
  const fs::path sen = st.run_path(b.db, b.ordinal, kBySentence);
  const fs::path rel_tmp = rel.string() + ".tmp";
  const fs::path sen_tmp = sen.string() + ".tmp";

  std::vector<std::pair<Fingerprint, const std::string*>> fresh;
  fresh.reserve(b.new_sentences.size());
  for (const auto& [fp, text] : b.new_sentences) fresh.emplace_back(fp, &text);
  std::sort(fresh.begin(), fresh.end());

  std::string sentence_bytes;
  for (const auto& [fp, text] : fresh) {
    sentence_bytes.append(reinterpret_cast<const char*>(fp.bytes.data()), 16);
    put_u32(sentence_bytes, static_cast<std::uint32_t>(text->size()));
    sentence_bytes += *text;
  }
  std::string record_bytes;
  for (const auto& acc : b.new_accessions) {
    put_u32(record_bytes, static_cast<std::uint32_t>(acc.size()));
    record_bytes += acc;
  }

  try {
    fs::create_directories(dir);
    write_run(rel_tmp, kByRelease, rows);
    std::sort(rows.begin(), rows.end(), [&](const Row& x, const Row& y) {
      if (x.fp != y.fp) return x.fp < y.fp;
      return rank[x.record] < rank[y.record];
    });
    write_run(sen_tmp, kBySentence, rows);
    append_bytes(st.root / "sentences.log", sentence_bytes);
    append_bytes(dir / "records.log", record_bytes);
    fs::rename(rel_tmp, rel);
    fs::rename(sen_tmp, sen);

    ReleaseState& r = d.info.releases[b.ordinal];
    const ReleaseState saved = r;
    const std::uint64_t saved_sentences = st.sentences_bytes;
    const std::uint64_t saved_records = d.records_bytes;
    r.ingested = true;
    r.rows = rows.size();
    r.summary = summary;
    st.sentences_bytes += sentence_bytes.size();
    d.records_bytes += record_bytes.size();
    try {
      write_file_atomic(st.root / "workspace.json", st.to_json().dump(1) + "\n");
    } catch (...) {
      r = saved;
      st.sentences_bytes = saved_sentences;
      d.records_bytes = saved_records;
      throw;
    }
  } catch (...) {
    std::error_code ec;
    fs::remove(rel_tmp, ec);
    fs::remove(sen_tmp, ec);
    truncate_to(st.root / "sentences.log", st.sentences_bytes);
    truncate_to(dir / "records.log", d.records_bytes);
    throw;
  }

  // Committed: fold the buffered tables into memory.
  for (const auto& [fp, text] : fresh) {
    st.sentence_index.emplace(fp, static_cast<std::uint32_t>(st.texts.size()));
    st.texts.push_back(*text);
  }
  for (auto& acc : b.new_accessions) {
    d.record_index.emplace(acc, static_cast<std::uint32_t>(d.accessions.size()));
    d.accessions.push_back(std::move(acc));
  }
  d.rank = std::move(ranked.rank);
  {
    std::lock_guard lock(st.runs_mutex);
    st.runs.erase({b.db, b.ordinal, kByRelease});
    st.runs.erase({b.db, b.ordinal, kBySentence});
  }
  b.new_sentences.clear();
  b.new_accessions.clear();
  return summary;
}

IngestSummary Workspace::ingest(const DatabaseId& id, std::string_view label,
                                const std::vector<std::pair<std::string, NormalizedSentence>>& occurrences) {
  Ingest session = begin_ingest(id, label);
  for (const auto& [acc, sentence] : occurrences) session.add(acc, sentence);
  return session.commit();
}

// Queries -----------------------------------------------------------------

std::size_t Workspace::sentence_count() const { return state_->texts.size(); }

bool Workspace::contains(const Fingerprint& fp) const { return state_->sentence_index.count(fp) != 0; }

const std::string& Workspace::sentence_text(const Fingerprint& fp) const {
  auto it = state_->sentence_index.find(fp);
  if (it == state_->sentence_index.end()) throw NotFound("unknown sentence " + fp.hex());
  return state_->texts[it->second];
}

const std::string& Workspace::accession(std::uint32_t database, std::uint32_t record) const {
  return state_->dbs.at(database).accessions.at(record);
}

SentenceTimeline Workspace::timeline(const Fingerprint& fp) const {
  if (!contains(fp)) throw NotFound("unknown sentence " + fp.hex());
  std::vector<PresenceHit> hits;
  const State& st = *state_;
  for (std::uint32_t db = 0; db < st.dbs.size(); ++db) {
    for (const ReleaseState& r : st.dbs[db].info.releases) {
      if (!r.ingested) continue;
      const auto run = st.run(db, r.version.ordinal, kBySentence);
      const auto rows = run->rows();
      auto lo = std::lower_bound(rows.begin(), rows.end(), fp, [](const Row& x, const Fingerprint& f) { return x.fp < f; });
      for (; lo != rows.end() && lo->fp == fp; ++lo) hits.push_back(PresenceHit{db, lo->record, r.version.ordinal});
    }
  }
  return to_timeline(fp, hits);
}

SentenceTimeline Workspace::timeline_for_text(std::string_view raw) const {
  const auto n = normalize(raw);
  if (!n) throw NotFound("text normalizes to an empty sentence");
  return timeline(n->fingerprint());
}

SentenceTimeline Workspace::to_timeline(const Fingerprint& fp, std::span<const PresenceHit> hits) const {
  SentenceTimeline t;
  t.sentence = fp;
  for (const PresenceHit& h : hits) {
    const DbState& d = state_->dbs.at(h.database);
    auto& ordinals = t.databases[d.info.id.str()][d.accessions.at(h.record)];
    ordinals.insert(std::lower_bound(ordinals.begin(), ordinals.end(), h.ordinal), h.ordinal);
  }
  return t;
}

void Workspace::for_each_release_occurrence(
    const DatabaseId& id, std::uint32_t ordinal,
    const std::function<void(std::string_view, const Fingerprint&)>& fn) const {
  const std::uint32_t db = state_->db_index(id);
  const auto run = state_->run(db, ordinal, kByRelease);
  const auto& acc = state_->dbs[db].accessions;
  for (const Row& r : run->rows()) fn(acc.at(r.record), r.fp);
}

std::vector<Occurrence> Workspace::release_occurrences(const DatabaseId& id, std::uint32_t ordinal) const {
  std::vector<Occurrence> out;
  for_each_release_occurrence(id, ordinal, [&](std::string_view acc, const Fingerprint& fp) {
    out.push_back(Occurrence{fp, RecordId(id, std::string(acc)), ordinal});
  });
  return out;
}

void Workspace::for_each_release_fingerprint(const DatabaseId& id, std::uint32_t ordinal,
                                             const std::function<void(const Fingerprint&)>& fn) const {
  const auto run = state_->run(state_->db_index(id), ordinal, kBySentence);
  for (const Row& r : run->rows()) fn(r.fp);
}

std::vector<Fingerprint> Workspace::release_fingerprints(const DatabaseId& id, std::uint32_t ordinal) const {
  std::vector<Fingerprint> out;
  for_each_release_fingerprint(id, ordinal, [&](const Fingerprint& fp) { out.push_back(fp); });
  return out;
}

std::vector<std::uint32_t> Workspace::release_records(const DatabaseId& id, std::uint32_t ordinal) const {
  const auto run = state_->run(state_->db_index(id), ordinal, kByRelease);
  std::vector<std::uint32_t> out;
  for (const Row& r : run->rows()) {
    if (out.empty() || out.back() != r.record) out.push_back(r.record);
  }
  return out;
}

void Workspace::scan_sentences(const std::vector<DatabaseId>& dbs, const SentenceScan& fn) const {
  const State& st = *state_;
  std::vector<std::uint32_t> selected;
  if (dbs.empty()) {
    selected.resize(st.dbs.size());
    std::iota(selected.begin(), selected.end(), 0u);
  } else {
    for (const auto& id : dbs) selected.push_back(st.db_index(id));
    std::sort(selected.begin(), selected.end());
    selected.erase(std::unique(selected.begin(), selected.end()), selected.end());
  }

  struct Cursor {
    std::shared_ptr<const RunFile> run;
    std::span<const Row> rows;
    std::size_t pos;
    std::uint32_t db;
    std::uint32_t ordinal;
  };
  std::vector<Cursor> cursors;
  for (const std::uint32_t db : selected) {
    for (const ReleaseState& r : st.dbs[db].info.releases) {
      if (!r.ingested || r.rows == 0) continue;
      auto run = st.run(db, r.version.ordinal, kBySentence);
      const auto rows = run->rows();
      cursors.push_back(Cursor{std::move(run), rows, 0, db, r.version.ordinal});
    }
  }
  auto later = [&](std::size_t a, std::size_t b) {
    return cursors[b].rows[cursors[b].pos].fp < cursors[a].rows[cursors[a].pos].fp;
  };
  std::priority_queue<std::size_t, std::vector<std::size_t>, decltype(later)> heap(later);
  for (std::size_t i = 0; i < cursors.size(); ++i) heap.push(i);

  std::vector<PresenceHit> hits;
  while (!heap.empty()) {
    const Fingerprint fp = cursors[heap.top()].rows[cursors[heap.top()].pos].fp;
    hits.clear();
    while (!heap.empty()) {
      const std::size_t i = heap.top();
      Cursor& c = cursors[i];
      if (c.rows[c.pos].fp != fp) break;
      heap.pop();
      for (; c.pos < c.rows.size() && c.rows[c.pos].fp == fp; ++c.pos) {
        hits.push_back(PresenceHit{c.db, c.rows[c.pos].record, c.ordinal});
      }
      if (c.pos < c.rows.size()) heap.push(i);
    }
    std::sort(hits.begin(), hits.end(), [&](const PresenceHit& a, const PresenceHit& b) {
      if (a.database != b.database) return a.database < b.database;
      const auto& rank = st.dbs[a.database].rank;
      if (a.record != b.record) return rank[a.record] < rank[b.record];
      return a.ordinal < b.ordinal;
    });
    fn(fp, hits);
  }
}

IntegrityReport Workspace::check_integrity() const {
  const State& st = *state_;
  IntegrityReport rep;
  auto problem = [&](std::string msg) { rep.problems.push_back(std::move(msg)); };

  std::vector<bool> referenced(st.texts.size(), false);
  for (const auto& [fp, idx] : st.sentence_index) {
    ++rep.sentences_checked;
    const std::string& text = st.texts[idx];
    if (!is_canonical(text)) {
      problem("sentence " + fp.hex() + " is not in canonical form");
    } else if (fingerprint_unchecked(text) != fp) {
      problem("sentence " + fp.hex() + " does not hash to its fingerprint");
    }
  }

  for (std::uint32_t db = 0; db < st.dbs.size(); ++db) {
    const DbState& d = st.dbs[db];
    const std::string name = d.info.id.str();
    for (std::size_t i = 1; i < d.info.releases.size(); ++i) {
      if (d.info.releases[i].version.date < d.info.releases[i - 1].version.date) {
        problem(name + ": release dates decrease at ordinal " + std::to_string(i));
      }
    }
    for (const ReleaseState& r : d.info.releases) {
      if (!r.ingested) continue;
      ++rep.releases_checked;
      const std::string where = name + " release '" + r.version.label + "'";
      std::shared_ptr<const RunFile> rel, sen;
      try {
        rel = std::make_shared<RunFile>(st.run_path(db, r.version.ordinal, kByRelease), kByRelease, r.rows);
        sen = std::make_shared<RunFile>(st.run_path(db, r.version.ordinal, kBySentence), kBySentence, r.rows);
      } catch (const Error& e) {
        problem(where + ": " + e.what());
        continue;
      }
      const auto a = rel->rows();
      const auto b = sen->rows();
      rep.rows_checked += a.size() + b.size();
      bool ids_ok = true;
      for (const auto rows : {a, b}) {
        for (const Row& row : rows) {
          if (row.record >= d.accessions.size()) {
            ids_ok = false;
          } else if (auto it = st.sentence_index.find(row.fp); it == st.sentence_index.end()) {
            problem(where + ": row references unknown sentence " + row.fp.hex());
          } else {
            referenced[it->second] = true;
          }
        }
      }
      if (!ids_ok) {
        problem(where + ": row references an unknown record id");
        continue;
      }
      const auto& rank = d.rank;
      auto by_record = [&](const Row& x, const Row& y) {
        if (rank[x.record] != rank[y.record]) return rank[x.record] < rank[y.record];
        return x.fp < y.fp;
      };
      auto by_sentence = [&](const Row& x, const Row& y) {
        if (x.fp != y.fp) return x.fp < y.fp;
        return rank[x.record] < rank[y.record];
      };
      bool sorted = true;
      for (std::size_t i = 1; i < a.size(); ++i) sorted = sorted && by_record(a[i - 1], a[i]);
      if (!sorted) problem(where + ": by-release index is not strictly sorted");
      sorted = true;
      for (std::size_t i = 1; i < b.size(); ++i) sorted = sorted && by_sentence(b[i - 1], b[i]);
      if (!sorted) problem(where + ": by-sentence index is not strictly sorted");
      std::vector<Row> resorted(a.begin(), a.end());
      std::sort(resorted.begin(), resorted.end(), by_sentence);
      const bool same = std::equal(resorted.begin(), resorted.end(), b.begin(), b.end(), [](const Row& x, const Row& y) {
        return x.fp == y.fp && x.record == y.record;
      });
      if (!same) problem(where + ": by-release and by-sentence indexes disagree");
    }
  }
  for (const auto& [fp, idx] : st.sentence_index) {
    if (!referenced[idx]) problem("sentence " + fp.hex() + " is not referenced by any release");
  }
  return rep;
}

}  // namespace annotrace
