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

// Loading generated corpora straight into a workspace, and small random
// generator specs.

#pragma once

#include <random>
#include <string>
#include <utility>
#include <vector>

#include "annotrace/errors.hpp"
#include "annotrace/store.hpp"
#include "annotrace/synth.hpp"

namespace annotrace::testing {

inline void load_synth(Workspace& ws, const SynthCorpus& corpus) {
  for (const auto& db : corpus.spec.databases) {
    DatabaseSpec spec;
    spec.name = DatabaseId(db.name);
    spec.epoch = db.epoch;
    for (std::size_t v = 0; v < db.dates.size(); ++v) spec.releases.push_back({corpus.release_label(v), db.dates[v], false});
    ws.register_database(spec);
  }
  for (std::size_t d = 0; d < corpus.content.size(); ++d) {
    const DatabaseId id(corpus.spec.databases[d].name);
    for (std::size_t v = 0; v < corpus.content[d].size(); ++v) {
      auto session = ws.begin_ingest(id, corpus.release_label(v));
      for (const auto& [r, s] : corpus.content[d][v]) {
        session.add(SynthCorpus::record_name(r), NormalizedSentence::from_canonical(SynthCorpus::sentence_text(s)));
      }
      session.commit();
    }
  }
}

/// Random small spec: up to `max_dbs` databases, <= 20 records, <= 6
/// releases and a vocabulary small enough to keep <= 200 sentences.
inline GeneratorSpec random_small_spec(std::mt19937_64& rng, std::size_t max_dbs = 1) {
  GeneratorSpec s;
  s.seed = rng();
  s.records = 1 + static_cast<std::uint32_t>(rng() % 20);
  s.vocabulary = 1 + static_cast<std::uint32_t>(rng() % 180);
  s.initial_per_record = static_cast<std::uint32_t>(rng() % 4);
  auto rate = [&] { return static_cast<double>(rng() % 101) / 100.0; };
  s.rates.copy_within = rate();
  s.rates.copy_cross = rate();
  s.rates.remove = rate();
  s.rates.add = rate();
  const std::size_t dbs = 1 + rng() % max_dbs;
  for (std::size_t d = 0; d < dbs; ++d) {
    const auto releases = 1 + static_cast<std::uint32_t>(rng() % 6);
    const Date start = Date::parse("2000-01-01").plus_days(static_cast<int>(rng() % 400));
    s.databases.push_back(SynthDatabase::regular("db" + std::to_string(d), releases, start,
                                                 1 + static_cast<int>(rng() % 500)));
  }
  // Planted sentences stay within the budget.
  const bool multi = s.databases.front().dates.size() >= 2;
  s.quotas[PatternLabel::kPossiblyTransient] = static_cast<std::uint32_t>(rng() % 5);
  if (multi) {
    s.quotas[PatternLabel::kTransient] = static_cast<std::uint32_t>(rng() % 5);
    if (s.records >= 2) s.quotas[PatternLabel::kMissingOrigin] = static_cast<std::uint32_t>(rng() % 5);
  }
  try {
    GeneratorSpec probe = s;
    probe.cross_quota = static_cast<std::uint32_t>(rng() % 5);
    probe.validate();
    s = probe;
  } catch (const InvalidInput&) {
  }
  return s;
}

}  // namespace annotrace::testing
