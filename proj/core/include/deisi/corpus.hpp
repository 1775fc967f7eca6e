#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace deisi {

struct RawEvent {
  std::string session_id;
  std::string item_id;
  std::int64_t timestamp = 0;
};

// Ordered item indices of one session, indices into the corpus vocabulary.
struct Session {
  std::vector<std::uint32_t> items;
};

// One training or test example: a session prefix and the next item.
struct Example {
  std::vector<std::uint32_t> prefix;
  std::uint32_t target = 0;
};

struct CorpusStats {
  std::size_t interactions = 0;
  std::size_t sessions = 0;
  std::size_t items = 0;
  double avg_length = 0.0;
};

struct SessionCorpus {
  std::vector<std::string> vocabulary;  // dense index -> item id
  std::vector<Example> train;
  std::vector<Example> test;
  CorpusStats stats;

  std::size_t vocab_size() const { return vocabulary.size(); }
  std::uint32_t index_of(const std::string& item_id) const;
};

// --- Ingestion ---------------------------------------------------------

struct IngestOptions {
  // Column selectors: decimal strings are 0-based indices into a headerless
  // file; anything else names a column of a header row.
  std::string col_session = "0";
  std::string col_item = "1";
  std::string col_time = "2";
  char delimiter = 0;  // 0 = autodetect (tab if present on first line, else comma)
};

struct IngestResult {
  std::vector<RawEvent> events;
  std::size_t malformed_lines = 0;
};

IngestResult ingest(const std::string& path, const IngestOptions& opts = {});

// --- Preprocessing ------------------------------------------------------

struct SplitPolicy {
  // Sessions whose last event falls within this many seconds of the newest
  // event go to the test split ("last week" by default, "last day" = 86400).
  std::int64_t test_window_seconds = 7 * 86400;
  // Keep only the most recent fraction of sessions before filtering (1.0 =
  // keep everything). Applied by last-event time.
  double subsample_recent = 1.0;
};

SessionCorpus preprocess(const std::vector<RawEvent>& events, std::size_t min_support = 5,
                         const SplitPolicy& split = {});

// --- Synthetic corpora --------------------------------------------------

struct SynthSpec {
  std::size_t num_factors = 2;
  std::size_t values_per_factor = 5;
  std::size_t num_sessions = 200;
  std::size_t min_length = 4;
  std::size_t max_length = 8;
  double stability_mix = 0.0;  // fraction of sessions with factor 0 frozen
  std::uint64_t seed = 1;

  void validate() const;
};

// Items are tuples of latent factor values; each factor advances through a
// fixed cycle every step, except factor 0 in sessions flagged by
// stability_mix, which stays constant for the whole walk. The last ~10% of
// sessions form the held-out test split. Pure function of the spec.
SessionCorpus synthesize(const SynthSpec& spec);

// --- Stratification -----------------------------------------------------

struct LengthStrata {
  std::vector<Example> long_sessions;   // prefix length >= threshold
  std::vector<Example> short_sessions;  // the rest
};

LengthStrata stratify_by_length(const SessionCorpus& corpus, std::size_t threshold = 5);

// --- Cache file ---------------------------------------------------------
// Layout: magic "DEISICORP1", u32 header length, JSON header (vocabulary and
// counts), then u32 little-endian arrays encoding train and test examples.

void save_corpus(const SessionCorpus& corpus, const std::string& path);
SessionCorpus load_corpus(const std::string& path);

}  // namespace deisi
