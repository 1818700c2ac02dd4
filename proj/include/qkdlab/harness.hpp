// Experiment orchestration: named scenario configs (JSON), deterministic
// runs with persisted logs and reports, a pinned reproduction suite, and log
// ingestion for asynchronous post-processing.
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "qkdlab/dropout.hpp"
#include "qkdlab/ghz.hpp"
#include "qkdlab/network.hpp"
#include "qkdlab/protocols.hpp"
#include "qkdlab/transport.hpp"

namespace qkdlab {

struct ScenarioConfig {
  std::string name;
  std::uint64_t seed = 0;
  std::string protocol;  // standard | bit_revelation | duplex | transport | dropout_sharing | ghz
  std::int64_t slots = 0;

  // topology
  int relays = 0;
  std::vector<RelayConfig> relay_modes;  // sized to `relays` after validation
  std::vector<double> erasure;
  std::vector<int> eve_links;

  // options
  double sample_fraction = 0.1;
  DuplexPairing pairing = DuplexPairing::Sequential;
  TransportMode transport_mode = TransportMode::MatchedBits;
  bool scavenge = false;
  bool shuffle = false;
  bool derangement = false;
  bool eve = false;  // duplex / ghz attack switch
  ProtocolWeights weights{1.0, 0.0};
  int required = -1;
  std::vector<int> compromised;  // relay indices forced always-on

  // Parses and validates; errors carry the offending field path. A missing
  // seed is an error: there is no implicit entropy anywhere.
  static ScenarioConfig from_json(const nlohmann::json& j);
  static ScenarioConfig load(const std::filesystem::path& path);

  ChannelSpec channel_spec() const;
  nlohmann::json echo() const;
};

struct ReportRow {
  std::string metric;
  double expected = 0.0;
  double tolerance = 0.0;
  double measured = 0.0;
  bool pass = true;
  bool informational = false;  // reported, never gates
  std::string note;
};

struct Report {
  nlohmann::json data;

  std::string json_text() const { return data.dump(2) + "\n"; }
  std::string table_text() const;
  bool all_passed() const;
};

// Executes the scenario deterministically and, when outdir is given, writes
// report.json, report.txt and the session/announcement artifacts.
Report run_scenario(const ScenarioConfig& config,
                    const std::optional<std::filesystem::path>& outdir);

inline const std::vector<std::string> kReproduceNames = {
    "rate-vs-relays", "dropout-fractions", "dropout-n10",    "duplex-eve",
    "bitrev-fractions", "ghz-attack",      "compromised-relay",
};

// Runs one pinned experiment (or every one for "all") and reports measured
// values against their expected figures at fixed tolerances.
Report reproduce(const std::string& name);

SessionData ingest(const std::filesystem::path& log_path);

// Summary statistics recomputed from a persisted log alone.
Report summarize_log(const std::filesystem::path& log_path);

}  // namespace qkdlab
