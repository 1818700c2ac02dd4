// Timeslot engine for relay channels A -> R1 -> ... -> Rn -> B: steps N
// timeslots, applies relay behaviours (intercept/resend, random drop-out,
// always-on compromised), per-link erasure and intercept/resend
// eavesdroppers, and records every participant's (t, c, b) log.
#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qkdlab/bb84.hpp"

namespace qkdlab {

enum class RelayMode : std::uint8_t {
  InterceptResend,      // measures in a random basis every slot and retransmits
  Dropout,              // passes the qubit through unmeasured with probability p
  CompromisedAlwaysOn,  // announces drop-outs per p but secretly always measures
};

struct RelayConfig {
  RelayMode mode = RelayMode::InterceptResend;
  double dropout_p = 0.0;
};

enum class Retransmission : std::uint8_t {
  Immediate,
  Batch,   // forwarding delayed until batch_size slots have accumulated
  Padded,  // last relay interleaves its own fresh qubits into onward slots
};

struct ChannelSpec {
  std::vector<RelayConfig> relays;
  std::vector<double> link_erasure;  // n+1 entries; empty means lossless
  std::vector<int> eve_links;        // links carrying an intercept/resend eavesdropper
  Retransmission retransmission = Retransmission::Immediate;
  int batch_size = 1;
  double padding_ratio = 0.0;         // fraction of the padding relay's onward slots
  std::optional<Basis> forced_basis;  // test hook: everyone uses this basis

  int relay_count() const { return static_cast<int>(relays.size()); }
  int link_count() const { return relay_count() + 1; }
  void validate() const;  // throws std::invalid_argument

  friend bool operator==(const ChannelSpec&, const ChannelSpec&) = default;
};

inline bool operator==(const RelayConfig& a, const RelayConfig& b) {
  return a.mode == b.mode && a.dropout_p == b.dropout_p;
}

struct SlotRecord {
  std::int64_t t;
  Basis c;
  Bit b;

  friend bool operator==(const SlotRecord&, const SlotRecord&) = default;
};

struct ParticipantLog {
  std::string name;
  std::vector<SlotRecord> records;  // strictly increasing t

  const SlotRecord* find(std::int64_t t) const;

  friend bool operator==(const ParticipantLog&, const ParticipantLog&) = default;
};

struct SessionData {
  ChannelSpec spec;
  std::int64_t num_slots = 0;    // Alice-originated slots
  std::int64_t total_slots = 0;  // including padding slots
  std::uint64_t seed = 0;

  std::vector<ParticipantLog> logs;      // A, R1..Rn, B in chain order
  std::vector<ParticipantLog> eve_logs;  // EVE:L<link> taps and EVE:R<j> covert records

  std::vector<std::vector<std::int64_t>> dropout_slots;  // per relay, announced drop-outs
  std::vector<std::vector<std::int64_t>> padding_slots;  // per relay, pad-originated slots
  std::vector<std::int64_t> erased_slots;

  int relay_count() const { return static_cast<int>(logs.size()) - 2; }
  const ParticipantLog& alice() const { return logs.front(); }
  const ParticipantLog& bob() const { return logs.back(); }
  const ParticipantLog& relay(int j) const { return logs.at(j); }  // 1-based
  bool dropped(int relay_j, std::int64_t t) const;
  const ParticipantLog* eve_log(const std::string& name) const;

  // Physical forwarding time of slot t out of a batching relay; identity
  // scheduling otherwise. Batching shifts transmission times only, the
  // logical slot identity is announced alongside and recorded here.
  std::int64_t physical_send_time(std::int64_t t) const;

  friend bool operator==(const SessionData&, const SessionData&) = default;
};

// Runs one session. Deterministic: identical (spec, num_slots, seed) produce
// identical SessionData. Basis choices are i.i.d. fair coins for every
// participant; erasure deletes a slot for all downstream participants.
SessionData run_session(const ChannelSpec& spec, std::int64_t num_slots, std::uint64_t seed);

struct LinkCheck {
  // open[j] is basis equality across link j; unset when an endpoint has no
  // record (dropped out, erased or padding upstream).
  std::vector<std::optional<bool>> open;
  std::vector<int> missing;  // participant positions without a record at t
  // false iff some open link with both records shows unequal bits
  bool bits_propagate = true;
};

LinkCheck propagation_check(const SessionData& session, std::int64_t t);

// Line-oriented versioned log format:
//   qkdlab-log v1
//   #meta <key>=<value> ...
//   t,participant,c,b,flags
void write_session_log(const SessionData& session, std::ostream& out);

struct LogFormatError : std::runtime_error {
  LogFormatError(const std::string& msg, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_number(line) {}
  std::size_t line_number;
};

SessionData read_session_log(std::istream& in);  // throws LogFormatError

}  // namespace qkdlab
