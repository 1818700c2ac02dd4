// Drop-out secret sharing: relays pass the signal through unmeasured at
// random, slots with exactly the required number of active relays form
// logical channels, each channel keys independently via bit transport, and
// the final key is the XOR of the per-channel shares. A relay that secretly
// stays always-on shows up as an intercept/resend eavesdropper on every
// channel that excludes it.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qkdlab/network.hpp"
#include "qkdlab/transport.hpp"

namespace qkdlab {

struct DropoutParams {
  int relay_count = 0;
  double dropout_p = 0.0;
  int required = -1;  // minimum active relays to span the distance; default n-1

  int effective_required() const { return required < 0 ? relay_count - 1 : required; }
  void validate() const;
};

// Probability that at least `required` relays are active in a timeslot.
// For required = n-1 this is (1-p)^n + n p (1-p)^(n-1).
double predict_open(const DropoutParams& params);

// Fraction of timeslots useful for key formation: exactly `required` relays
// active. For required = n-1 this is f = n p (1-p)^(n-1).
double predict_useful(const DropoutParams& params);

struct LogicalChannelKey {
  std::vector<int> active;  // sorted relay indices (1-based)
  std::int64_t slot_count = 0;
  KeyShare alice, bob;
  std::vector<TransportPair> announcements;
  double qber = 0.0;  // full disagreement rate between the two shares
  std::int64_t compared = 0;
};

struct SharedKeyResult {
  std::vector<LogicalChannelKey> shares;
  KeyShare alice_final, bob_final;  // XOR of shares, truncated to the shortest
  double predicted_open = 0.0, predicted_useful = 0.0;
  double measured_open = 0.0, measured_useful = 0.0;
  bool coverage_ok = false;
  bool complete = false;  // false when some logical channel produced no key
};

struct EstablishOptions {
  int required = -1;  // default n-1
  AssembleOptions assemble;
};

// Groups the session's slots by the announced active relay set, keys each
// |active| == required group over the contracted chain (dropped relays fuse
// their adjacent links), and combines the shares.
SharedKeyResult establish_shared_key(const SessionData& session,
                                     const EstablishOptions& options = {});

// Condition (ii): every relay is absent from at least one channel used to
// form the key. (Condition (i), A and B in every channel, holds by
// construction here.)
bool check_coverage(std::span<const std::vector<int>> active_sets, int relay_count);

struct CompromiseReport {
  struct Row {
    std::vector<int> active;
    double qber = 0.0;
    std::int64_t compared = 0;
    bool flagged = false;
  };
  std::vector<Row> rows;
  std::vector<int> suspects;  // relays whose every excluding channel is flagged
  SharedKeyResult result;
};

// Per-logical-channel error report: a channel excluding an always-on relay
// shows the intercept/resend error rate of 1/4, channels including it stay
// clean.
CompromiseReport detect_compromised(const SessionData& session,
                                    const EstablishOptions& options = {},
                                    double flag_threshold = 0.1);

// Announcement record for the per-slot drop-out bitmap (bit j-1 set when
// relay j announced drop-out at t): dropout,<t>,<bitmask>
std::string dropout_record(std::int64_t t, unsigned bitmask);

}  // namespace qkdlab
