// GHZ-type intermediary scheme: a node prepares three-qubit states
// (|B1,0> + |B3,1>)/sqrt2, sends the first two particles to Alice and Bob
// (optionally shuffling Bob's deliveries across timeslots), later measures
// its held particles and publishes the resulting bit string plus the
// timeslot association list. Alice and Bob key on the inferred parity.
// The meet-in-the-middle attack Bell-measures both transiting particles of
// each physical timeslot and resends the measured Bell state.
#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "qkdlab/statevector.hpp"

namespace qkdlab {

enum class GhzEve : std::uint8_t { None, BellResend };

struct GhzOptions {
  std::int64_t triples = 0;
  bool shuffle = false;      // permute Bob's deliveries over the timeslots
  bool derangement = false;  // with shuffle: no timeslot keeps its own triple
  GhzEve eve = GhzEve::None;
};

class GhzSession {
 public:
  std::int64_t triple_count() const { return static_cast<std::int64_t>(m_.size()); }
  const std::vector<std::int64_t>& shuffle() const { return shuffle_; }       // bob ts -> triple
  const std::vector<Bit>& published_m() const { return m_; }                  // by triple index
  const std::vector<std::pair<std::int64_t, std::int64_t>>& associations() const {
    return associations_;  // (alice ts, bob ts) per triple, in triple order
  }
  const std::vector<BellOutcome>& eve_outcomes() const { return eve_outcomes_; }  // per physical ts

  // Measures the stored particle delivered in the given timeslot; each side
  // of a timeslot can be measured once.
  Bit measure_alice(std::int64_t ts, double angle, Rng& rng);
  Bit measure_bob(std::int64_t ts, double angle, Rng& rng);
  bool alice_measured(std::int64_t ts) const { return alice_done_[ts]; }
  bool bob_measured(std::int64_t ts) const { return bob_done_[ts]; }

 private:
  friend GhzSession run_ghz_session(const GhzOptions&, Rng&);

  struct Handle {
    int holder = -1;
    int qubit = 0;
  };
  Bit measure_handle(Handle h, double angle, Rng& rng);

  std::vector<std::int64_t> shuffle_;
  std::vector<Bit> m_;
  std::vector<std::pair<std::int64_t, std::int64_t>> associations_;
  std::vector<BellOutcome> eve_outcomes_;
  std::vector<PureState> holders_;
  std::vector<Handle> alice_handles_, bob_handles_;  // by timeslot
  std::vector<bool> alice_done_, bob_done_;
};

// Prepares the triples, applies the optional attack per physical timeslot,
// has the intermediary measure and publish m, and leaves Alice's and Bob's
// particles stored for later measurement.
GhzSession run_ghz_session(const GhzOptions& options, Rng& rng);

struct GhzKeyResult {
  std::vector<Bit> alice_bits;
  std::vector<Bit> bob_bits;  // parity-corrected: b xor m
  std::int64_t pairs = 0;
  std::int64_t disagreements = 0;
  double agreement_rate = 1.0;
};

// Computational measurement of every still-stored association; Alice keys on
// her bit, Bob on his bit xor the published m.
GhzKeyResult derive_key(GhzSession& session, Rng& rng);

struct BellCheckResult {
  double s_value = 0.0;
  std::int64_t sampled = 0;
};

// Consumes a random sample of associations for an empirical CHSH check; the
// sampled timeslots are lost to key material. Returns nothing when
// sample_fraction is 0 or no association was drawn.
std::optional<BellCheckResult> bell_check(GhzSession& session, double sample_fraction, Rng& rng);

// Announcement records: ghz_m,<bitstring> and assoc,<alice_ts>,<bob_ts>
std::string ghz_m_record(const std::vector<Bit>& m);
std::string association_record(std::int64_t alice_ts, std::int64_t bob_ts);

}  // namespace qkdlab
