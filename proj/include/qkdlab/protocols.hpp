// Classical post-processing protocol variants: standard sifting with sampled
// error estimation, key establishment by bit revelation (bit values public,
// basis bits secret), the duplex channel without public bit comparison, and
// per-slot protocol randomization.
#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qkdlab/network.hpp"
#include "qkdlab/transport.hpp"

namespace qkdlab {

struct SiftedKey {
  std::vector<std::pair<std::int64_t, Bit>> slots;  // (t, key bit); comparison slots removed
  std::vector<std::int64_t> sample_slots;           // consumed by the error estimate
  double qber_estimate = 0.0;
  bool qber_defined = false;
  std::int64_t compared = 0;
  std::int64_t disagreements = 0;
};

// Standard sifting: keeps matching-basis slots, spends a random
// sample_fraction of them on public comparison, reports the disagreement
// rate on that sample. sample_fraction = 1 compares everything.
std::pair<SiftedKey, SiftedKey> sift_bb84(std::span<const SlotRecord> alice,
                                          std::span<const SlotRecord> bob,
                                          double sample_fraction, Rng& rng);

// Bit revelation: Alice reveals b_A per slot and both discard slots where
// b_A = b_B. On a kept slot Bob has certainty that Alice's basis bit is the
// complement of his, so Alice keys on c_A and Bob on ~c_B. Surviving slots
// are renumbered 1..k. The sampled comparison checks c_A against ~c_B.
std::pair<SiftedKey, SiftedKey> bit_revelation(std::span<const SlotRecord> alice,
                                               std::span<const SlotRecord> bob,
                                               double sample_fraction, Rng& rng);

// Duplex channel: interleaved BB84 in both directions, photons from Alice in
// odd timeslots and from Bob in even ones (tilde values).
struct DuplexLogs {
  struct Leg {
    std::int64_t t;
    Basis sender_basis;
    Bit sender_bit;
    Basis receiver_basis;
    Bit receiver_bit;
  };
  std::vector<Leg> odd;   // A -> B
  std::vector<Leg> even;  // B -> A
};

// Simulates a duplex transmission over a direct link; eve applies an
// intercept/resend attack on both directions when set.
DuplexLogs run_duplex_session(std::int64_t num_slots, bool eve, std::uint64_t seed);

struct DuplexSets {
  std::vector<std::int64_t> set1;  // mismatched bases, discarded
  std::vector<std::int64_t> set2;  // remaining odd slots
  std::vector<std::int64_t> set3;  // remaining even slots
};

DuplexSets duplex_filter(const DuplexLogs& duplex);

enum class DuplexPairing : std::uint8_t {
  MatchEqual,  // Bob pairs slots whose recorded bits are equal, announces indices only
  Sequential,  // Bob pairs sets 2/3 in order and announces a parity flip bit
};

struct ParityTuple {
  std::int64_t t;        // from set 2
  std::int64_t t_tilde;  // from set 3
  Bit f;                 // 0 = no flip, 1 = flip
};

struct DuplexResult {
  std::vector<ParityTuple> tuples;
  std::int64_t checked = 0;
  std::int64_t alice_failures = 0;
  std::int64_t unpaired = 0;  // leftovers that found no partner
  KeyShare alice_key, bob_key;

  double failure_rate() const {
    return checked > 0 ? static_cast<double>(alice_failures) / static_cast<double>(checked) : 0.0;
  }
};

// Verification and key derivation over the parity tuples. Every filtered slot
// participates: a pair either passes verification and yields a key bit, fails
// (counted), or is reported unpaired. Final key bit per surviving pair is the
// set-2 bit: (b, b~) in {(0,1),(0,0)} -> 0 and {(1,0),(1,1)} -> 1.
DuplexResult duplex_parity(const DuplexLogs& duplex, DuplexPairing pairing);

std::string parity_tuple_record(const ParityTuple& tuple);

struct ProtocolWeights {
  double standard = 1.0;
  double bit_rev = 0.0;
};

struct RandomizedResult {
  std::pair<SiftedKey, SiftedKey> standard;
  std::pair<SiftedKey, SiftedKey> revelation;
  std::int64_t standard_slots = 0;
  std::int64_t revelation_slots = 0;
};

// Assigns every shared slot to one protocol stream at random per the weights
// and post-processes each stream independently.
RandomizedResult randomize_postprocessing(std::span<const SlotRecord> alice,
                                          std::span<const SlotRecord> bob,
                                          const ProtocolWeights& weights,
                                          double sample_fraction, Rng& rng);

}  // namespace qkdlab
