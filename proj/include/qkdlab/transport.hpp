// Bit transport: partitions session logs into logical channels by the basis
// string c_A c_1 ... c_n c_B, derives dual channels, matches slot pairs so a
// single bit propagates end to end, and assembles the A/B key with the relay
// announcements that make it possible.
#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "qkdlab/network.hpp"

namespace qkdlab {

// The basis string naming one logical channel; one symbol per participant.
class PartitionId {
 public:
  PartitionId() = default;
  explicit PartitionId(std::vector<Basis> bases);
  static PartitionId from_string(std::string_view s);  // e.g. "XXXY"

  std::string str() const;
  int size() const { return static_cast<int>(bases_.size()); }
  Basis at(int i) const { return bases_.at(i); }

  // open[j] = (bases[j] == bases[j+1]); adjacent participants with the same
  // coding basis could key on that link directly.
  std::vector<bool> openness() const;
  bool fully_open() const;
  bool fully_closed() const;

  auto operator<=>(const PartitionId&) const = default;

 private:
  std::vector<Basis> bases_;
};

// The unique channel with the same Alice symbol and elementwise-complemented
// link openness. An involution; fully open and fully closed channels pair
// with each other.
PartitionId dual(const PartitionId& s);

// The literal XOR-mask form (s xor c_A c~_A c_A c~_A ...). Coincides with
// dual() whenever c_A = X; for c_A = Y it flips Alice's symbol and is not an
// involution. Kept for comparison only.
PartitionId paper_mask_dual(const PartitionId& s);

// Relays where end-to-end propagation must switch between the two slots of a
// dual pair: { j >= 1 : open[j-1] != open[j] }. Undefined (throws) for fully
// open or fully closed channels.
std::vector<int> pivot_relays(const PartitionId& s);

struct SlotRef {
  int session = 0;
  std::int64_t t = 0;

  auto operator<=>(const SlotRef&) const = default;
};

using PartitionMap = std::map<PartitionId, std::vector<SlotRef>>;

// Every non-erased, non-padding slot in which all chain participants hold a
// record lands in exactly one partition.
PartitionMap partition(const SessionData& session);
PartitionMap partition(std::span<const SessionData> sessions);  // multi-session, same topology

struct TransportPair {
  PartitionId channel_1, channel_2;  // channel_2 == dual(channel_1) unless scavenged
  SlotRef t1, t2;
  std::vector<int> switch_relays;  // where the end-to-end walk changes slot
  SlotRef t_alice, t_bob;          // the member slots whose first/last link is open
  std::vector<Bit> parity;         // per switch relay, announced in parity mode
  bool scavenged = false;
};

enum class TransportMode : std::uint8_t {
  // Pair slots whose pivot-relay bits coincide (greedy FIFO within buckets
  // keyed by the pivot bit vector); announcements carry slot indices only.
  MatchedBits,
  // Pair slots FIFO and have each switch relay announce the parity of its two
  // bits; no bits are wasted to bucket imbalance.
  ParityAnnounce,
};

struct AssembleOptions {
  TransportMode mode = TransportMode::MatchedBits;
  // Second pass pairing leftover slots across coverage-compatible channels
  // (joint openness spans every link). Parity mode only.
  bool scavenge = false;
};

struct KeyShare {
  std::vector<Bit> bits;
  std::string provenance;
};

struct AssembleResult {
  KeyShare alice, bob;
  std::vector<TransportPair> pairs;  // the announcements
  std::int64_t open_slot_bits = 0;
  std::int64_t discarded_closed = 0;
  std::int64_t unmatched = 0;
  std::int64_t partitioned_slots = 0;

  double rate(std::int64_t num_slots) const {
    return num_slots > 0 ? static_cast<double>(alice.bits.size()) / static_cast<double>(num_slots) : 0.0;
  }
};

// Pairs slots of channel s with slots of dual(s). Exposed for tests; the
// session spans let pairs resolve relay bits for matching and parities.
std::vector<TransportPair> match_pairs(const PartitionId& s,
                                       std::span<const SlotRef> slots_s,
                                       std::span<const SlotRef> slots_dual,
                                       std::span<const SessionData> sessions,
                                       TransportMode mode);

AssembleResult assemble_key(const SessionData& session, const AssembleOptions& options = {});

// Same semantics with buckets spanning the stored sessions; slot identities
// are (session, t). Throws std::invalid_argument on topology mismatch.
AssembleResult async_assemble(std::span<const SessionData> sessions,
                              const AssembleOptions& options = {});

// Announcement records: pair,<sess1>,<t_alice>,<sess2>,<t_bob>,<parity bits>
std::string announcement_record(const TransportPair& pair);

}  // namespace qkdlab
