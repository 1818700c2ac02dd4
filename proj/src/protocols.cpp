#include "qkdlab/protocols.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <stdexcept>

namespace qkdlab {

namespace {

struct Overlap {
  std::int64_t t;
  const SlotRecord* a;
  const SlotRecord* b;
};

std::vector<Overlap> shared_slots(std::span<const SlotRecord> alice,
                                  std::span<const SlotRecord> bob) {
  std::vector<Overlap> out;
  std::size_t i = 0, j = 0;
  while (i < alice.size() && j < bob.size()) {
    if (alice[i].t < bob[j].t) ++i;
    else if (bob[j].t < alice[i].t) ++j;
    else {
      out.push_back({alice[i].t, &alice[i], &bob[j]});
      ++i;
      ++j;
    }
  }
  return out;
}

void check_fraction(double f) {
  if (f < 0.0 || f > 1.0) throw std::invalid_argument("sample_fraction must be in [0,1]");
}

// Splits kept slots into key material and a compared sample, filling the
// estimate from the sample disagreements.
void finish_keys(std::vector<std::pair<std::int64_t, std::pair<Bit, Bit>>> kept,
                 double sample_fraction, Rng& rng, SiftedKey& a, SiftedKey& b,
                 bool renumber) {
  std::int64_t next = 1;
  for (auto& [t, bits] : kept) {
    if (rng.bernoulli(sample_fraction)) {
      a.sample_slots.push_back(t);
      b.sample_slots.push_back(t);
      ++a.compared;
      if (bits.first != bits.second) ++a.disagreements;
    } else {
      const std::int64_t slot = renumber ? next++ : t;
      a.slots.emplace_back(slot, bits.first);
      b.slots.emplace_back(slot, bits.second);
    }
  }
  if (a.compared > 0) {
    a.qber_estimate = static_cast<double>(a.disagreements) / static_cast<double>(a.compared);
    a.qber_defined = true;
  }
  b.compared = a.compared;
  b.disagreements = a.disagreements;
  b.qber_estimate = a.qber_estimate;
  b.qber_defined = a.qber_defined;
}

}  // namespace

std::pair<SiftedKey, SiftedKey> sift_bb84(std::span<const SlotRecord> alice,
                                          std::span<const SlotRecord> bob,
                                          double sample_fraction, Rng& rng) {
  check_fraction(sample_fraction);
  SiftedKey ka, kb;
  std::vector<std::pair<std::int64_t, std::pair<Bit, Bit>>> kept;
  for (const Overlap& o : shared_slots(alice, bob)) {
    if (o.a->c != o.b->c) continue;
    kept.push_back({o.t, {o.a->b, o.b->b}});
  }
  finish_keys(std::move(kept), sample_fraction, rng, ka, kb, false);
  return {std::move(ka), std::move(kb)};
}

std::pair<SiftedKey, SiftedKey> bit_revelation(std::span<const SlotRecord> alice,
                                               std::span<const SlotRecord> bob,
                                               double sample_fraction, Rng& rng) {
  check_fraction(sample_fraction);
  SiftedKey ka, kb;
  std::vector<std::pair<std::int64_t, std::pair<Bit, Bit>>> kept;
  for (const Overlap& o : shared_slots(alice, bob)) {
    if (o.a->b == o.b->b) continue;  // revealed bits agree: discarded
    const Bit alice_key = basis_bit(o.a->c);
    const Bit bob_key = basis_bit(complement(o.b->c));
    kept.push_back({o.t, {alice_key, bob_key}});
  }
  finish_keys(std::move(kept), sample_fraction, rng, ka, kb, true);
  return {std::move(ka), std::move(kb)};
}

DuplexLogs run_duplex_session(std::int64_t num_slots, bool eve, std::uint64_t seed) {
  if (num_slots < 1) throw std::invalid_argument("num_slots must be >= 1");
  Rng root(seed);
  Rng ar = root.child("A");
  Rng br = root.child("B");
  Rng er = root.child("eve");

  DuplexLogs logs;
  for (std::int64_t t = 1; t <= num_slots; ++t) {
    const bool odd = (t % 2) == 1;
    Rng& sender = odd ? ar : br;
    Rng& receiver = odd ? br : ar;
    const Basis cs = random_basis(sender);
    const Bit bs = random_bit(sender);
    Qubit q = prepare(cs, bs);
    if (eve) {
      const Basis ce = random_basis(er);
      q = measure(q, ce, er).post;
    }
    const Basis cr = random_basis(receiver);
    const Bit brx = measure(q, cr, receiver).bit;
    (odd ? logs.odd : logs.even).push_back({t, cs, bs, cr, brx});
  }
  return logs;
}

DuplexSets duplex_filter(const DuplexLogs& duplex) {
  DuplexSets sets;
  for (const DuplexLogs::Leg& leg : duplex.odd)
    (leg.sender_basis == leg.receiver_basis ? sets.set2 : sets.set1).push_back(leg.t);
  for (const DuplexLogs::Leg& leg : duplex.even)
    (leg.sender_basis == leg.receiver_basis ? sets.set3 : sets.set1).push_back(leg.t);
  std::sort(sets.set1.begin(), sets.set1.end());
  return sets;
}

DuplexResult duplex_parity(const DuplexLogs& duplex, DuplexPairing pairing) {
  const DuplexSets sets = duplex_filter(duplex);
  if (sets.set2.empty() || sets.set3.empty())
    throw std::invalid_argument("duplex_parity needs nonempty sets 2 and 3");

  std::map<std::int64_t, const DuplexLogs::Leg*> odd_by_t, even_by_t;
  for (const auto& leg : duplex.odd) odd_by_t[leg.t] = &leg;
  for (const auto& leg : duplex.even) even_by_t[leg.t] = &leg;
  auto odd_leg = [&](std::int64_t t) -> const DuplexLogs::Leg& { return *odd_by_t.at(t); };
  auto even_leg = [&](std::int64_t t) -> const DuplexLogs::Leg& { return *even_by_t.at(t); };

  DuplexResult result;
  std::vector<std::pair<std::int64_t, std::int64_t>> paired;

  if (pairing == DuplexPairing::Sequential) {
    const std::size_t count = std::min(sets.set2.size(), sets.set3.size());
    for (std::size_t i = 0; i < count; ++i) paired.emplace_back(sets.set2[i], sets.set3[i]);
    result.unpaired = static_cast<std::int64_t>(sets.set2.size() + sets.set3.size() - 2 * count);
  } else {
    // Greedy FIFO on equal recorded bit values; Bob announces indices only.
    std::deque<std::int64_t> pool[2];
    for (std::int64_t t : sets.set3) pool[even_leg(t).sender_bit].push_back(t);
    for (std::int64_t t : sets.set2) {
      const Bit want = odd_leg(t).receiver_bit;  // Bob's measured bit b_B
      if (pool[want].empty()) {
        ++result.unpaired;
        continue;
      }
      paired.emplace_back(t, pool[want].front());
      pool[want].pop_front();
    }
    result.unpaired += static_cast<std::int64_t>(pool[0].size() + pool[1].size());
  }

  result.alice.provenance = "duplex;side=A";
  result.bob.provenance = "duplex;side=B";
  for (const auto& [t, t_tilde] : paired) {
    const DuplexLogs::Leg& o = odd_leg(t);
    const DuplexLogs::Leg& e = even_leg(t_tilde);
    const Bit f = pairing == DuplexPairing::Sequential
                      ? static_cast<Bit>(o.receiver_bit ^ e.sender_bit)
                      : Bit{0};
    result.tuples.push_back({t, t_tilde, f});
    ++result.checked;
    // Alice verifies her recorded bits from the two timeslots against the
    // announced flip; failed pairs carry no key bit.
    const Bit alice_odd = o.sender_bit;     // b_A
    const Bit alice_even = e.receiver_bit;  // b~_A
    if (alice_odd != (alice_even ^ f)) {
      ++result.alice_failures;
      continue;
    }
    // (b, b~) in {(0,1),(0,0)} -> 0, {(1,0),(1,1)} -> 1: the set-2 bit.
    result.alice.bits.push_back(alice_odd);
    result.bob.bits.push_back(o.receiver_bit);
  }
  return result;
}

std::string parity_tuple_record(const ParityTuple& tuple) {
  return "tuple," + std::to_string(tuple.t) + ',' + std::to_string(tuple.t_tilde) + ',' +
         std::to_string(int(tuple.f));
}

RandomizedResult randomize_postprocessing(std::span<const SlotRecord> alice,
                                          std::span<const SlotRecord> bob,
                                          const ProtocolWeights& weights,
                                          double sample_fraction, Rng& rng) {
  if (weights.standard < 0 || weights.bit_rev < 0 ||
      std::abs(weights.standard + weights.bit_rev - 1.0) > 1e-9)
    throw std::invalid_argument("protocol weights must be nonnegative and sum to 1");

  Rng assign = rng.child("assign");
  std::vector<SlotRecord> a_std, b_std, a_rev, b_rev;
  std::size_t i = 0, j = 0;
  while (i < alice.size() && j < bob.size()) {
    if (alice[i].t < bob[j].t) ++i;
    else if (bob[j].t < alice[i].t) ++j;
    else {
      const bool standard = assign.uniform() < weights.standard;
      (standard ? a_std : a_rev).push_back(alice[i]);
      (standard ? b_std : b_rev).push_back(bob[j]);
      ++i;
      ++j;
    }
  }
  RandomizedResult result;
  result.standard_slots = static_cast<std::int64_t>(a_std.size());
  result.revelation_slots = static_cast<std::int64_t>(a_rev.size());
  Rng std_rng = rng.child("standard");
  Rng rev_rng = rng.child("revelation");
  result.standard = sift_bb84(a_std, b_std, sample_fraction, std_rng);
  result.revelation = bit_revelation(a_rev, b_rev, sample_fraction, rev_rng);
  return result;
}

}  // namespace qkdlab
