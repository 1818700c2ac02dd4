#include "qkdlab/transport.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>

namespace qkdlab {

PartitionId::PartitionId(std::vector<Basis> bases) : bases_(std::move(bases)) {
  if (bases_.size() < 2) throw std::invalid_argument("partition needs at least A and B");
}

PartitionId PartitionId::from_string(std::string_view s) {
  std::vector<Basis> bases;
  bases.reserve(s.size());
  for (char ch : s) {
    if (ch == 'X') bases.push_back(Basis::X);
    else if (ch == 'Y') bases.push_back(Basis::Y);
    else throw std::invalid_argument("partition symbols must be X or Y");
  }
  return PartitionId(std::move(bases));
}

std::string PartitionId::str() const {
  std::string s;
  s.reserve(bases_.size());
  for (Basis c : bases_) s.push_back(basis_char(c));
  return s;
}

std::vector<bool> PartitionId::openness() const {
  std::vector<bool> open(bases_.size() - 1);
  for (std::size_t j = 0; j + 1 < bases_.size(); ++j) open[j] = bases_[j] == bases_[j + 1];
  return open;
}

bool PartitionId::fully_open() const {
  const auto o = openness();
  return std::all_of(o.begin(), o.end(), [](bool v) { return v; });
}

bool PartitionId::fully_closed() const {
  const auto o = openness();
  return std::none_of(o.begin(), o.end(), [](bool v) { return v; });
}

PartitionId dual(const PartitionId& s) {
  std::vector<Basis> out;
  out.reserve(s.size());
  out.push_back(s.at(0));
  const std::vector<bool> open = s.openness();
  for (int j = 1; j < s.size(); ++j) {
    const bool want_open = !open[j - 1];
    out.push_back(want_open ? out.back() : complement(out.back()));
  }
  return PartitionId(std::move(out));
}

PartitionId paper_mask_dual(const PartitionId& s) {
  const Basis ca = s.at(0);
  std::vector<Basis> out;
  out.reserve(s.size());
  for (int i = 0; i < s.size(); ++i) {
    const Basis mask = (i % 2 == 0) ? ca : complement(ca);
    const Bit b = basis_bit(s.at(i)) ^ basis_bit(mask);
    out.push_back(b ? Basis::Y : Basis::X);
  }
  return PartitionId(std::move(out));
}

std::vector<int> pivot_relays(const PartitionId& s) {
  if (s.fully_open() || s.fully_closed())
    throw std::invalid_argument("pivots are undefined for fully open or fully closed channels");
  const std::vector<bool> open = s.openness();
  std::vector<int> pivots;
  for (std::size_t j = 1; j < open.size(); ++j)
    if (open[j - 1] != open[j]) pivots.push_back(static_cast<int>(j));
  return pivots;
}

namespace {

// Appends every slot of `session` in which all chain participants recorded.
void partition_into(const SessionData& session, int session_index, PartitionMap& parts) {
  const int participants = session.relay_count() + 2;
  std::vector<std::size_t> cursor(participants, 0);
  for (const SlotRecord& a : session.alice().records) {
    const std::int64_t t = a.t;
    std::vector<Basis> bases(participants);
    bases[0] = a.c;
    bool complete = true;
    for (int pos = 1; pos < participants && complete; ++pos) {
      const auto& records = session.logs[pos].records;
      std::size_t& i = cursor[pos];
      while (i < records.size() && records[i].t < t) ++i;
      if (i < records.size() && records[i].t == t) bases[pos] = records[i].c;
      else complete = false;
    }
    if (!complete) continue;
    parts[PartitionId(std::move(bases))].push_back({session_index, t});
  }
}

Bit record_bit(std::span<const SessionData> sessions, int pos, SlotRef ref) {
  const SlotRecord* rec = sessions[ref.session].logs[pos].find(ref.t);
  if (!rec) throw std::logic_error("missing record for partitioned slot");
  return rec->b;
}

struct WalkPlan {
  bool start_in_first = true;
  std::vector<int> switches;  // participant positions (relays) where the walk swaps slot
  bool end_in_first = true;
};

// Walks A -> B across the two slots, staying in the current slot while its
// next link is open and swapping otherwise. Requires joint coverage:
// o1[j] or o2[j] for every link j.
WalkPlan plan_walk(const std::vector<bool>& o1, const std::vector<bool>& o2) {
  WalkPlan plan;
  plan.start_in_first = o1[0];
  bool in_first = plan.start_in_first;
  for (std::size_t j = 0; j < o1.size(); ++j) {
    const bool open = in_first ? o1[j] : o2[j];
    if (!open) {
      plan.switches.push_back(static_cast<int>(j));
      in_first = !in_first;
      if (!(in_first ? o1[j] : o2[j]))
        throw std::logic_error("paired channels do not cover every link");
    }
  }
  plan.end_in_first = in_first;
  return plan;
}

bool covers(const std::vector<bool>& o1, const std::vector<bool>& o2) {
  for (std::size_t j = 0; j < o1.size(); ++j)
    if (!o1[j] && !o2[j]) return false;
  return true;
}

TransportPair make_pair(const PartitionId& s1, const PartitionId& s2, SlotRef t1, SlotRef t2,
                        std::span<const SessionData> sessions, bool with_parity, bool scavenged) {
  TransportPair pair;
  pair.channel_1 = s1;
  pair.channel_2 = s2;
  pair.t1 = t1;
  pair.t2 = t2;
  pair.scavenged = scavenged;
  const WalkPlan plan = plan_walk(s1.openness(), s2.openness());
  pair.switch_relays = plan.switches;
  pair.t_alice = plan.start_in_first ? t1 : t2;
  pair.t_bob = plan.end_in_first ? t1 : t2;
  if (with_parity) {
    pair.parity.reserve(plan.switches.size());
    for (int j : plan.switches)
      pair.parity.push_back(record_bit(sessions, j, t1) ^ record_bit(sessions, j, t2));
  }
  return pair;
}

}  // namespace

PartitionMap partition(const SessionData& session) {
  PartitionMap parts;
  partition_into(session, 0, parts);
  return parts;
}

PartitionMap partition(std::span<const SessionData> sessions) {
  PartitionMap parts;
  for (std::size_t i = 0; i < sessions.size(); ++i)
    partition_into(sessions[i], static_cast<int>(i), parts);
  return parts;
}

std::vector<TransportPair> match_pairs(const PartitionId& s,
                                       std::span<const SlotRef> slots_s,
                                       std::span<const SlotRef> slots_dual,
                                       std::span<const SessionData> sessions,
                                       TransportMode mode) {
  const PartitionId d = dual(s);
  std::vector<TransportPair> pairs;
  if (mode == TransportMode::ParityAnnounce) {
    const std::size_t count = std::min(slots_s.size(), slots_dual.size());
    pairs.reserve(count);
    for (std::size_t i = 0; i < count; ++i)
      pairs.push_back(make_pair(s, d, slots_s[i], slots_dual[i], sessions, true, false));
    return pairs;
  }

  // Greedy FIFO within buckets keyed by the pivot-relay bit vector: a pair
  // forms only if every pivot relay recorded the same bit in both slots.
  const std::vector<int> pivots = pivot_relays(s);
  auto bucket_key = [&](SlotRef ref) {
    std::string key;
    key.reserve(pivots.size());
    for (int j : pivots) key.push_back(static_cast<char>('0' + record_bit(sessions, j, ref)));
    return key;
  };
  std::map<std::string, std::pair<std::deque<SlotRef>, std::deque<SlotRef>>> buckets;
  for (SlotRef ref : slots_s) buckets[bucket_key(ref)].first.push_back(ref);
  for (SlotRef ref : slots_dual) buckets[bucket_key(ref)].second.push_back(ref);
  for (auto& [key, queues] : buckets) {
    auto& [qs, qd] = queues;
    while (!qs.empty() && !qd.empty()) {
      pairs.push_back(make_pair(s, d, qs.front(), qd.front(), sessions, false, false));
      qs.pop_front();
      qd.pop_front();
    }
  }
  std::sort(pairs.begin(), pairs.end(),
            [](const TransportPair& a, const TransportPair& b) { return a.t1 < b.t1; });
  return pairs;
}

namespace {

AssembleResult assemble_impl(std::span<const SessionData> sessions, const AssembleOptions& options) {
  if (sessions.empty()) throw std::invalid_argument("no sessions to assemble");
  const int n = sessions[0].relay_count();
  for (const SessionData& s : sessions)
    if (s.relay_count() != n)
      throw std::invalid_argument("sessions disagree on relay count (topology mismatch)");

  AssembleResult result;
  PartitionMap parts = partition(sessions);
  for (const auto& [id, slots] : parts) result.partitioned_slots += slots.size();

  struct Entry {
    SlotRef order;
    Bit alice, bob;
  };
  std::vector<Entry> open_entries;
  std::vector<Entry> pair_entries;
  std::vector<std::pair<PartitionId, std::vector<SlotRef>>> leftovers;

  auto alice_bob_bits = [&](const TransportPair& pair) -> Entry {
    Bit a = record_bit(sessions, 0, pair.t_alice);
    Bit b = record_bit(sessions, n + 1, pair.t_bob);
    for (Bit p : pair.parity) b ^= p;  // parity correction applied on Bob's side
    return {pair.t_alice, a, b};
  };

  for (const auto& [id, slots] : parts) {
    if (id.fully_open()) {
      for (SlotRef ref : slots)
        open_entries.push_back({ref, record_bit(sessions, 0, ref), record_bit(sessions, n + 1, ref)});
      result.open_slot_bits += slots.size();
      continue;
    }
    if (id.fully_closed()) {
      result.discarded_closed += slots.size();
      continue;
    }
    const PartitionId d = dual(id);
    if (d < id && parts.count(d)) continue;  // handled from the other side
    const std::vector<SlotRef> empty;
    const std::vector<SlotRef>& dual_slots = parts.count(d) ? parts.at(d) : empty;
    std::vector<TransportPair> pairs = match_pairs(id, slots, dual_slots, sessions, options.mode);
    if (options.scavenge) {
      // Collect the slots each side left unmatched, in order.
      std::vector<SlotRef> used1, used2;
      used1.reserve(pairs.size());
      used2.reserve(pairs.size());
      for (const TransportPair& pair : pairs) {
        used1.push_back(pair.t1);
        used2.push_back(pair.t2);
      }
      std::sort(used1.begin(), used1.end());
      std::sort(used2.begin(), used2.end());
      auto remaining = [](const std::vector<SlotRef>& all, const std::vector<SlotRef>& used) {
        std::vector<SlotRef> rest;
        for (SlotRef ref : all)
          if (!std::binary_search(used.begin(), used.end(), ref)) rest.push_back(ref);
        return rest;
      };
      std::vector<SlotRef> rest1 = remaining(slots, used1);
      std::vector<SlotRef> rest2 = remaining(dual_slots, used2);
      if (!rest1.empty()) leftovers.emplace_back(id, std::move(rest1));
      if (!rest2.empty()) leftovers.emplace_back(d, std::move(rest2));
    } else {
      result.unmatched += slots.size() + dual_slots.size() - 2 * pairs.size();
    }
    for (TransportPair& pair : pairs) {
      pair_entries.push_back(alice_bob_bits(pair));
      result.pairs.push_back(std::move(pair));
    }
  }

  if (options.scavenge) {
    // Most-constrained channels (fewest open links) pick partners first.
    auto open_count = [](const PartitionId& id) {
      const auto o = id.openness();
      return std::count(o.begin(), o.end(), true);
    };
    std::sort(leftovers.begin(), leftovers.end(), [&](const auto& a, const auto& b) {
      const auto ca = open_count(a.first), cb = open_count(b.first);
      if (ca != cb) return ca < cb;
      return a.first < b.first;
    });
    for (std::size_t i = 0; i < leftovers.size(); ++i) {
      auto& [id1, slots1] = leftovers[i];
      if (slots1.empty()) continue;
      const auto o1 = id1.openness();
      for (std::size_t j = i + 1; j < leftovers.size() && !slots1.empty(); ++j) {
        auto& [id2, slots2] = leftovers[j];
        if (slots2.empty() || !covers(o1, id2.openness())) continue;
        std::size_t take = std::min(slots1.size(), slots2.size());
        for (std::size_t k = 0; k < take; ++k) {
          TransportPair pair = make_pair(id1, id2, slots1[k], slots2[k], sessions, true, true);
          pair_entries.push_back(alice_bob_bits(pair));
          result.pairs.push_back(std::move(pair));
        }
        slots1.erase(slots1.begin(), slots1.begin() + take);
        slots2.erase(slots2.begin(), slots2.begin() + take);
      }
    }
    for (const auto& [id, rest] : leftovers) result.unmatched += rest.size();
  }

  auto by_order = [](const Entry& a, const Entry& b) { return a.order < b.order; };
  std::sort(open_entries.begin(), open_entries.end(), by_order);
  std::sort(pair_entries.begin(), pair_entries.end(), by_order);
  std::sort(result.pairs.begin(), result.pairs.end(),
            [](const TransportPair& a, const TransportPair& b) { return a.t_alice < b.t_alice; });

  auto& ab = result.alice.bits;
  auto& bb = result.bob.bits;
  ab.reserve(open_entries.size() + pair_entries.size());
  bb.reserve(ab.capacity());
  for (const Entry& e : open_entries) {
    ab.push_back(e.alice);
    bb.push_back(e.bob);
  }
  for (const Entry& e : pair_entries) {
    ab.push_back(e.alice);
    bb.push_back(e.bob);
  }

  std::string prov = "transport:";
  prov += options.mode == TransportMode::MatchedBits ? "matched" : "parity";
  if (options.scavenge) prov += "+scavenge";
  prov += ";sessions=" + std::to_string(sessions.size());
  prov += ";seed=" + std::to_string(sessions[0].seed);
  result.alice.provenance = prov + ";side=A";
  result.bob.provenance = prov + ";side=B";
  return result;
}

}  // namespace

AssembleResult assemble_key(const SessionData& session, const AssembleOptions& options) {
  return assemble_impl(std::span<const SessionData>(&session, 1), options);
}

AssembleResult async_assemble(std::span<const SessionData> sessions, const AssembleOptions& options) {
  return assemble_impl(sessions, options);
}

std::string announcement_record(const TransportPair& pair) {
  std::string s = "pair," + std::to_string(pair.t_alice.session) + ',' +
                  std::to_string(pair.t_alice.t) + ',' + std::to_string(pair.t_bob.session) + ',' +
                  std::to_string(pair.t_bob.t) + ',';
  for (Bit p : pair.parity) s.push_back(static_cast<char>('0' + p));
  return s;
}

}  // namespace qkdlab
