#include "qkdlab/ghz.hpp"

#include <algorithm>
#include <stdexcept>

namespace qkdlab {

namespace {

std::vector<std::int64_t> draw_permutation(std::int64_t m, bool derangement, Rng& rng) {
  std::vector<std::int64_t> perm(m);
  for (std::int64_t i = 0; i < m; ++i) perm[i] = i;
  if (m < 2) return perm;
  while (true) {
    for (std::int64_t i = m - 1; i > 0; --i)
      std::swap(perm[i], perm[rng.below(static_cast<std::uint64_t>(i) + 1)]);
    if (!derangement) return perm;
    bool fixed = false;
    for (std::int64_t i = 0; i < m && !fixed; ++i) fixed = perm[i] == i;
    if (!fixed) return perm;
  }
}

}  // namespace

Bit GhzSession::measure_handle(Handle h, double angle, Rng& rng) {
  if (h.holder < 0) throw std::logic_error("timeslot has no stored particle");
  return holders_[h.holder].measure_qubit(h.qubit, angle, rng);
}

Bit GhzSession::measure_alice(std::int64_t ts, double angle, Rng& rng) {
  if (alice_done_.at(ts)) throw std::logic_error("alice particle already measured");
  alice_done_[ts] = true;
  return measure_handle(alice_handles_[ts], angle, rng);
}

Bit GhzSession::measure_bob(std::int64_t ts, double angle, Rng& rng) {
  if (bob_done_.at(ts)) throw std::logic_error("bob particle already measured");
  bob_done_[ts] = true;
  return measure_handle(bob_handles_[ts], angle, rng);
}

GhzSession run_ghz_session(const GhzOptions& options, Rng& rng) {
  if (options.triples < 1) throw std::invalid_argument("triples must be >= 1");
  if (options.derangement && (!options.shuffle || options.triples < 2))
    throw std::invalid_argument("a derangement needs shuffle and at least 2 triples");
  const std::int64_t m = options.triples;

  GhzSession session;
  Rng shuffle_rng = rng.child("shuffle");
  Rng eve_rng = rng.child("eve");
  Rng mid_rng = rng.child("intermediary");
  Rng collapse_rng = rng.child("collapse");

  if (options.shuffle) {
    session.shuffle_ = draw_permutation(m, options.derangement, shuffle_rng);
  } else {
    session.shuffle_.resize(m);
    for (std::int64_t i = 0; i < m; ++i) session.shuffle_[i] = i;
  }

  std::vector<std::int64_t> inverse(m);
  for (std::int64_t ts = 0; ts < m; ++ts) inverse[session.shuffle_[ts]] = ts;

  session.m_.assign(m, 0);
  session.alice_handles_.assign(m, {});
  session.bob_handles_.assign(m, {});
  session.alice_done_.assign(m, false);
  session.bob_done_.assign(m, false);
  for (std::int64_t i = 0; i < m; ++i) session.associations_.emplace_back(i, inverse[i]);

  if (options.eve == GhzEve::None) {
    session.holders_.reserve(m);
    for (std::int64_t i = 0; i < m; ++i) {
      PureState state = PureState::ghz_type();
      session.m_[i] = state.measure_qubit(2, 0.0, mid_rng);
      const int holder = static_cast<int>(session.holders_.size());
      session.holders_.push_back(std::move(state));
      session.alice_handles_[i] = {holder, 0};       // delivered in timeslot i
      session.bob_handles_[inverse[i]] = {holder, 1};  // delivered in timeslot inverse[i]
    }
    return session;
  }

  // Meet-in-the-middle attack: at physical timeslot k Eve holds the
  // Alice-bound particle of triple k and the Bob-bound particle of triple
  // shuffle[k]. She Bell-measures the pair and resends a fresh pair in the
  // measured state. Triples are processed along the cycles of the shuffle so
  // the rolling joint state never exceeds 7 qubits: consumed particles are
  // collapsed out and a triple's held particle is measured by the
  // intermediary as soon as both its transmitted particles are gone.
  session.eve_outcomes_.assign(m, BellOutcome::B1);
  struct Tag {
    std::int64_t triple;
    int role;  // 0 = alice-bound, 1 = bob-bound, 2 = held
  };
  std::vector<bool> visited(m, false);
  for (std::int64_t start = 0; start < m; ++start) {
    if (visited[start]) continue;
    std::vector<std::int64_t> cycle;
    for (std::int64_t k = start; !visited[k]; k = session.shuffle_[k]) {
      visited[k] = true;
      cycle.push_back(k);
    }
    const std::size_t len = cycle.size();

    PureState state = PureState::ghz_type();
    std::vector<Tag> tags = {{cycle[0], 0}, {cycle[0], 1}, {cycle[0], 2}};
    auto find_tag = [&](std::int64_t triple, int role) {
      for (std::size_t q = 0; q < tags.size(); ++q)
        if (tags[q].triple == triple && tags[q].role == role) return static_cast<int>(q);
      throw std::logic_error("lost track of a particle");
    };
    auto collapse_out = [&](int q) {
      state.measure_qubit(q, 0.0, collapse_rng);  // discarded outcome
      state.remove_qubit(q);
      tags.erase(tags.begin() + q);
    };

    for (std::size_t i = 0; i < len; ++i) {
      const std::int64_t ts = cycle[i];
      const std::int64_t partner = session.shuffle_[ts];  // triple of the bob-bound particle
      if (i + 1 < len) {
        state = state.tensor(PureState::ghz_type());
        tags.push_back({cycle[i + 1], 0});
        tags.push_back({cycle[i + 1], 1});
        tags.push_back({cycle[i + 1], 2});
      }
      const int qa = find_tag(ts, 0);
      const int qb = find_tag(partner, 1);
      const BellOutcome outcome = state.bell_measure(qa, qb, eve_rng);
      session.eve_outcomes_[ts] = outcome;

      const int holder = static_cast<int>(session.holders_.size());
      session.holders_.push_back(PureState::bell(outcome));
      session.alice_handles_[ts] = {holder, 0};
      session.bob_handles_[ts] = {holder, 1};

      collapse_out(std::max(qa, qb));
      collapse_out(std::min(qa, qb));
      if (i >= 1) {
        const std::int64_t done_triple = ts;  // both its particles are now consumed
        const int qm = find_tag(done_triple, 2);
        session.m_[done_triple] = state.measure_qubit(qm, 0.0, mid_rng);
        state.remove_qubit(qm);
        tags.erase(tags.begin() + qm);
      }
    }
    // The cycle head's held particle is the last one standing.
    const int qm = find_tag(cycle[0], 2);
    session.m_[cycle[0]] = state.measure_qubit(qm, 0.0, mid_rng);
    (void)qm;
  }
  return session;
}

GhzKeyResult derive_key(GhzSession& session, Rng& rng) {
  GhzKeyResult result;
  const auto& m = session.published_m();
  for (std::size_t i = 0; i < session.associations().size(); ++i) {
    const auto [alice_ts, bob_ts] = session.associations()[i];
    if (session.alice_measured(alice_ts) || session.bob_measured(bob_ts)) continue;
    const Bit a = session.measure_alice(alice_ts, 0.0, rng);
    const Bit b = session.measure_bob(bob_ts, 0.0, rng);
    const Bit corrected = b ^ m[i];
    result.alice_bits.push_back(a);
    result.bob_bits.push_back(corrected);
    ++result.pairs;
    if (a != corrected) ++result.disagreements;
  }
  result.agreement_rate =
      result.pairs > 0 ? 1.0 - static_cast<double>(result.disagreements) / result.pairs : 1.0;
  return result;
}

std::optional<BellCheckResult> bell_check(GhzSession& session, double sample_fraction, Rng& rng) {
  if (sample_fraction < 0.0 || sample_fraction > 1.0)
    throw std::invalid_argument("sample_fraction must be in [0,1]");
  if (sample_fraction == 0.0) return std::nullopt;

  Rng pick = rng.child("pick");
  Rng settings = rng.child("settings");
  Rng outcomes = rng.child("outcomes");

  double sum[2][2] = {{0, 0}, {0, 0}};
  std::int64_t count[2][2] = {{0, 0}, {0, 0}};
  std::int64_t sampled = 0;
  const auto& m = session.published_m();
  for (std::size_t i = 0; i < session.associations().size(); ++i) {
    const auto [alice_ts, bob_ts] = session.associations()[i];
    if (session.alice_measured(alice_ts) || session.bob_measured(bob_ts)) continue;
    if (!pick.bernoulli(sample_fraction)) continue;
    const int ia = settings.coin() ? 1 : 0;
    const int ib = settings.coin() ? 1 : 0;
    // An anti-correlated pair (m = 1) is checked with Bob's angle negated and
    // his outcome flipped, which maps it onto the correlated case.
    const double bob_angle = m[i] ? -kChshBobAngles[ib] : kChshBobAngles[ib];
    const Bit a = session.measure_alice(alice_ts, kChshAliceAngles[ia], outcomes);
    Bit b = session.measure_bob(bob_ts, bob_angle, outcomes);
    b ^= m[i];
    sum[ia][ib] += (a == b) ? 1.0 : -1.0;
    ++count[ia][ib];
    ++sampled;
  }
  if (sampled == 0) return std::nullopt;
  auto corr = [&](int ia, int ib) {
    return count[ia][ib] > 0 ? sum[ia][ib] / static_cast<double>(count[ia][ib]) : 0.0;
  };
  return BellCheckResult{corr(0, 0) + corr(0, 1) + corr(1, 0) - corr(1, 1), sampled};
}

std::string ghz_m_record(const std::vector<Bit>& m) {
  std::string s = "ghz_m,";
  s.reserve(s.size() + m.size());
  for (Bit b : m) s.push_back(static_cast<char>('0' + b));
  return s;
}

std::string association_record(std::int64_t alice_ts, std::int64_t bob_ts) {
  return "assoc," + std::to_string(alice_ts) + ',' + std::to_string(bob_ts);
}

}  // namespace qkdlab
