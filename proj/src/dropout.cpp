#include "qkdlab/dropout.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace qkdlab {

void DropoutParams::validate() const {
  if (relay_count < 1) throw std::invalid_argument("relay_count must be >= 1");
  if (dropout_p < 0.0 || dropout_p > 1.0) throw std::invalid_argument("dropout_p must be in [0,1]");
  const int req = effective_required();
  if (req < 0 || req > relay_count) throw std::invalid_argument("required must be in [0, relay_count]");
}

namespace {

double binomial_coefficient(int n, int k) {
  double c = 1.0;
  for (int i = 1; i <= k; ++i) c = c * (n - k + i) / i;
  return c;
}

double exact_active_probability(const DropoutParams& params, int active) {
  const double p = params.dropout_p;
  const int n = params.relay_count;
  return binomial_coefficient(n, active) * std::pow(1.0 - p, active) * std::pow(p, n - active);
}

}  // namespace

double predict_open(const DropoutParams& params) {
  params.validate();
  double total = 0.0;
  for (int active = params.effective_required(); active <= params.relay_count; ++active)
    total += exact_active_probability(params, active);
  return total;
}

double predict_useful(const DropoutParams& params) {
  params.validate();
  return exact_active_probability(params, params.effective_required());
}

bool check_coverage(std::span<const std::vector<int>> active_sets, int relay_count) {
  for (int relay = 1; relay <= relay_count; ++relay) {
    bool absent_somewhere = false;
    for (const std::vector<int>& active : active_sets) {
      if (!std::binary_search(active.begin(), active.end(), relay)) {
        absent_somewhere = true;
        break;
      }
    }
    if (!absent_somewhere) return false;
  }
  return true;
}

namespace {

// The contracted channel for one active set: A, the active relays in chain
// order, B, with logs restricted to the group's slots. Dropped relays passed
// the signal through untouched, so the contracted chain is physically exact.
SessionData contract(const SessionData& session, const std::vector<int>& active,
                     const std::vector<std::int64_t>& slots) {
  SessionData sub;
  sub.seed = session.seed;
  sub.num_slots = static_cast<std::int64_t>(slots.size());
  sub.total_slots = sub.num_slots;
  sub.spec.relays.assign(active.size(), RelayConfig{});
  sub.dropout_slots.resize(active.size());
  sub.padding_slots.resize(active.size());

  std::vector<int> positions;
  positions.push_back(0);
  for (int j : active) positions.push_back(j);
  positions.push_back(session.relay_count() + 1);

  sub.logs.resize(positions.size());
  for (std::size_t i = 0; i < positions.size(); ++i) {
    const ParticipantLog& src = session.logs[positions[i]];
    ParticipantLog& dst = sub.logs[i];
    dst.name = i == 0 ? "A" : (i + 1 == positions.size() ? "B" : "R" + std::to_string(i));
    dst.records.reserve(slots.size());
    std::size_t cursor = 0;
    for (std::int64_t t : slots) {
      while (cursor < src.records.size() && src.records[cursor].t < t) ++cursor;
      if (cursor < src.records.size() && src.records[cursor].t == t)
        dst.records.push_back(src.records[cursor]);
    }
  }
  return sub;
}

}  // namespace

SharedKeyResult establish_shared_key(const SessionData& session, const EstablishOptions& options) {
  const int n = session.relay_count();
  if (n < 1) throw std::invalid_argument("drop-out sharing needs at least one relay");
  for (const RelayConfig& r : session.spec.relays)
    if (r.mode == RelayMode::InterceptResend)
      throw std::invalid_argument("establish_shared_key expects drop-out relays");
  const int required = options.required < 0 ? n - 1 : options.required;
  if (required < 0 || required > n) throw std::invalid_argument("required out of range");

  DropoutParams params{n, session.spec.relays[0].dropout_p, required};

  // Group slots by the announced active set. Only slots Bob received count.
  std::map<std::vector<int>, std::vector<std::int64_t>> groups;
  std::int64_t open_slots = 0, useful_slots = 0;
  for (const SlotRecord& rec : session.bob().records) {
    const std::int64_t t = rec.t;
    std::vector<int> active;
    for (int j = 1; j <= n; ++j)
      if (!session.dropped(j, t)) active.push_back(j);
    const int count = static_cast<int>(active.size());
    if (count >= required) ++open_slots;
    if (count == required) {
      ++useful_slots;
      groups[std::move(active)].push_back(t);
    }
  }

  SharedKeyResult result;
  result.predicted_open = predict_open(params);
  result.predicted_useful = predict_useful(params);
  const double denom = static_cast<double>(session.num_slots);
  result.measured_open = open_slots / denom;
  result.measured_useful = useful_slots / denom;

  std::vector<std::vector<int>> active_sets;
  for (const auto& [active, slots] : groups) {
    SessionData sub = contract(session, active, slots);
    AssembleResult assembled = assemble_key(sub, options.assemble);
    LogicalChannelKey share;
    share.active = active;
    share.slot_count = static_cast<std::int64_t>(slots.size());
    share.compared = static_cast<std::int64_t>(assembled.alice.bits.size());
    std::int64_t diff = 0;
    for (std::size_t i = 0; i < assembled.alice.bits.size(); ++i)
      diff += assembled.alice.bits[i] != assembled.bob.bits[i];
    share.qber = share.compared > 0 ? static_cast<double>(diff) / share.compared : 0.0;
    share.alice = std::move(assembled.alice);
    share.bob = std::move(assembled.bob);
    share.announcements = std::move(assembled.pairs);
    std::string tag = "QK_";
    for (int j : share.active) tag += std::to_string(j);
    share.alice.provenance += ";" + tag;
    share.bob.provenance += ";" + tag;
    active_sets.push_back(active);
    result.shares.push_back(std::move(share));
  }

  result.coverage_ok = !result.shares.empty() && check_coverage(active_sets, n);

  std::size_t min_len = SIZE_MAX;
  for (const LogicalChannelKey& share : result.shares)
    min_len = std::min(min_len, share.alice.bits.size());
  if (result.shares.empty() || min_len == 0) {
    result.complete = false;
    return result;
  }
  result.complete = true;
  result.alice_final.bits.assign(min_len, 0);
  result.bob_final.bits.assign(min_len, 0);
  for (const LogicalChannelKey& share : result.shares) {
    for (std::size_t i = 0; i < min_len; ++i) {
      result.alice_final.bits[i] ^= share.alice.bits[i];
      result.bob_final.bits[i] ^= share.bob.bits[i];
    }
  }
  result.alice_final.provenance = "dropout-xor;side=A";
  result.bob_final.provenance = "dropout-xor;side=B";
  return result;
}

CompromiseReport detect_compromised(const SessionData& session, const EstablishOptions& options,
                                    double flag_threshold) {
  CompromiseReport report;
  report.result = establish_shared_key(session, options);
  const int n = session.relay_count();
  for (const LogicalChannelKey& share : report.result.shares) {
    CompromiseReport::Row row;
    row.active = share.active;
    row.qber = share.qber;
    row.compared = share.compared;
    row.flagged = share.compared > 0 && share.qber > flag_threshold;
    report.rows.push_back(std::move(row));
  }
  for (int relay = 1; relay <= n; ++relay) {
    bool any = false, all_flagged = true;
    for (const CompromiseReport::Row& row : report.rows) {
      if (std::binary_search(row.active.begin(), row.active.end(), relay)) continue;
      any = true;
      if (!row.flagged) all_flagged = false;
    }
    if (any && all_flagged) report.suspects.push_back(relay);
  }
  return report;
}

std::string dropout_record(std::int64_t t, unsigned bitmask) {
  return "dropout," + std::to_string(t) + ',' + std::to_string(bitmask);
}

}  // namespace qkdlab
