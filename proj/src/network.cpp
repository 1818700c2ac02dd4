#include "qkdlab/network.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "qkdlab/rng.hpp"

namespace qkdlab {

void ChannelSpec::validate() const {
  for (const RelayConfig& r : relays) {
    if (r.dropout_p < 0.0 || r.dropout_p > 1.0)
      throw std::invalid_argument("relay dropout_p must be in [0,1]");
    if (r.mode == RelayMode::InterceptResend && r.dropout_p != 0.0)
      throw std::invalid_argument("dropout_p is only meaningful for drop-out relay modes");
  }
  if (!link_erasure.empty() && static_cast<int>(link_erasure.size()) != link_count())
    throw std::invalid_argument("link_erasure must have one entry per link");
  for (double p : link_erasure)
    if (p < 0.0 || p > 1.0) throw std::invalid_argument("link erasure must be in [0,1]");
  for (int link : eve_links)
    if (link < 0 || link >= link_count())
      throw std::invalid_argument("eve link index out of range");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (padding_ratio < 0.0 || padding_ratio >= 1.0)
    throw std::invalid_argument("padding_ratio must be in [0,1)");
  if (retransmission == Retransmission::Padded && relays.empty())
    throw std::invalid_argument("padded retransmission requires at least one relay");
}

const SlotRecord* ParticipantLog::find(std::int64_t t) const {
  auto it = std::lower_bound(records.begin(), records.end(), t,
                             [](const SlotRecord& r, std::int64_t v) { return r.t < v; });
  return (it != records.end() && it->t == t) ? &*it : nullptr;
}

bool SessionData::dropped(int relay_j, std::int64_t t) const {
  const auto& v = dropout_slots.at(relay_j - 1);
  return std::binary_search(v.begin(), v.end(), t);
}

const ParticipantLog* SessionData::eve_log(const std::string& name) const {
  for (const ParticipantLog& log : eve_logs)
    if (log.name == name) return &log;
  return nullptr;
}

std::int64_t SessionData::physical_send_time(std::int64_t t) const {
  if (spec.retransmission != Retransmission::Batch) return t;
  const std::int64_t k = spec.batch_size;
  return ((t + k - 1) / k) * k;
}

namespace {

struct Streams {
  std::vector<Rng> participants;  // A, R1..Rn, B
  std::vector<Rng> dropout;       // per relay
  std::vector<Rng> erasure;       // per link
  std::vector<Rng> eve;           // per eve link (indexed by position in eve_links)
  Rng padding;

  Streams(std::uint64_t seed, const ChannelSpec& spec) : padding(Rng(seed).child("pad")) {
    Rng root(seed);
    participants.push_back(root.child("A"));
    for (int j = 1; j <= spec.relay_count(); ++j)
      participants.push_back(root.child("R" + std::to_string(j)));
    participants.push_back(root.child("B"));
    for (int j = 1; j <= spec.relay_count(); ++j)
      dropout.push_back(root.child("drop:R" + std::to_string(j)));
    for (int link = 0; link < spec.link_count(); ++link)
      erasure.push_back(root.child("erase:L" + std::to_string(link)));
    for (int link : spec.eve_links)
      eve.push_back(root.child("eve:L" + std::to_string(link)));
  }
};

}  // namespace

SessionData run_session(const ChannelSpec& spec, std::int64_t num_slots, std::uint64_t seed) {
  spec.validate();
  if (num_slots < 1) throw std::invalid_argument("num_slots must be >= 1");

  const int n = spec.relay_count();
  SessionData session;
  session.spec = spec;
  session.num_slots = num_slots;
  session.seed = seed;
  session.logs.resize(n + 2);
  session.logs[0].name = "A";
  for (int j = 1; j <= n; ++j) session.logs[j].name = "R" + std::to_string(j);
  session.logs[n + 1].name = "B";
  session.dropout_slots.resize(n);
  session.padding_slots.resize(n);

  std::vector<int> eve_pos(spec.link_count(), -1);
  for (std::size_t i = 0; i < spec.eve_links.size(); ++i) {
    eve_pos[spec.eve_links[i]] = static_cast<int>(i);
    session.eve_logs.push_back({"EVE:L" + std::to_string(spec.eve_links[i]), {}});
  }
  std::vector<int> covert_pos(n + 1, -1);
  for (int j = 1; j <= n; ++j) {
    if (spec.relays[j - 1].mode == RelayMode::CompromisedAlwaysOn) {
      covert_pos[j] = static_cast<int>(session.eve_logs.size());
      session.eve_logs.push_back({"EVE:R" + std::to_string(j), {}});
    }
  }

  Streams streams(seed, spec);
  const int pad_relay = (spec.retransmission == Retransmission::Padded) ? n : 0;

  auto choose = [&](Rng& rng) -> Basis {
    Basis c = random_basis(rng);
    return spec.forced_basis ? *spec.forced_basis : c;
  };

  std::int64_t t = 0;
  for (std::int64_t alice_slot = 0; alice_slot < num_slots; ++alice_slot) {
    // Padding slots originate at the padding relay; a run of them precedes
    // each Alice slot so that on average a fraction r of its onward slots
    // are padding.
    if (pad_relay != 0) {
      while (streams.padding.bernoulli(spec.padding_ratio)) {
        ++t;
        session.padding_slots[pad_relay - 1].push_back(t);
        const Basis c = choose(streams.participants[pad_relay]);
        const Bit b = random_bit(streams.participants[pad_relay]);
        session.logs[pad_relay].records.push_back({t, c, b});
        Qubit q = prepare(c, b);
        const int link = pad_relay;  // pad relay is adjacent to B
        bool lost = false;
        if (eve_pos[link] >= 0) {
          Rng& er = streams.eve[eve_pos[link]];
          const Basis ec = choose(er);
          const Measurement em = measure(q, ec, er);
          session.eve_logs[eve_pos[link]].records.push_back({t, ec, em.bit});
          q = em.post;
        }
        if (!spec.link_erasure.empty() && streams.erasure[link].bernoulli(spec.link_erasure[link]))
          lost = true;
        if (lost) {
          session.erased_slots.push_back(t);
          continue;
        }
        Rng& br = streams.participants[n + 1];
        const Basis cb = choose(br);
        const Measurement mb = measure(q, cb, br);
        session.logs[n + 1].records.push_back({t, cb, mb.bit});
      }
    }

    ++t;
    Rng& ar = streams.participants[0];
    const Basis ca = choose(ar);
    const Bit ba = random_bit(ar);
    session.logs[0].records.push_back({t, ca, ba});
    Qubit q = prepare(ca, ba);

    bool lost = false;
    for (int link = 0; link < spec.link_count() && !lost; ++link) {
      if (eve_pos[link] >= 0) {
        Rng& er = streams.eve[eve_pos[link]];
        const Basis ec = choose(er);
        const Measurement em = measure(q, ec, er);
        session.eve_logs[eve_pos[link]].records.push_back({t, ec, em.bit});
        q = em.post;
      }
      if (!spec.link_erasure.empty() && streams.erasure[link].bernoulli(spec.link_erasure[link])) {
        lost = true;
        session.erased_slots.push_back(t);
        break;
      }
      const int pos = link + 1;  // receiving participant
      if (pos <= n) {
        const RelayConfig& cfg = spec.relays[pos - 1];
        switch (cfg.mode) {
          case RelayMode::InterceptResend: {
            Rng& rr = streams.participants[pos];
            const Basis c = choose(rr);
            const Measurement m = measure(q, c, rr);
            session.logs[pos].records.push_back({t, c, m.bit});
            q = m.post;
            break;
          }
          case RelayMode::Dropout: {
            if (streams.dropout[pos - 1].bernoulli(cfg.dropout_p)) {
              session.dropout_slots[pos - 1].push_back(t);  // qubit passes untouched
            } else {
              Rng& rr = streams.participants[pos];
              const Basis c = choose(rr);
              const Measurement m = measure(q, c, rr);
              session.logs[pos].records.push_back({t, c, m.bit});
              q = m.post;
            }
            break;
          }
          case RelayMode::CompromisedAlwaysOn: {
            const bool claim_drop = streams.dropout[pos - 1].bernoulli(cfg.dropout_p);
            Rng& rr = streams.participants[pos];
            const Basis c = choose(rr);
            const Measurement m = measure(q, c, rr);
            q = m.post;
            if (claim_drop) {
              session.dropout_slots[pos - 1].push_back(t);
              session.eve_logs[covert_pos[pos]].records.push_back({t, c, m.bit});
            } else {
              session.logs[pos].records.push_back({t, c, m.bit});
            }
            break;
          }
        }
      } else {
        Rng& br = streams.participants[pos];
        const Basis cb = choose(br);
        const Measurement mb = measure(q, cb, br);
        session.logs[pos].records.push_back({t, cb, mb.bit});
      }
    }
  }
  session.total_slots = t;
  return session;
}

LinkCheck propagation_check(const SessionData& session, std::int64_t t) {
  const int n = session.relay_count();
  LinkCheck check;
  check.open.resize(n + 1);
  std::vector<const SlotRecord*> rec(n + 2);
  for (int pos = 0; pos <= n + 1; ++pos) {
    rec[pos] = session.logs[pos].find(t);
    if (!rec[pos]) check.missing.push_back(pos);
  }
  for (int link = 0; link <= n; ++link) {
    if (!rec[link] || !rec[link + 1]) continue;
    const bool open = rec[link]->c == rec[link + 1]->c;
    check.open[link] = open;
    if (open && rec[link]->b != rec[link + 1]->b) check.bits_propagate = false;
  }
  return check;
}

namespace {

constexpr const char* kLogHeader = "qkdlab-log v1";

std::string fmt_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::string relay_mode_name(RelayMode m) {
  switch (m) {
    case RelayMode::InterceptResend: return "ir";
    case RelayMode::Dropout: return "dropout";
    case RelayMode::CompromisedAlwaysOn: return "compromised";
  }
  return "?";
}

RelayMode parse_relay_mode(const std::string& s, std::size_t line) {
  if (s == "ir") return RelayMode::InterceptResend;
  if (s == "dropout") return RelayMode::Dropout;
  if (s == "compromised") return RelayMode::CompromisedAlwaysOn;
  throw LogFormatError("unknown relay mode '" + s + "'", line);
}

std::string retransmission_name(Retransmission r) {
  switch (r) {
    case Retransmission::Immediate: return "immediate";
    case Retransmission::Batch: return "batch";
    case Retransmission::Padded: return "padded";
  }
  return "?";
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_num(const std::string& s, std::size_t line) {
  T value{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw LogFormatError("bad number '" + s + "'", line);
  return value;
}

double parse_double(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw LogFormatError("bad number '" + s + "'", line);
  }
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F fmt) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ';';
    out += fmt(v[i]);
  }
  return out;
}

}  // namespace

void write_session_log(const SessionData& session, std::ostream& out) {
  const ChannelSpec& spec = session.spec;
  out << kLogHeader << '\n';
  out << "#meta relays=" << spec.relay_count();
  out << " modes=" << join(spec.relays, [](const RelayConfig& r) { return relay_mode_name(r.mode); });
  out << " dropout_p=" << join(spec.relays, [](const RelayConfig& r) { return fmt_double(r.dropout_p); });
  out << " erasure=" << join(spec.link_erasure, [](double p) { return fmt_double(p); });
  out << " eve_links=" << join(spec.eve_links, [](int l) { return std::to_string(l); });
  out << " retransmission=" << retransmission_name(spec.retransmission);
  out << " batch=" << spec.batch_size;
  out << " padding=" << fmt_double(spec.padding_ratio);
  out << " forced=" << (spec.forced_basis ? std::string(1, basis_char(*spec.forced_basis)) : "");
  out << " seed=" << session.seed;
  out << " slots=" << session.num_slots;
  out << " total=" << session.total_slots << '\n';

  struct Row {
    std::int64_t t;
    int order;
    const std::string* name;
    std::string c, b, flags;
  };
  std::vector<Row> rows;
  auto flag_join = [](std::vector<std::string> fl) {
    std::string s;
    for (std::size_t i = 0; i < fl.size(); ++i) {
      if (i) s += ';';
      s += fl[i];
    }
    return s;
  };

  const int n = session.relay_count();
  for (int pos = 0; pos <= n + 1; ++pos) {
    const ParticipantLog& log = session.logs[pos];
    for (const SlotRecord& r : log.records) {
      std::vector<std::string> fl;
      if (pos >= 1 && pos <= n &&
          std::binary_search(session.padding_slots[pos - 1].begin(),
                             session.padding_slots[pos - 1].end(), r.t))
        fl.push_back("pad");
      rows.push_back({r.t, pos, &log.name, std::string(1, basis_char(r.c)),
                      std::to_string(int(r.b)), flag_join(std::move(fl))});
    }
  }
  for (int j = 1; j <= n; ++j) {
    for (std::int64_t t : session.dropout_slots[j - 1])
      rows.push_back({t, j, &session.logs[j].name, "", "", "drop"});
  }
  for (const ParticipantLog& log : session.eve_logs) {
    const bool covert = log.name.rfind("EVE:R", 0) == 0;
    for (const SlotRecord& r : log.records)
      rows.push_back({r.t, 1000, &log.name, std::string(1, basis_char(r.c)),
                      std::to_string(int(r.b)), covert ? "covert" : ""});
  }
  for (std::int64_t t : session.erased_slots) {
    static const std::string kLostName = "LOST";
    rows.push_back({t, 2000, &kLostName, "", "", "lost"});
  }
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
    if (a.t != b.t) return a.t < b.t;
    if (a.order != b.order) return a.order < b.order;
    return *a.name < *b.name;
  });
  out << "t,participant,c,b,flags\n";
  for (const Row& r : rows)
    out << r.t << ',' << *r.name << ',' << r.c << ',' << r.b << ',' << r.flags << '\n';
}

SessionData read_session_log(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;

  auto next_line = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    ++lineno;
    return true;
  };

  if (!next_line() || line != kLogHeader)
    throw LogFormatError("expected header '" + std::string(kLogHeader) + "'", lineno ? lineno : 1);

  SessionData session;
  if (!next_line() || line.rfind("#meta ", 0) != 0)
    throw LogFormatError("expected #meta line", lineno ? lineno : 2);

  int relays = -1;
  {
    std::istringstream meta(line.substr(6));
    std::string kv;
    while (meta >> kv) {
      const std::size_t eq = kv.find('=');
      if (eq == std::string::npos) throw LogFormatError("bad meta token '" + kv + "'", lineno);
      const std::string key = kv.substr(0, eq);
      const std::string value = kv.substr(eq + 1);
      auto items = [&]() {
        return value.empty() ? std::vector<std::string>{} : split(value, ';');
      };
      if (key == "relays") {
        relays = parse_num<int>(value, lineno);
        session.spec.relays.resize(relays);
      } else if (key == "modes") {
        auto v = items();
        if (static_cast<int>(v.size()) != relays) throw LogFormatError("modes count mismatch", lineno);
        for (std::size_t i = 0; i < v.size(); ++i)
          session.spec.relays[i].mode = parse_relay_mode(v[i], lineno);
      } else if (key == "dropout_p") {
        auto v = items();
        if (static_cast<int>(v.size()) != relays) throw LogFormatError("dropout_p count mismatch", lineno);
        for (std::size_t i = 0; i < v.size(); ++i)
          session.spec.relays[i].dropout_p = parse_double(v[i], lineno);
      } else if (key == "erasure") {
        for (const std::string& s : items())
          session.spec.link_erasure.push_back(parse_double(s, lineno));
      } else if (key == "eve_links") {
        for (const std::string& s : items())
          session.spec.eve_links.push_back(parse_num<int>(s, lineno));
      } else if (key == "retransmission") {
        if (value == "immediate") session.spec.retransmission = Retransmission::Immediate;
        else if (value == "batch") session.spec.retransmission = Retransmission::Batch;
        else if (value == "padded") session.spec.retransmission = Retransmission::Padded;
        else throw LogFormatError("unknown retransmission '" + value + "'", lineno);
      } else if (key == "batch") {
        session.spec.batch_size = parse_num<int>(value, lineno);
      } else if (key == "padding") {
        session.spec.padding_ratio = parse_double(value, lineno);
      } else if (key == "forced") {
        if (value == "X") session.spec.forced_basis = Basis::X;
        else if (value == "Y") session.spec.forced_basis = Basis::Y;
        else if (!value.empty()) throw LogFormatError("bad forced basis", lineno);
      } else if (key == "seed") {
        session.seed = parse_num<std::uint64_t>(value, lineno);
      } else if (key == "slots") {
        session.num_slots = parse_num<std::int64_t>(value, lineno);
      } else if (key == "total") {
        session.total_slots = parse_num<std::int64_t>(value, lineno);
      } else {
        throw LogFormatError("unknown meta key '" + key + "'", lineno);
      }
    }
  }
  if (relays < 0) throw LogFormatError("meta line missing relays=", lineno);

  if (!next_line() || line != "t,participant,c,b,flags")
    throw LogFormatError("expected column header 't,participant,c,b,flags'", lineno ? lineno : 3);

  const int n = relays;
  session.logs.resize(n + 2);
  session.logs[0].name = "A";
  for (int j = 1; j <= n; ++j) session.logs[j].name = "R" + std::to_string(j);
  session.logs[n + 1].name = "B";
  session.dropout_slots.resize(n);
  session.padding_slots.resize(n);
  for (int link : session.spec.eve_links)
    session.eve_logs.push_back({"EVE:L" + std::to_string(link), {}});
  for (int j = 1; j <= n; ++j)
    if (session.spec.relays[j - 1].mode == RelayMode::CompromisedAlwaysOn)
      session.eve_logs.push_back({"EVE:R" + std::to_string(j), {}});

  auto participant_index = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < session.logs.size(); ++i)
      if (session.logs[i].name == name) return static_cast<int>(i);
    return -1;
  };
  auto eve_index = [&](const std::string& name) -> int {
    for (std::size_t i = 0; i < session.eve_logs.size(); ++i)
      if (session.eve_logs[i].name == name) return static_cast<int>(i);
    return -1;
  };

  while (next_line()) {
    if (line.empty()) continue;
    const std::vector<std::string> f = split(line, ',');
    if (f.size() != 5) throw LogFormatError("expected 5 comma-separated fields", lineno);
    const std::int64_t t = parse_num<std::int64_t>(f[0], lineno);
    const std::string& name = f[1];
    const std::vector<std::string> flags = f[4].empty() ? std::vector<std::string>{} : split(f[4], ';');
    auto has_flag = [&](const char* fl) {
      return std::find(flags.begin(), flags.end(), fl) != flags.end();
    };

    if (name == "LOST") {
      session.erased_slots.push_back(t);
      continue;
    }
    if (has_flag("drop")) {
      const int pos = participant_index(name);
      if (pos < 1 || pos > n) throw LogFormatError("drop flag on non-relay '" + name + "'", lineno);
      session.dropout_slots[pos - 1].push_back(t);
      continue;
    }
    if (f[2].empty() || f[3].empty()) throw LogFormatError("record missing basis or bit", lineno);
    Basis c;
    if (f[2] == "X") c = Basis::X;
    else if (f[2] == "Y") c = Basis::Y;
    else throw LogFormatError("bad basis '" + f[2] + "'", lineno);
    const int bi = parse_num<int>(f[3], lineno);
    if (bi != 0 && bi != 1) throw LogFormatError("bad bit '" + f[3] + "'", lineno);
    const SlotRecord rec{t, c, static_cast<Bit>(bi)};

    if (name.rfind("EVE:", 0) == 0) {
      const int idx = eve_index(name);
      if (idx < 0) throw LogFormatError("unexpected eavesdropper log '" + name + "'", lineno);
      session.eve_logs[idx].records.push_back(rec);
      continue;
    }
    const int pos = participant_index(name);
    if (pos < 0) throw LogFormatError("unknown participant '" + name + "'", lineno);
    session.logs[pos].records.push_back(rec);
    if (has_flag("pad")) {
      if (pos < 1 || pos > n) throw LogFormatError("pad flag on non-relay", lineno);
      session.padding_slots[pos - 1].push_back(t);
    }
  }

  for (ParticipantLog& log : session.logs)
    std::sort(log.records.begin(), log.records.end(),
              [](const SlotRecord& a, const SlotRecord& b) { return a.t < b.t; });
  for (auto& v : session.dropout_slots) std::sort(v.begin(), v.end());
  for (auto& v : session.padding_slots) std::sort(v.begin(), v.end());
  std::sort(session.erased_slots.begin(), session.erased_slots.end());
  return session;
}

}  // namespace qkdlab
