// Idealized two-basis qubit model: X/Y coding bases with eigenstates |+> and
// |->, coding interpretation |+> = 1 and |-> = 0. The basis-match rule makes
// this symbolic simulation exact for every prepare/measure strategy built
// from these states.
#pragma once

#include <cstdint>

#include "qkdlab/rng.hpp"

namespace qkdlab {

using Bit = std::uint8_t;  // 0 or 1

enum class Basis : std::uint8_t { X = 0, Y = 1 };

constexpr Basis complement(Basis c) { return c == Basis::X ? Basis::Y : Basis::X; }

constexpr Bit basis_bit(Basis c) { return static_cast<Bit>(c); }

constexpr char basis_char(Basis c) { return c == Basis::X ? 'X' : 'Y'; }

// A signal state is fully specified by its preparation basis and bit.
struct Qubit {
  Basis basis;
  Bit bit;

  friend bool operator==(const Qubit&, const Qubit&) = default;
};

constexpr Qubit prepare(Basis c, Bit b) { return Qubit{c, b}; }

struct Measurement {
  Bit bit;
  Qubit post;  // the collapsed state an intercept/resend party retransmits
};

// Matching basis reads the encoded bit and leaves the state untouched;
// a mismatched basis yields a fair coin and collapses the state onto the
// measured eigenstate, erasing the prior bit.
inline Measurement measure(const Qubit& q, Basis c, Rng& rng) {
  if (c == q.basis) return {q.bit, q};
  const Bit b = rng.coin() ? 1 : 0;
  return {b, Qubit{c, b}};
}

inline Basis random_basis(Rng& rng) { return rng.coin() ? Basis::Y : Basis::X; }

inline Bit random_bit(Rng& rng) { return rng.coin() ? 1 : 0; }

}  // namespace qkdlab
