// Minimal dense pure-state simulator (up to 8 qubits) for the GHZ-type relay
// scheme: rotated single-qubit measurements, Bell-basis pair measurements and
// an empirical CHSH estimator.
#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include "qkdlab/bb84.hpp"
#include "qkdlab/rng.hpp"

namespace qkdlab {

using cplx = std::complex<double>;

// The four Bell states. B1/B3 are the correlated/anti-correlated states
// (|00>+|11>)/sqrt2 and (|01>+|10>)/sqrt2; B2/B4 are their phase-flipped
// partners (|00>-|11>)/sqrt2 and (|01>-|10>)/sqrt2.
enum class BellOutcome : int { B1 = 1, B2 = 2, B3 = 3, B4 = 4 };

// correlated (b_i == b_j) for B1/B2, anti-correlated for B3/B4
constexpr Bit bell_parity(BellOutcome k) {
  return (k == BellOutcome::B1 || k == BellOutcome::B2) ? 0 : 1;
}

class PureState {
 public:
  static constexpr int kMaxQubits = 8;
  static constexpr double kNormTolerance = 1e-9;
  static constexpr double kZeroAmplitude = 1e-12;

  // |index> in the computational basis. Qubit 0 is the leftmost ket symbol
  // (big-endian), so index bit (n-1-q) belongs to qubit q.
  static PureState basis_state(int num_qubits, unsigned index);

  static PureState bell(BellOutcome k);

  // The three-qubit state (|B1,0> + |B3,1>)/sqrt2 with qubit order (A, B, M):
  // amplitude 1/2 on |000>, |110>, |011>, |101>.
  static PureState ghz_type();

  int num_qubits() const { return num_qubits_; }
  std::span<const cplx> amplitudes() const { return amps_; }
  double norm_squared() const;

  // Measures qubit `index` in the rotated basis
  //   |0'> = cos(a/2)|0> + sin(a/2)|1>,  |1'> = -sin(a/2)|0> + cos(a/2)|1>
  // (angle 0 is the computational basis). Collapses and renormalizes.
  Bit measure_qubit(int index, double angle, Rng& rng);

  // Projects qubits (i, j) onto the Bell basis, collapses and renormalizes.
  BellOutcome bell_measure(int i, int j, Rng& rng);

  PureState tensor(const PureState& other) const;

  // Drops a qubit that is in a definite computational state (after
  // measurement). Throws if the qubit is still in superposition.
  void remove_qubit(int index);

 private:
  PureState(int num_qubits, std::vector<cplx> amps)
      : num_qubits_(num_qubits), amps_(std::move(amps)) {}

  void renormalize();
  int bit_shift(int qubit) const { return num_qubits_ - 1 - qubit; }

  int num_qubits_ = 0;
  std::vector<cplx> amps_;
};

// Empirical CHSH S statistic over `trials` fresh two-qubit states, using the
// rotated-spin settings A in {0, pi/2}, B in {pi/4, -pi/4}:
//   S = E(a1,b1) + E(a1,b2) + E(a2,b1) - E(a2,b2).
// A maximally entangled pair gives 2*sqrt(2); any product-state source stays
// within the classical bound |S| <= 2.
double chsh_estimate(const std::function<PureState(Rng&)>& pair_source,
                     std::int64_t trials, Rng& rng);

inline constexpr double kChshAliceAngles[2] = {0.0, 1.5707963267948966};
inline constexpr double kChshBobAngles[2] = {0.7853981633974483, -0.7853981633974483};

}  // namespace qkdlab
