#include "qkdlab/statevector.hpp"

#include <cmath>
#include <stdexcept>

namespace qkdlab {

namespace {

constexpr double kInvSqrt2 = 0.7071067811865475244;

void check_index(int index, int num_qubits) {
  if (index < 0 || index >= num_qubits) throw std::out_of_range("qubit index out of range");
}

}  // namespace

PureState PureState::basis_state(int num_qubits, unsigned index) {
  if (num_qubits < 1 || num_qubits > kMaxQubits)
    throw std::invalid_argument("num_qubits must be in [1, 8]");
  std::vector<cplx> amps(std::size_t{1} << num_qubits, cplx{0.0, 0.0});
  if (index >= amps.size()) throw std::out_of_range("basis index out of range");
  amps[index] = 1.0;
  return PureState(num_qubits, std::move(amps));
}

PureState PureState::bell(BellOutcome k) {
  std::vector<cplx> amps(4, cplx{0.0, 0.0});
  switch (k) {
    case BellOutcome::B1: amps[0b00] = kInvSqrt2; amps[0b11] = kInvSqrt2; break;
    case BellOutcome::B2: amps[0b00] = kInvSqrt2; amps[0b11] = -kInvSqrt2; break;
    case BellOutcome::B3: amps[0b01] = kInvSqrt2; amps[0b10] = kInvSqrt2; break;
    case BellOutcome::B4: amps[0b01] = kInvSqrt2; amps[0b10] = -kInvSqrt2; break;
  }
  return PureState(2, std::move(amps));
}

PureState PureState::ghz_type() {
  std::vector<cplx> amps(8, cplx{0.0, 0.0});
  amps[0b000] = 0.5;
  amps[0b110] = 0.5;
  amps[0b011] = 0.5;
  amps[0b101] = 0.5;
  return PureState(3, std::move(amps));
}

double PureState::norm_squared() const {
  double s = 0.0;
  for (const cplx& a : amps_) s += std::norm(a);
  return s;
}

void PureState::renormalize() {
  const double n = std::sqrt(norm_squared());
  if (n <= 0.0) throw std::logic_error("state collapsed to zero norm");
  for (cplx& a : amps_) a /= n;
}

Bit PureState::measure_qubit(int index, double angle, Rng& rng) {
  check_index(index, num_qubits_);
  const double c = std::cos(angle / 2.0);
  const double s = std::sin(angle / 2.0);
  const std::size_t stride = std::size_t{1} << bit_shift(index);

  // Rotate the measured qubit into the requested basis, pair by pair.
  double p0 = 0.0, p1 = 0.0;
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    if (i & stride) continue;
    const cplx a0 = amps_[i], a1 = amps_[i | stride];
    const cplx r0 = c * a0 + s * a1;
    const cplx r1 = -s * a0 + c * a1;
    amps_[i] = r0;
    amps_[i | stride] = r1;
    p0 += std::norm(r0);
    p1 += std::norm(r1);
  }
  if (std::abs(p0 + p1 - 1.0) > kNormTolerance)
    throw std::logic_error("measurement probabilities do not sum to 1");

  const Bit outcome = rng.uniform() < p1 ? 1 : 0;

  // Project, then rotate back to the computational basis.
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    if (i & stride) continue;
    cplx r0 = amps_[i], r1 = amps_[i | stride];
    if (outcome == 0) r1 = 0.0; else r0 = 0.0;
    amps_[i] = c * r0 - s * r1;
    amps_[i | stride] = s * r0 + c * r1;
  }
  renormalize();
  return outcome;
}

BellOutcome PureState::bell_measure(int i, int j, Rng& rng) {
  check_index(i, num_qubits_);
  check_index(j, num_qubits_);
  if (i == j) throw std::invalid_argument("bell_measure needs two distinct qubits");
  const std::size_t si = std::size_t{1} << bit_shift(i);
  const std::size_t sj = std::size_t{1} << bit_shift(j);

  // Components of the state along each Bell vector of the (i, j) pair,
  // indexed by the remaining qubits.
  std::vector<cplx> comp[4];
  for (auto& v : comp) v.assign(amps_.size(), cplx{0.0, 0.0});
  double prob[4] = {0, 0, 0, 0};
  for (std::size_t r = 0; r < amps_.size(); ++r) {
    if (r & (si | sj)) continue;
    const cplx a00 = amps_[r];
    const cplx a01 = amps_[r | sj];
    const cplx a10 = amps_[r | si];
    const cplx a11 = amps_[r | si | sj];
    comp[0][r] = kInvSqrt2 * (a00 + a11);
    comp[1][r] = kInvSqrt2 * (a00 - a11);
    comp[2][r] = kInvSqrt2 * (a01 + a10);
    comp[3][r] = kInvSqrt2 * (a01 - a10);
    for (int k = 0; k < 4; ++k) prob[k] += std::norm(comp[k][r]);
  }
  const double total = prob[0] + prob[1] + prob[2] + prob[3];
  if (std::abs(total - 1.0) > kNormTolerance)
    throw std::logic_error("bell measurement probabilities do not sum to 1");

  const double u = rng.uniform();
  int k = 0;
  double acc = prob[0];
  while (k < 3 && u >= acc) acc += prob[++k];

  for (cplx& a : amps_) a = 0.0;
  const double sign = (k == 1 || k == 3) ? -1.0 : 1.0;
  const bool anti = (k == 2 || k == 3);
  for (std::size_t r = 0; r < amps_.size(); ++r) {
    if (r & (si | sj)) continue;
    const cplx c = comp[k][r];
    if (std::abs(c) < kZeroAmplitude) continue;
    if (!anti) {
      amps_[r] = kInvSqrt2 * c;
      amps_[r | si | sj] = sign * kInvSqrt2 * c;
    } else {
      amps_[r | sj] = kInvSqrt2 * c;
      amps_[r | si] = sign * kInvSqrt2 * c;
    }
  }
  renormalize();
  return static_cast<BellOutcome>(k + 1);
}

PureState PureState::tensor(const PureState& other) const {
  const int n = num_qubits_ + other.num_qubits_;
  if (n > kMaxQubits) throw std::invalid_argument("tensor product exceeds 8 qubits");
  std::vector<cplx> amps(std::size_t{1} << n, cplx{0.0, 0.0});
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    if (amps_[i] == cplx{0.0, 0.0}) continue;
    for (std::size_t j = 0; j < other.amps_.size(); ++j) {
      amps[(i << other.num_qubits_) | j] = amps_[i] * other.amps_[j];
    }
  }
  return PureState(n, std::move(amps));
}

void PureState::remove_qubit(int index) {
  check_index(index, num_qubits_);
  if (num_qubits_ == 1) throw std::invalid_argument("cannot remove the last qubit");
  const std::size_t stride = std::size_t{1} << bit_shift(index);

  double w0 = 0.0, w1 = 0.0;
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    (i & stride ? w1 : w0) += std::norm(amps_[i]);
  }
  if (w0 > kNormTolerance && w1 > kNormTolerance)
    throw std::logic_error("remove_qubit requires a definite computational value");
  const bool value = w1 > w0;

  std::vector<cplx> amps(amps_.size() / 2, cplx{0.0, 0.0});
  for (std::size_t i = 0; i < amps_.size(); ++i) {
    if (((i & stride) != 0) != value) continue;
    const std::size_t low = i & (stride - 1);
    const std::size_t high = (i >> (bit_shift(index) + 1)) << bit_shift(index);
    amps[high | low] = amps_[i];
  }
  --num_qubits_;
  amps_ = std::move(amps);
  renormalize();
}

double chsh_estimate(const std::function<PureState(Rng&)>& pair_source,
                     std::int64_t trials, Rng& rng) {
  if (trials < 1) throw std::invalid_argument("trials must be >= 1");
  double sum[2][2] = {{0, 0}, {0, 0}};
  std::int64_t count[2][2] = {{0, 0}, {0, 0}};
  for (std::int64_t t = 0; t < trials; ++t) {
    PureState state = pair_source(rng);
    if (state.num_qubits() != 2) throw std::invalid_argument("pair_source must yield 2-qubit states");
    const int ia = rng.coin() ? 1 : 0;
    const int ib = rng.coin() ? 1 : 0;
    const Bit a = state.measure_qubit(0, kChshAliceAngles[ia], rng);
    const Bit b = state.measure_qubit(1, kChshBobAngles[ib], rng);
    sum[ia][ib] += (a == b) ? 1.0 : -1.0;
    ++count[ia][ib];
  }
  auto corr = [&](int ia, int ib) {
    return count[ia][ib] > 0 ? sum[ia][ib] / static_cast<double>(count[ia][ib]) : 0.0;
  };
  return corr(0, 0) + corr(0, 1) + corr(1, 0) - corr(1, 1);
}

}  // namespace qkdlab
