#pragma once

#include <cstddef>
#include <vector>

#include "rampq/encoder.hpp"
#include "rampq/loss.hpp"
#include "rampq/phase.hpp"
#include "rampq/rng.hpp"

namespace rampq {

/// Replay record <s, a, r, v, u, s'> with states kept as shared compact
/// frames (consecutive states share most of their frames).
struct Transition {
  std::vector<FramePtr> state;
  SignalPhase action = SignalPhase::G;
  double reward = 0.0;
  double speed = 0.0;   // window mean merge speed (m/s)
  double queue = 0.0;   // window mean ramp queue (m)
  std::vector<FramePtr> next_state;
};

// Fixed-capacity ring; the oldest record is evicted first.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity);

  void store(Transition t);
  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  /// i-th stored record counting from the oldest.
  const Transition& at(std::size_t i) const;

  /// k independent uniform draws with replacement, as logical indices
  /// (0 = oldest). Throws ContractError when fewer than k records are held.
  std::vector<std::size_t> sample_indices(std::size_t k, Rng& rng) const;
  /// Draws k records and expands them into dense experiences.
  std::vector<Experience<float>> sample(std::size_t k, Rng& rng, int depth = 3) const;

 private:
  std::size_t capacity_;
  std::size_t size_ = 0;
  std::size_t head_ = 0;  // next write slot
  std::vector<Transition> ring_;
};

Experience<float> to_experience(const Transition& t, int depth = 3);

}  // namespace rampq
