#include "rampq/replay.hpp"

#include "rampq/errors.hpp"

namespace rampq {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity == 0) throw ConfigError("trainer.buffer_size: must be positive");
  ring_.reserve(std::min<std::size_t>(capacity, 1u << 16));
}

void ReplayBuffer::store(Transition t) {
  if (ring_.size() < capacity_) {
    ring_.push_back(std::move(t));
  } else {
    ring_[head_] = std::move(t);
  }
  head_ = (head_ + 1) % capacity_;
  size_ = std::min(size_ + 1, capacity_);
}

const Transition& ReplayBuffer::at(std::size_t i) const {
  if (i >= size_) throw ContractError("ReplayBuffer::at: index out of range");
  const std::size_t oldest = size_ < capacity_ ? 0 : head_;
  return ring_[(oldest + i) % capacity_];
}

std::vector<std::size_t> ReplayBuffer::sample_indices(std::size_t k, Rng& rng) const {
  if (size_ < k || k == 0) throw ContractError("ReplayBuffer::sample: buffer holds fewer than k records");
  std::vector<std::size_t> idx(k);
  for (auto& i : idx) i = static_cast<std::size_t>(rng.index(size_));
  return idx;
}

std::vector<Experience<float>> ReplayBuffer::sample(std::size_t k, Rng& rng, int depth) const {
  std::vector<Experience<float>> out;
  out.reserve(k);
  for (std::size_t i : sample_indices(k, rng)) out.push_back(to_experience(at(i), depth));
  return out;
}

Experience<float> to_experience(const Transition& t, int depth) {
  Experience<float> e;
  e.state = expand_state(t.state, depth).data;
  e.action = action_index(t.action);
  e.reward = t.reward;
  e.speed = t.speed;
  e.queue = t.queue;
  e.next_state = expand_state(t.next_state, depth).data;
  return e;
}

}  // namespace rampq
