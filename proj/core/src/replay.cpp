#include "preqn/replay.hpp"

namespace preqn::rl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
  if (capacity_ == 0) throw ArgumentError("ReplayBuffer: capacity must be positive");
}

void ReplayBuffer::push(Transition t) {
  if (data_.size() < capacity_) {
    data_.push_back(std::move(t));
  } else {
    data_[next_] = std::move(t);
  }
  next_ = (next_ + 1) % capacity_;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t batch_size, Rng& rng) const {
  if (data_.empty()) throw StateError("ReplayBuffer: sample() from an empty buffer");
  std::vector<Transition> batch;
  batch.reserve(batch_size);
  for (std::size_t k = 0; k < batch_size; ++k) {
    const auto idx =
        static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(data_.size())));
    batch.push_back(data_[idx]);
  }
  return batch;
}

const Transition& ReplayBuffer::at_age(std::size_t i) const {
  if (i >= data_.size()) throw ArgumentError("ReplayBuffer: at_age index out of range");
  if (data_.size() < capacity_) return data_[i];  // not yet wrapped
  return data_[(next_ + i) % capacity_];
}

}  // namespace preqn::rl
