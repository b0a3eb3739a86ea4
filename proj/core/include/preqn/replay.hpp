#pragma once

#include "preqn/common.hpp"
#include "preqn/env.hpp"

#include <cstddef>
#include <vector>

namespace preqn::rl {

/// Fixed-capacity FIFO transition store with uniform sampling (with
/// replacement). Once full, each push overwrites the oldest entry.
class ReplayBuffer {
 public:
  explicit ReplayBuffer(std::size_t capacity = 1'000'000);

  void push(Transition t);

  /// batch_size independent uniform draws; the same transition can appear
  /// more than once. Throws StateError when the buffer is empty.
  std::vector<Transition> sample(std::size_t batch_size, Rng& rng) const;

  std::size_t size() const { return data_.size(); }
  std::size_t capacity() const { return capacity_; }

  /// i-th oldest stored transition (0 = oldest still present).
  const Transition& at_age(std::size_t i) const;

 private:
  std::size_t capacity_;
  std::size_t next_ = 0;  // ring write position
  std::vector<Transition> data_;
};

}  // namespace preqn::rl
