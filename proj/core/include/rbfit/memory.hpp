#pragma once

#include <cstddef>

namespace rbfit {

/// Byte counter for the solver's working allocations. Charged/released
/// around the large transient buffers (normal matrix, resident design
/// blocks, row views) so tests can assert the planned peak is respected.
class MemoryAccountant {
  public:
    void charge(std::size_t bytes) {
        current_ += bytes;
        if (current_ > peak_) peak_ = current_;
    }
    void release(std::size_t bytes) { current_ = bytes <= current_ ? current_ - bytes : 0; }

    std::size_t current() const { return current_; }
    std::size_t peak() const { return peak_; }
    void reset() { current_ = peak_ = 0; }

  private:
    std::size_t current_ = 0;
    std::size_t peak_ = 0;
};

}  // namespace rbfit
