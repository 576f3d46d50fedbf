#pragma once

#include <cstdint>
#include <cstring>
#include <span>

namespace eit {

// FNV-1a, used to fingerprint assembly inputs.
class Hasher {
 public:
  Hasher& add_bytes(const void* data, std::size_t size) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= bytes[i];
      state_ *= 1099511628211ULL;
    }
    return *this;
  }
  template <class T>
  Hasher& add(const T& value) {
    return add_bytes(&value, sizeof(T));
  }
  template <class T>
  Hasher& add(std::span<const T> values) {
    add(values.size());
    return add_bytes(values.data(), values.size_bytes());
  }
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 14695981039346656037ULL;
};

}  // namespace eit
