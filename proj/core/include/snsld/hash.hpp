#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <string_view>

namespace snsld {

/// 64-bit FNV-1a, used for content hashes of artifacts and model ids.
class Fnv1a {
 public:
  void update(const void* data, std::size_t size) noexcept {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
      state_ ^= bytes[i];
      state_ *= 0x100000001b3ULL;
    }
  }
  void update(std::string_view s) noexcept { update(s.data(), s.size()); }
  template <class T>
  void update_value(const T& v) noexcept {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    update(buf, sizeof(T));
  }
  std::uint64_t digest() const noexcept { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view s) noexcept {
  Fnv1a h;
  h.update(s);
  return h.digest();
}

std::string to_hex(std::uint64_t value);

}  // namespace snsld
